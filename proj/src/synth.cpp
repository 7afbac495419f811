#include "astgin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "astgin/csv.hpp"
#include "astgin/error.hpp"

namespace astgin::synth {

namespace {

constexpr double kCenterLat = 56.46;
constexpr double kCenterLon = -2.97;
constexpr double kMetersPerDegree = 111320.0;
constexpr const char* kWeatherText[] = {"", "sunny", "cloudy", "foggy", "light rain", "heavy rain"};
constexpr const char* kChargerText[] = {"slow", "fast", "rapid"};

int next_weather(int label, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  if (r < 0.8) return label;
  const int step = r < 0.9 ? -1 : 1;
  return std::clamp(label + step, 1, 5);
}

}  // namespace

void validate(const SynthConfig& config) {
  if (config.n_stations < 1) throw ValidationError("synth: n_stations must be >= 1");
  if (config.days < 1) throw ValidationError("synth: days must be >= 1");
  if (!(config.spatial_smoothing >= 0.0 && config.spatial_smoothing < 1.0))
    throw ValidationError("synth: spatial_smoothing must be in [0, 1)");
  if (!(config.noise_std >= 0.0)) throw ValidationError("synth: noise_std must be >= 0");
  if (!(config.radius_km > 0.0)) throw ValidationError("synth: radius_km must be > 0");
}

SynthData generate(const SynthConfig& config) {
  validate(config);
  const std::size_t n = config.n_stations;
  const std::size_t steps = config.days * 48;
  const Minutes origin = config.origin != 0 ? config.origin : parse_timestamp("2018-03-05 00:00");
  const ingest::TimeGrid grid = ingest::make_grid(origin, steps);

  std::mt19937_64 geo_rng(config.seed);
  std::mt19937_64 weather_rng(config.seed ^ 0x5eed0001ULL);
  std::mt19937_64 noise_rng(config.seed ^ 0x5eed0002ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthData out;
  std::vector<std::string> ids;
  std::vector<graph::Coordinate> coords;
  const double r_m = config.radius_km * 1000.0;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "SYN%03zu", i + 1);
    ids.emplace_back(buf);
    const double radius = r_m * std::sqrt(unit(geo_rng));
    const double angle = 2.0 * std::numbers::pi * unit(geo_rng);
    const double dy = radius * std::sin(angle), dx = radius * std::cos(angle);
    coords.push_back({kCenterLat + dy / kMetersPerDegree,
                      kCenterLon + dx / (kMetersPerDegree * std::cos(kCenterLat * std::numbers::pi / 180.0))});
    out.poi_index.push_back(i % ingest::kPoiCategories.size());
  }
  // Equal pairwise distances (always the case for two stations) have zero
  // spread, so the disc radius stands in for the bandwidth.
  graph::GraphOptions options;
  if (n > 1 && !(graph::default_sigma(graph::pairwise_distance(coords)) > 0.0)) options.sigma = r_m;
  out.graph = n > 1 ? graph::build_graph(ids, coords, options)
                    : graph::build_graph_from_distances(ids, Matrix(1, 1, 0.0));
  if (n == 1) out.graph.coords = coords;

  const std::size_t hours = (steps + 1) / 2;
  out.hourly_weather.resize(hours);
  int label = 1 + static_cast<int>(std::uniform_int_distribution<int>(0, 4)(weather_rng));
  for (std::size_t h = 0; h < hours; ++h) {
    if (h > 0) label = next_weather(label, weather_rng);
    out.hourly_weather[h] = label;
  }

  // Kernel weights over the other stations (adjacency without the diagonal).
  Matrix mix(n, n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    double total = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      if (b != a) total += out.graph.adjacency(a, b);
    for (std::size_t b = 0; b < n; ++b)
      if (b != a && total > 0.0) mix(a, b) = out.graph.adjacency(a, b) / total;
  }

  Matrix values(n, steps);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> own(n);
  for (std::size_t t = 0; t < steps; ++t) {
    const double hour = static_cast<double>(minute_of_day(grid.at(t))) / 60.0;
    const double severity = (out.hourly_weather[t / 2] - 1) / 4.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double phase = static_cast<double>(out.poi_index[i]) * config.poi_phase_shift;
      own[i] = config.base_level + config.daily_amplitude * std::sin(2.0 * std::numbers::pi * (hour - phase) / 24.0) +
               config.weather_effect * (1.0 - severity);
    }
    for (std::size_t i = 0; i < n; ++i) {
      double neighbor = 0.0, weight = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        neighbor += mix(i, j) * own[j];
        weight += mix(i, j);
      }
      const double s = weight > 0.0 ? config.spatial_smoothing : 0.0;
      double x = (1.0 - s) * own[i] + s * neighbor;
      const double z = noise(noise_rng);
      if (config.noise_std > 0.0) x += config.noise_std * z;
      values(i, t) = std::clamp(x, 0.0, 1.0);
    }
  }

  auto& d = out.data;
  d.availability.grid = grid;
  d.availability.station_ids = ids;
  d.availability.values = std::move(values);
  d.availability.connector_counts.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.availability.connector_counts[i] = 1 + static_cast<int>(i % 3);
  d.statics.station_ids = ids;
  d.statics.alpha = Matrix(n, ingest::kPoiCategories.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) d.statics.alpha(i, out.poi_index[i]) = 1.0;
  d.dynamics.grid = grid;
  d.dynamics.station_ids = ids;
  d.dynamics.beta = Tensor3(n, 1, steps);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < steps; ++t) d.dynamics.beta(i, 0, t) = (out.hourly_weather[t / 2] - 1) / 4.0;
  for (const auto& c : coords) d.coords.emplace_back(c);
  return out;
}

void write_raw(const SynthData& data, const std::filesystem::path& dir) {
  const auto& avail = data.data.availability;
  const auto& ids = avail.station_ids;
  const auto& grid = avail.grid;

  std::string sessions = "station_id,connector_id,start,end,energy_kwh,lat,lon,charger_type\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int connectors = avail.connector_counts[i];
    const auto& c = *data.data.coords[i];
    const std::string lat = csv::format_number(c.lat), lon = csv::format_number(c.lon);
    const char* type = kChargerText[i % 3];
    for (std::size_t t = 0; t < grid.count; ++t) {
      auto busy = static_cast<long>(std::lround((1.0 - avail.values(i, t)) * 30.0 * connectors));
      for (int k = 0; k < connectors && busy > 0; ++k) {
        const long minutes = std::min<long>(30, busy);
        busy -= minutes;
        const Minutes start = grid.at(t);
        sessions += csv::join({ids[i], std::to_string(k + 1), format_timestamp(start), format_timestamp(start + minutes),
                               csv::format_number(std::round(minutes * 0.12 * 100.0) / 100.0), lat, lon, type}) +
                    "\n";
      }
    }
  }
  csv::write_text_file(dir / "sessions.csv", sessions);

  std::string weather = "timestamp,description\n";
  // The first record sits at the origin so every grid step is covered.
  for (std::size_t h = 0; h < data.hourly_weather.size(); ++h)
    weather += format_timestamp(grid.origin + static_cast<Minutes>(h) * 60) + "," +
               kWeatherText[data.hourly_weather[h]] + "\n";
  csv::write_text_file(dir / "weather.csv", weather);

  std::string poi = "station_id,category\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    poi += ids[i] + "," + std::string(ingest::kPoiCategories[data.poi_index[i]]) + "\n";
  csv::write_text_file(dir / "poi.csv", poi);

  std::string conn = "station_id,connectors\n";
  for (std::size_t i = 0; i < ids.size(); ++i) conn += ids[i] + "," + std::to_string(avail.connector_counts[i]) + "\n";
  csv::write_text_file(dir / "connectors.csv", conn);
}

}  // namespace astgin::synth
