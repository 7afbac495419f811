#include "astgin/dataset.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "astgin/csv.hpp"
#include "astgin/error.hpp"

namespace astgin::dataset {

namespace {

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

std::string wide_csv(const std::vector<std::string>& ids, const ingest::TimeGrid& grid,
                     const std::function<double(std::size_t, std::size_t)>& value) {
  std::vector<std::string> header{"timestamp"};
  header.insert(header.end(), ids.begin(), ids.end());
  std::string out = csv::join(header) + "\n";
  std::vector<std::string> row(ids.size() + 1);
  for (std::size_t t = 0; t < grid.count; ++t) {
    row[0] = format_timestamp(grid.at(t));
    for (std::size_t n = 0; n < ids.size(); ++n) row[n + 1] = csv::format_number(value(n, t));
    out += csv::join(row) + "\n";
  }
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(where + ": '" + text + "' is not a number");
}

// Reads a wide timestamp-by-station file into an N x T matrix.
Matrix read_wide(const std::filesystem::path& path, const std::vector<std::string>& ids, ingest::TimeGrid& grid) {
  const csv::Table table = csv::read_file(path);
  const std::string name = path.filename().string();
  if (table.header.size() != ids.size() + 1 || table.header[0] != "timestamp")
    throw ValidationError(name + ": expected timestamp plus " + std::to_string(ids.size()) + " station columns");
  for (std::size_t n = 0; n < ids.size(); ++n)
    if (table.header[n + 1] != csv::to_lower(ids[n]))
      throw ValidationError(name + ": column " + std::to_string(n + 2) + " is not station '" + ids[n] + "'");
  if (table.rows.empty()) throw ValidationError(name + ": no rows");
  Matrix values(ids.size(), table.rows.size());
  for (std::size_t t = 0; t < table.rows.size(); ++t) {
    const auto& row = table.rows[t];
    const std::string where = name + " line " + std::to_string(row.line);
    if (row.fields.size() != table.header.size()) throw ValidationError(where + ": wrong field count");
    const Minutes time = parse_timestamp(row.fields[0]);
    if (t == 0) grid = ingest::make_grid(time, table.rows.size());
    if (time != grid.at(t)) throw ValidationError(where + ": timestamps are not a contiguous 30-minute grid");
    for (std::size_t n = 0; n < ids.size(); ++n) {
      const double v = parse_double(row.fields[n + 1], where);
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(where + ": value outside [0, 1]");
      values(n, t) = v;
    }
  }
  return values;
}

}  // namespace

void check_consistent(const Dataset& d) {
  const auto& ids = d.availability.station_ids;
  const std::size_t n = ids.size();
  if (n == 0) throw ValidationError("dataset has no stations");
  if (d.availability.values.rows != n || d.availability.values.cols != d.availability.grid.count)
    throw ValidationError("availability matrix does not match its grid");
  if (d.availability.connector_counts.size() != n) throw ValidationError("connector counts missing");
  if (d.statics.station_ids != ids || d.statics.alpha.rows != n)
    throw ValidationError("static attributes follow a different station order");
  if (d.dynamics.station_ids != ids || d.dynamics.beta.d0 != n)
    throw ValidationError("dynamic attributes follow a different station order");
  if (!(d.dynamics.grid == d.availability.grid) || d.dynamics.beta.d2 != d.availability.grid.count)
    throw ValidationError("dynamic attributes use a different grid");
  if (d.coords.size() != n) throw ValidationError("coordinate list does not match the station count");
}

void save(const Dataset& d, const std::filesystem::path& dir) {
  check_consistent(d);
  const auto& ids = d.availability.station_ids;
  std::string stations = "station_id,lat,lon,connectors\n";
  for (std::size_t n = 0; n < ids.size(); ++n) {
    const auto& c = d.coords[n];
    stations += csv::join({ids[n], c ? csv::format_number(c->lat) : "", c ? csv::format_number(c->lon) : "",
                           std::to_string(d.availability.connector_counts[n])}) +
                "\n";
  }
  csv::write_text_file(dir / "stations.csv", stations);
  csv::write_text_file(dir / "availability.csv", wide_csv(ids, d.availability.grid, [&](std::size_t n, std::size_t t) {
                         return d.availability.values(n, t);
                       }));
  if (d.dynamics.factors() != 1) throw ValidationError("dataset files hold exactly one dynamic factor");
  csv::write_text_file(dir / "weather.csv", wide_csv(ids, d.dynamics.grid, [&](std::size_t n, std::size_t t) {
                         return d.dynamics.beta(n, 0, t);
                       }));
  std::vector<std::string> header{"station_id"};
  for (auto c : ingest::kPoiCategories) header.emplace_back(c);
  std::string statics = csv::join(header) + "\n";
  for (std::size_t n = 0; n < ids.size(); ++n) {
    std::vector<std::string> row{ids[n]};
    for (std::size_t k = 0; k < d.statics.alpha.cols; ++k) row.push_back(csv::format_number(d.statics.alpha(n, k)));
    statics += csv::join(row) + "\n";
  }
  csv::write_text_file(dir / "static.csv", statics);
}

Dataset load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' does not exist");
  Dataset d;
  const csv::Table stations = csv::read_file(dir / "stations.csv");
  const std::size_t c_id = stations.require_column("station_id");
  const std::size_t c_lat = stations.require_column("lat");
  const std::size_t c_lon = stations.require_column("lon");
  const std::size_t c_conn = stations.require_column("connectors");
  std::vector<std::string> ids;
  for (const auto& row : stations.rows) {
    const std::string where = "stations.csv line " + std::to_string(row.line);
    if (row.fields.size() != stations.header.size()) throw ValidationError(where + ": wrong field count");
    ids.push_back(row.fields[c_id]);
    if (row.fields[c_lat].empty() || row.fields[c_lon].empty())
      d.coords.emplace_back();
    else
      d.coords.emplace_back(
          graph::Coordinate{parse_double(row.fields[c_lat], where), parse_double(row.fields[c_lon], where)});
    const double conn = parse_double(row.fields[c_conn], where);
    if (conn < 1 || conn != static_cast<int>(conn)) throw ValidationError(where + ": connectors must be an integer >= 1");
    d.availability.connector_counts.push_back(static_cast<int>(conn));
  }
  if (ids.empty()) throw ValidationError("stations.csv lists no stations");

  d.availability.station_ids = ids;
  d.availability.values = read_wide(dir / "availability.csv", ids, d.availability.grid);
  ingest::TimeGrid weather_grid;
  const Matrix weather = read_wide(dir / "weather.csv", ids, weather_grid);
  if (!(weather_grid == d.availability.grid)) throw ValidationError("weather.csv grid differs from availability.csv");
  d.dynamics.grid = weather_grid;
  d.dynamics.station_ids = ids;
  d.dynamics.beta = Tensor3(ids.size(), 1, weather_grid.count);
  d.dynamics.beta.data = weather.data;

  const csv::Table statics = csv::read_file(dir / "static.csv");
  const std::size_t s_id = statics.require_column("station_id");
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < statics.rows.size(); ++i) row_of[statics.rows[i].fields.at(s_id)] = i;
  d.statics.station_ids = ids;
  d.statics.alpha = Matrix(ids.size(), ingest::kPoiCategories.size());
  for (std::size_t n = 0; n < ids.size(); ++n) {
    auto it = row_of.find(ids[n]);
    if (it == row_of.end()) throw ValidationError("static.csv has no row for station '" + ids[n] + "'");
    const auto& row = statics.rows[it->second];
    for (std::size_t k = 0; k < ingest::kPoiCategories.size(); ++k) {
      const std::size_t col = statics.require_column(ingest::kPoiCategories[k]);
      d.statics.alpha(n, k) = parse_double(row.fields.at(col), "static.csv line " + std::to_string(row.line));
    }
  }
  check_consistent(d);
  return d;
}

graph::StationGraph build_graph(const Dataset& d, const graph::GraphOptions& options,
                                const std::optional<std::filesystem::path>& distance_csv) {
  const auto& ids = d.availability.station_ids;
  if (distance_csv) {
    std::ifstream in = open(*distance_csv);
    return graph::build_graph_from_distances(ids, graph::read_distance_matrix(in, ids), options);
  }
  std::vector<graph::Coordinate> coords;
  for (std::size_t n = 0; n < ids.size(); ++n) {
    if (!d.coords[n]) throw ValidationError("station '" + ids[n] + "' has no coordinates; supply a distance matrix");
    coords.push_back(*d.coords[n]);
  }
  return graph::build_graph(ids, coords, options);
}

std::string to_json(const IngestReport& r) {
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"line", s.line}, {"reason", s.reason}});
  nlohmann::json j{{"stations", r.stations},
                   {"sessions", r.sessions},
                   {"charger_types", {{"slow", r.slow}, {"fast", r.fast}, {"rapid", r.rapid}}},
                   {"skipped_rows", r.skipped.size()},
                   {"skipped", skipped},
                   {"clamps", r.clamps},
                   {"steps", r.steps},
                   {"grid_start", r.grid_start},
                   {"warnings", r.warnings}};
  return j.dump(2);
}

Dataset ingest_files(const IngestPaths& paths, IngestReport& report) {
  std::ifstream sessions_in = open(paths.sessions);
  std::ifstream weather_in = open(paths.weather);
  std::ifstream poi_in = open(paths.poi);
  std::ifstream connectors_in = open(paths.connectors);

  ingest::SessionParseResult parsed = ingest::parse_sessions(sessions_in);
  if (parsed.sessions.empty()) throw ValidationError("no valid charging sessions in '" + paths.sessions.string() + "'");
  const ingest::ConnectorTable connectors = ingest::parse_connectors(connectors_in);
  const ingest::TimeGrid grid = ingest::grid_covering(parsed.sessions);

  Dataset d;
  d.availability = ingest::aggregate_availability(parsed.sessions, grid, connectors);
  const auto& ids = d.availability.station_ids;
  ingest::WeatherParseResult weather = ingest::parse_weather(weather_in);
  d.dynamics = ingest::encode_weather(weather.records, grid, ids);
  d.statics = ingest::encode_poi(ingest::parse_poi(poi_in), ids);

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t n = 0; n < ids.size(); ++n) index.emplace(ids[n], n);
  d.coords.assign(ids.size(), std::nullopt);
  for (const auto& s : parsed.sessions) {
    auto& c = d.coords[index.at(s.station_id)];
    if (!c) c = graph::Coordinate{s.lat, s.lon};
  }

  report = IngestReport{};
  report.stations = ids.size();
  report.sessions = parsed.sessions.size();
  for (const auto& s : parsed.sessions) {
    switch (s.charger_type) {
      case ingest::ChargerType::slow: ++report.slow; break;
      case ingest::ChargerType::fast: ++report.fast; break;
      case ingest::ChargerType::rapid: ++report.rapid; break;
    }
  }
  report.skipped = std::move(parsed.skipped);
  report.clamps = d.availability.clamp_count;
  report.steps = grid.count;
  report.grid_start = format_timestamp(grid.origin);
  report.warnings = std::move(weather.warnings);
  for (std::size_t n = 0; n < ids.size(); ++n)
    if (!d.coords[n]) report.warnings.push_back("station '" + ids[n] + "' has no sessions and no coordinates");
  return d;
}

Splits prepare(const Dataset& d, std::size_t window, std::size_t horizon, a2unit::AttributeMode mode,
               const ingest::SplitRatios& ratios, std::uint64_t seed, ingest::SplitMode split_mode) {
  check_consistent(d);
  const auto samples =
      a2unit::augment_dataset(ingest::make_windows(d.availability, d.statics, d.dynamics, window, horizon), mode);
  Splits out;
  out.indices = ingest::split_dataset(samples.size(), ratios, seed, split_mode);
  for (std::size_t i : out.indices.train) out.train.push_back(samples[i]);
  for (std::size_t i : out.indices.val) out.val.push_back(samples[i]);
  for (std::size_t i : out.indices.test) out.test.push_back(samples[i]);
  return out;
}

}  // namespace astgin::dataset
