#include "astgin/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "astgin/csv.hpp"
#include "astgin/error.hpp"

namespace astgin::ingest {

namespace {

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && std::isfinite(out);
}

bool parse_charger_type(const std::string& s, ChargerType& out) {
  const std::string v = csv::to_lower(s);
  if (v == "slow") out = ChargerType::slow;
  else if (v == "fast") out = ChargerType::fast;
  else if (v == "rapid") out = ChargerType::rapid;
  else return false;
  return true;
}

std::string join_categories() {
  std::string out;
  for (std::size_t i = 0; i < kPoiCategories.size(); ++i) {
    if (i) out += ", ";
    out += kPoiCategories[i];
  }
  return out;
}

Minutes floor_to_step(Minutes t) {
  const Minutes s = TimeGrid::kStepMinutes;
  Minutes q = t / s;
  if (t % s != 0 && t < 0) --q;
  return q * s;
}

}  // namespace

std::string_view to_string(ChargerType t) {
  switch (t) {
    case ChargerType::slow: return "slow";
    case ChargerType::fast: return "fast";
    case ChargerType::rapid: return "rapid";
  }
  return "slow";
}

SessionParseResult parse_sessions(std::istream& in) {
  const csv::Table table = csv::read(in);
  if (table.header.empty()) throw ValidationError("sessions input is empty");
  const std::size_t c_station = table.require_column("station_id");
  const std::size_t c_connector = table.require_column("connector_id");
  const std::size_t c_start = table.require_column("start");
  const std::size_t c_end = table.require_column("end");
  const std::size_t c_energy = table.require_column("energy_kwh");
  const std::size_t c_lat = table.require_column("lat");
  const std::size_t c_lon = table.require_column("lon");
  const std::size_t c_type = table.require_column("charger_type");

  SessionParseResult result;
  result.sessions.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    auto skip = [&](std::string reason) { result.skipped.push_back({row.line, std::move(reason)}); };
    if (row.fields.size() != table.header.size()) {
      skip("wrong field count");
      continue;
    }
    ChargingSession s;
    s.station_id = row.fields[c_station];
    s.connector_id = row.fields[c_connector];
    if (s.station_id.empty()) {
      skip("missing station id");
      continue;
    }
    if (!try_parse_timestamp(row.fields[c_start], s.start)) {
      skip("unparseable start time");
      continue;
    }
    if (!try_parse_timestamp(row.fields[c_end], s.end)) {
      skip("unparseable end time");
      continue;
    }
    if (s.end < s.start) {
      skip("negative duration");
      continue;
    }
    if (!parse_double(row.fields[c_energy], s.energy_kwh)) {
      skip("unparseable energy");
      continue;
    }
    if (s.energy_kwh < 0.0) {
      skip("negative energy");
      continue;
    }
    if (!parse_double(row.fields[c_lat], s.lat) || !parse_double(row.fields[c_lon], s.lon) ||
        std::abs(s.lat) > 90.0 || std::abs(s.lon) > 180.0) {
      skip("invalid coordinates");
      continue;
    }
    if (!parse_charger_type(row.fields[c_type], s.charger_type)) {
      skip("unknown charger type '" + row.fields[c_type] + "'");
      continue;
    }
    result.sessions.push_back(std::move(s));
  }
  return result;
}

TimeGrid make_grid(Minutes origin, std::size_t count) {
  if (count == 0) throw ValidationError("time grid must have at least one step");
  return TimeGrid{origin, count};
}

TimeGrid grid_covering(const std::vector<ChargingSession>& sessions) {
  if (sessions.empty()) throw ValidationError("cannot derive a time grid from zero sessions");
  Minutes lo = sessions.front().start;
  Minutes hi = sessions.front().end;
  for (const auto& s : sessions) {
    lo = std::min(lo, s.start);
    hi = std::max(hi, s.end);
  }
  const Minutes origin = floor_to_step(lo);
  Minutes stop = floor_to_step(hi);
  if (stop < hi || stop == origin) stop += TimeGrid::kStepMinutes;
  return make_grid(origin, static_cast<std::size_t>((stop - origin) / TimeGrid::kStepMinutes));
}

ConnectorTable parse_connectors(std::istream& in) {
  const csv::Table table = csv::read(in);
  if (table.header.empty()) throw ValidationError("connector input is empty");
  const std::size_t c_station = table.require_column("station_id");
  const std::size_t c_count = table.require_column("connectors");
  ConnectorTable out;
  std::unordered_set<std::string> seen;
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size())
      throw ValidationError("connectors line " + std::to_string(row.line) + ": wrong field count");
    const std::string& id = row.fields[c_station];
    int count = 0;
    const std::string& text = row.fields[c_count];
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), count);
    if (ec != std::errc{} || ptr != text.data() + text.size() || count < 1)
      throw ValidationError("connectors line " + std::to_string(row.line) + ": connector count must be an integer >= 1");
    if (!seen.insert(id).second) throw ValidationError("duplicate station id '" + id + "' in connector table");
    out.station_ids.push_back(id);
    out.counts.push_back(count);
  }
  if (out.station_ids.empty()) throw ValidationError("connector table lists no stations");
  return out;
}

AvailabilitySeries aggregate_availability(const std::vector<ChargingSession>& sessions, const TimeGrid& grid,
                                          const ConnectorTable& connectors) {
  if (grid.count == 0) throw ValidationError("time grid must have at least one step");
  if (connectors.station_ids.size() != connectors.counts.size())
    throw ValidationError("connector table is inconsistent");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < connectors.station_ids.size(); ++i) {
    if (connectors.counts[i] < 1)
      throw ValidationError("station '" + connectors.station_ids[i] + "' has fewer than one connector");
    if (!index.emplace(connectors.station_ids[i], i).second)
      throw ValidationError("duplicate station id '" + connectors.station_ids[i] + "'");
  }

  const std::size_t n = connectors.station_ids.size();
  const Minutes step = TimeGrid::kStepMinutes;
  Matrix occupied(n, grid.count, 0.0);
  for (const auto& s : sessions) {
    auto it = index.find(s.station_id);
    if (it == index.end()) throw ValidationError("session references unknown station '" + s.station_id + "'");
    const Minutes lo = std::max(s.start, grid.origin);
    const Minutes hi = std::min(s.end, grid.end());
    if (hi <= lo) continue;
    const auto first = static_cast<std::size_t>((lo - grid.origin) / step);
    const auto last = static_cast<std::size_t>((hi - 1 - grid.origin) / step);
    for (std::size_t w = first; w <= last; ++w) {
      const Minutes ws = grid.at(w);
      const Minutes overlap = std::min(hi, ws + step) - std::max(lo, ws);
      if (overlap > 0) occupied(it->second, w) += static_cast<double>(overlap);
    }
  }

  AvailabilitySeries out;
  out.grid = grid;
  out.station_ids = connectors.station_ids;
  out.connector_counts = connectors.counts;
  out.values = Matrix(n, grid.count, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double capacity = static_cast<double>(step) * connectors.counts[i];
    for (std::size_t w = 0; w < grid.count; ++w) {
      double x = 1.0 - occupied(i, w) / capacity;
      if (x < 0.0) {
        x = 0.0;
        ++out.clamp_count;
      }
      out.values(i, w) = x;
    }
  }
  return out;
}

int weather_label(std::string_view description) {
  const std::string d = csv::to_lower(csv::trim(description));
  auto has = [&](std::string_view key) { return d.find(key) != std::string::npos; };
  const bool rain = has("rain") || has("shower");
  if ((has("heavy") && rain) || has("thunder") || has("storm")) return 5;
  if (rain) return 4;
  if (has("fog") || has("mist") || has("haze")) return 3;
  if (has("cloud") || has("overcast")) return 2;
  if (has("sun") || has("clear") || has("fair")) return 1;
  return 0;
}

WeatherParseResult parse_weather(std::istream& in) {
  const csv::Table table = csv::read(in);
  if (table.header.empty() || table.rows.empty()) throw ValidationError("weather input is empty");
  const std::size_t c_time = table.require_column("timestamp");
  const std::size_t c_desc = table.require_column("description");

  struct Raw {
    Minutes time;
    std::string description;
    std::size_t line;
  };
  std::vector<Raw> raw;
  WeatherParseResult out;
  for (const auto& row : table.rows) {
    Minutes t = 0;
    if (row.fields.size() < 2 || !try_parse_timestamp(row.fields[c_time], t)) {
      out.warnings.push_back("line " + std::to_string(row.line) + ": unparseable record skipped");
      continue;
    }
    raw.push_back({t, c_desc < row.fields.size() ? row.fields[c_desc] : std::string{}, row.line});
  }
  if (raw.empty()) throw ValidationError("weather input has no parseable records");
  if (!std::is_sorted(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.time < b.time; })) {
    out.warnings.push_back("weather timestamps not monotone; records sorted");
    std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.time < b.time; });
  }

  int first_known = 0;
  for (const auto& r : raw)
    if ((first_known = weather_label(r.description)) != 0) break;
  if (first_known == 0) throw ValidationError("no weather description matches a known label");

  int previous = 0;
  for (const auto& r : raw) {
    int label = weather_label(r.description);
    if (label == 0) {
      label = previous != 0 ? previous : first_known;
      out.warnings.push_back("line " + std::to_string(r.line) + ": unknown weather '" + r.description +
                             "', using label " + std::to_string(label));
    }
    previous = label;
    out.records.push_back({r.time, label});
  }
  return out;
}

DynamicAttributes encode_weather(const std::vector<WeatherRecord>& records, const TimeGrid& grid,
                                 const std::vector<std::string>& station_ids) {
  if (grid.count == 0) throw ValidationError("time grid must have at least one step");
  if (records.empty() || records.front().time > grid.origin)
    throw ValidationError("uncovered grid start: no weather record at or before " + format_timestamp(grid.origin));
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].time < records[i - 1].time) throw ValidationError("weather records must be sorted by time");

  DynamicAttributes out;
  out.grid = grid;
  out.station_ids = station_ids;
  out.beta = Tensor3(station_ids.size(), 1, grid.count);
  std::size_t r = 0;
  for (std::size_t t = 0; t < grid.count; ++t) {
    const Minutes now = grid.at(t);
    while (r + 1 < records.size() && records[r + 1].time <= now) ++r;
    const int label = records[r].label;
    if (label < 1 || label > 5) throw ValidationError("weather label out of range 1..5");
    const double v = (label - 1) / 4.0;
    for (std::size_t n = 0; n < station_ids.size(); ++n) out.beta(n, 0, t) = v;
  }
  return out;
}

PoiTable parse_poi(std::istream& in) {
  const csv::Table table = csv::read(in);
  if (table.header.empty()) throw ValidationError("POI input is empty");
  const std::size_t c_station = table.require_column("station_id");
  const std::size_t c_cat = table.require_column("category");
  PoiTable out;
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size())
      throw ValidationError("POI line " + std::to_string(row.line) + ": wrong field count");
    out.emplace_back(row.fields[c_station], row.fields[c_cat]);
  }
  return out;
}

StaticAttributes encode_poi(const PoiTable& poi_table, const std::vector<std::string>& station_ids) {
  std::unordered_map<std::string, std::size_t> category_of;
  for (const auto& [station, name] : poi_table) {
    const std::string key = csv::to_lower(csv::trim(name));
    auto it = std::find(kPoiCategories.begin(), kPoiCategories.end(), key);
    if (it == kPoiCategories.end())
      throw ValidationError("unknown POI category '" + name + "' for station '" + station +
                            "'; valid categories: " + join_categories());
    category_of[station] = static_cast<std::size_t>(it - kPoiCategories.begin());
  }
  StaticAttributes out;
  out.station_ids = station_ids;
  out.alpha = Matrix(station_ids.size(), kPoiCategories.size(), 0.0);
  for (std::size_t i = 0; i < station_ids.size(); ++i) {
    auto it = category_of.find(station_ids[i]);
    if (it == category_of.end()) throw ValidationError("station '" + station_ids[i] + "' has no POI category");
    out.alpha(i, it->second) = 1.0;
  }
  return out;
}

std::vector<WindowPrecursor> make_windows(const AvailabilitySeries& avail, const StaticAttributes& statics,
                                          const DynamicAttributes& dynamics, std::size_t window,
                                          std::size_t horizon) {
  if (window < 1 || horizon < 1) throw ValidationError("window length and horizon must be >= 1");
  const std::size_t T = avail.steps();
  const std::size_t N = avail.stations();
  if (T < window + 1 + horizon)
    throw ValidationError("series too short: need at least " + std::to_string(window + 1 + horizon) +
                          " steps, have " + std::to_string(T));
  if (statics.alpha.rows != N) throw ValidationError("static attributes cover a different station count");
  if (dynamics.beta.d0 != N || dynamics.beta.d2 != T)
    throw ValidationError("dynamic attributes do not match the availability grid");

  const std::size_t w = dynamics.beta.d1;
  const std::size_t count = T - window - horizon;
  std::vector<WindowPrecursor> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    WindowPrecursor p;
    p.start = s;
    p.x = Matrix(window + 1, N);
    p.beta = Tensor3(window + 1, N, w);
    for (std::size_t t = 0; t <= window; ++t)
      for (std::size_t n = 0; n < N; ++n) {
        p.x(t, n) = avail.values(n, s + t);
        for (std::size_t f = 0; f < w; ++f) p.beta(t, n, f) = dynamics.beta(n, f, s + t);
      }
    p.alpha = statics.alpha;
    p.y = Matrix(horizon, N);
    for (std::size_t m = 0; m < horizon; ++m)
      for (std::size_t n = 0; n < N; ++n) p.y(m, n) = avail.values(n, s + window + 1 + m);
    out.push_back(std::move(p));
  }
  return out;
}

SplitIndices split_dataset(std::size_t n, const SplitRatios& ratios, std::uint64_t seed, SplitMode mode) {
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ValidationError("split ratios must sum to 1");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0) throw ValidationError("split ratios must be >= 0");
  if (n < 3) throw ValidationError("need at least 3 samples to split, have " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == SplitMode::random) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  // The epsilon absorbs representation error in products like 100 * 0.33.
  const auto n_train = static_cast<std::size_t>(std::floor(n * ratios.train + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(n * ratios.val + 1e-9));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

}  // namespace astgin::ingest
