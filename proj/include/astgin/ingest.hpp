#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "astgin/matrix.hpp"
#include "astgin/timeutil.hpp"

namespace astgin::ingest {

enum class ChargerType { slow, fast, rapid };

std::string_view to_string(ChargerType t);

struct ChargingSession {
  std::string station_id;
  std::string connector_id;
  Minutes start = 0;
  Minutes end = 0;
  double energy_kwh = 0.0;
  double lat = 0.0;
  double lon = 0.0;
  ChargerType charger_type = ChargerType::slow;

  Minutes duration() const { return end - start; }
};

struct SkippedRow {
  std::size_t line = 0;
  std::string reason;
};

struct SessionParseResult {
  std::vector<ChargingSession> sessions;
  std::vector<SkippedRow> skipped;
};

// Header must name station_id, connector_id, start, end, energy_kwh, lat,
// lon and charger_type (any order). Missing columns throw; bad rows are
// skipped and listed in the result.
SessionParseResult parse_sessions(std::istream& in);

// Fixed 30-minute grid.
struct TimeGrid {
  static constexpr int kStepMinutes = 30;

  Minutes origin = 0;
  std::size_t count = 0;

  Minutes at(std::size_t step) const { return origin + static_cast<Minutes>(step) * kStepMinutes; }
  Minutes end() const { return at(count); }
  // Time-of-day slot in [0, 48).
  int slot(std::size_t step) const { return minute_of_day(at(step)) / kStepMinutes; }

  bool operator==(const TimeGrid&) const = default;
};

// Throws ValidationError when count == 0.
TimeGrid make_grid(Minutes origin, std::size_t count);

// Smallest grid aligned to 30-minute boundaries that covers every session.
TimeGrid grid_covering(const std::vector<ChargingSession>& sessions);

struct ConnectorTable {
  std::vector<std::string> station_ids;
  std::vector<int> counts;
};

ConnectorTable parse_connectors(std::istream& in);

struct AvailabilitySeries {
  TimeGrid grid;
  std::vector<std::string> station_ids;
  Matrix values;  // N x T, each entry in [0, 1]
  std::vector<int> connector_counts;
  std::size_t clamp_count = 0;

  std::size_t stations() const { return station_ids.size(); }
  std::size_t steps() const { return grid.count; }
};

// x = 1 - occupied_minutes / (30 * connectors) per station and window.
// Sessions are clipped to window boundaries; over-capacity windows clamp to
// 0 and increment clamp_count.
AvailabilitySeries aggregate_availability(const std::vector<ChargingSession>& sessions,
                                          const TimeGrid& grid, const ConnectorTable& connectors);

// Weather.

struct WeatherRecord {
  Minutes time = 0;
  int label = 0;  // 1 sunny .. 5 heavy rain
};

struct WeatherParseResult {
  std::vector<WeatherRecord> records;
  std::vector<std::string> warnings;
};

// Returns the 1..5 label for a free-text description, or 0 when unknown.
int weather_label(std::string_view description);

WeatherParseResult parse_weather(std::istream& in);

struct DynamicAttributes {
  TimeGrid grid;
  std::vector<std::string> station_ids;
  Tensor3 beta;  // N x w x T, entries in [0, 1]

  std::size_t factors() const { return beta.d1; }
};

// Each grid step takes the label of the most recent record at or before it,
// normalized to (label - 1) / 4 and broadcast to every station.
DynamicAttributes encode_weather(const std::vector<WeatherRecord>& records, const TimeGrid& grid,
                                 const std::vector<std::string>& station_ids);

// Points of interest.

inline constexpr std::array<std::string_view, 8> kPoiCategories = {
    "transportation", "catering", "shopping", "education",
    "accommodation",  "medical",  "living",   "other"};

struct StaticAttributes {
  std::vector<std::string> station_ids;
  Matrix alpha;  // N x 8 one-hot
};

using PoiTable = std::vector<std::pair<std::string, std::string>>;

PoiTable parse_poi(std::istream& in);

// Rows follow `station_ids`; every station must appear in the table.
StaticAttributes encode_poi(const PoiTable& poi_table, const std::vector<std::string>& station_ids);

// Windowing and splitting.

struct WindowPrecursor {
  std::size_t start = 0;  // first input step s; inputs are s..s+L
  Matrix x;               // (L+1) x N
  Matrix alpha;           // N x p
  Tensor3 beta;           // (L+1) x N x w
  Matrix y;               // M x N, steps s+L+1 .. s+L+M
};

// One precursor per start index; count = T - L - M.
std::vector<WindowPrecursor> make_windows(const AvailabilitySeries& avail, const StaticAttributes& statics,
                                          const DynamicAttributes& dynamics, std::size_t window,
                                          std::size_t horizon);

struct SplitRatios {
  double train = 0.50;
  double val = 0.33;
  double test = 0.17;
};

enum class SplitMode { random, chronological };

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Train and validation take floor(n * ratio); the remainder goes to test.
SplitIndices split_dataset(std::size_t n, const SplitRatios& ratios, std::uint64_t seed,
                           SplitMode mode = SplitMode::random);

}  // namespace astgin::ingest
