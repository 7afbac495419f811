#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "astgin/a2unit.hpp"
#include "astgin/graph.hpp"
#include "astgin/ingest.hpp"

// On-disk dataset directory shared by ingest, synth and the model commands:
//   stations.csv      station_id,lat,lon,connectors (lat/lon blank if unknown)
//   availability.csv  timestamp,<station ids...>   one row per grid step
//   weather.csv       timestamp,<station ids...>   beta for factor 0
//   static.csv        station_id,<8 POI categories> one-hot rows

namespace astgin::dataset {

struct Dataset {
  ingest::AvailabilitySeries availability;
  ingest::StaticAttributes statics;
  ingest::DynamicAttributes dynamics;
  // Empty optional for stations without a known position.
  std::vector<std::optional<graph::Coordinate>> coords;

  std::size_t stations() const { return availability.stations(); }
};

// Checks station order, grid and shapes agree across the parts.
void check_consistent(const Dataset& d);

void save(const Dataset& d, const std::filesystem::path& dir);
Dataset load(const std::filesystem::path& dir);

// Station graph from coordinates, or from `distance_csv` when given.
graph::StationGraph build_graph(const Dataset& d, const graph::GraphOptions& options = {},
                                const std::optional<std::filesystem::path>& distance_csv = std::nullopt);

struct IngestPaths {
  std::filesystem::path sessions;
  std::filesystem::path weather;
  std::filesystem::path poi;
  std::filesystem::path connectors;
};

struct IngestReport {
  std::size_t stations = 0;
  std::size_t sessions = 0;
  std::size_t slow = 0;
  std::size_t fast = 0;
  std::size_t rapid = 0;
  std::vector<ingest::SkippedRow> skipped;
  std::size_t clamps = 0;
  std::size_t steps = 0;
  std::string grid_start;
  std::vector<std::string> warnings;
};

std::string to_json(const IngestReport& r);

// Parses the four raw files into a dataset. Missing files raise IoError.
Dataset ingest_files(const IngestPaths& paths, IngestReport& report);

struct Splits {
  std::vector<a2unit::AugmentedSample> train;
  std::vector<a2unit::AugmentedSample> val;
  std::vector<a2unit::AugmentedSample> test;
  ingest::SplitIndices indices;
};

// Windows the series, augments every window under `mode` and splits.
Splits prepare(const Dataset& d, std::size_t window, std::size_t horizon, a2unit::AttributeMode mode,
               const ingest::SplitRatios& ratios, std::uint64_t seed,
               ingest::SplitMode split_mode = ingest::SplitMode::random);

}  // namespace astgin::dataset
