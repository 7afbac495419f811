#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "astgin/dataset.hpp"
#include "astgin/graph.hpp"
#include "astgin/ingest.hpp"

namespace astgin::synth {

struct SynthConfig {
  std::size_t n_stations = 10;
  std::size_t days = 60;
  std::uint64_t seed = 0;
  double base_level = 0.4;
  double daily_amplitude = 0.25;
  double weather_effect = 0.3;
  double poi_phase_shift = 1.5;  // hours per POI category index
  double spatial_smoothing = 0.3;
  double noise_std = 0.05;
  double radius_km = 3.0;
  Minutes origin = 0;  // 0 selects 2018-03-05 00:00
};

void validate(const SynthConfig& config);

struct SynthData {
  dataset::Dataset data;
  graph::StationGraph graph;
  std::vector<int> hourly_weather;  // labels 1..5, one per hour from the origin
  std::vector<std::size_t> poi_index;
};

// Availability per station n and step t:
//   own = base + amp * sin(2 pi (h - phase_n) / 24) + weather_effect * (1 - severity_t)
//   x   = clamp((1 - s) * own_n + s * kernel-weighted mean of own over the other stations + noise, 0, 1)
// with h the hour of day, phase_n = poi_index_n * poi_phase_shift and
// severity_t = (label - 1) / 4 of the hourly Markov-chain weather.
SynthData generate(const SynthConfig& config);

// Writes raw files in the ingest schemas (sessions.csv, weather.csv, poi.csv,
// connectors.csv). Occupied minutes per window are rounded to whole minutes
// and laid out one session per busy connector.
void write_raw(const SynthData& data, const std::filesystem::path& dir);

}  // namespace astgin::synth
