#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "astgin/graph.hpp"
#include "astgin/ingest.hpp"
#include "astgin/model.hpp"
#include "astgin/synth.hpp"
#include "astgin/trainer.hpp"

namespace astgin::config {

struct RunConfig {
  std::string data_dir;
  std::string distance_csv;  // optional; overrides coordinates
  model::ModelConfig model;
  trainer::TrainConfig train;
  synth::SynthConfig synth;
  ingest::SplitRatios split;
  ingest::SplitMode split_mode = ingest::SplitMode::random;
  graph::GraphOptions graph;
};

// Horizon in minutes (30, 60, 90 or 120) to steps.
std::size_t horizon_steps(int minutes);

// Parses a JSON document. Every key is optional; unknown keys, wrong types
// and invalid values throw ValidationError.
RunConfig parse(std::string_view json_text);
RunConfig load(const std::filesystem::path& path);
std::string to_json(const RunConfig& config);

// Validates cross-field constraints (also run by parse).
void validate(const RunConfig& config);

std::uint64_t fnv1a(std::string_view bytes);
// Hex FNV-1a of the canonical JSON form.
std::string config_hash(const RunConfig& config);

}  // namespace astgin::config
