#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "astgin/nn/gradcheck.hpp"

namespace astgin::gradsuite {

inline constexpr double kTolerance = 1e-4;

// One registered check; `run` draws shapes and values from `seed`.
struct Entry {
  std::string name;
  std::function<nn::GradCheckResult(std::uint64_t seed)> run;
};

// Every differentiable op, the composite layers and the micro end-to-end
// model (2 stations, L = 4, M = 2, d_model = 8, one head).
const std::vector<Entry>& registry();

struct Outcome {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t seeds = 0;
  std::size_t coordinates = 0;
  bool passed = false;
};

// Runs each entry whose name contains `filter` (all when empty) for seeds
// 0 .. seeds-1.
std::vector<Outcome> run(std::size_t seeds, double tolerance = kTolerance, const std::string& filter = "");

}  // namespace astgin::gradsuite
