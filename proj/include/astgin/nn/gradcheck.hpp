#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "astgin/nn/params.hpp"
#include "astgin/nn/tape.hpp"

namespace astgin::nn {

struct HostTensor {
  Shape shape;
  std::vector<double> data;
};

// |a - n| / max(1, |a|, |n|)
double relative_error(double analytic, double numeric);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// Builds a scalar from leaf variables holding `inputs`.
using GraphFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

// Central differences with step h per input coordinate, compared against
// one reverse sweep. Runs in checked mode.
GradCheckResult grad_check(const GraphFn& fn, const std::vector<HostTensor>& inputs, double h = 1e-5);

using LossFn = std::function<Var<double>(Tape<double>&)>;

// Same check with respect to parameter entries. When max_coordinates > 0 a
// seeded random subset of that size is checked.
GradCheckResult grad_check_params(ParameterStore<double>& store, const LossFn& fn, double h = 1e-5,
                                  std::size_t max_coordinates = 0, std::uint64_t seed = 0);

}  // namespace astgin::nn
