#include "astgin/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "astgin/error.hpp"

namespace astgin::nn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

namespace {

double evaluate(const GraphFn& fn, const std::vector<HostTensor>& inputs) {
  Tape<double> tape(true);
  std::vector<Var<double>> vars;
  for (const auto& in : inputs) vars.push_back(tape.constant(in.shape, in.data));
  return fn(tape, vars).item();
}

}  // namespace

GradCheckResult grad_check(const GraphFn& fn, const std::vector<HostTensor>& inputs, double h) {
  Tape<double> tape(true);
  std::vector<Var<double>> vars;
  for (const auto& in : inputs) vars.push_back(tape.variable(in.shape, in.data));
  Var<double> loss = fn(tape, vars);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& v : vars) {
    auto g = v.grad();
    analytic.emplace_back(v.numel(), 0.0);
    std::copy(g.begin(), g.end(), analytic.back().begin());
  }

  GradCheckResult result;
  std::vector<HostTensor> probe = inputs;
  for (std::size_t t = 0; t < probe.size(); ++t)
    for (std::size_t i = 0; i < probe[t].data.size(); ++i) {
      const double orig = probe[t].data[i];
      probe[t].data[i] = orig + h;
      const double up = evaluate(fn, probe);
      probe[t].data[i] = orig - h;
      const double down = evaluate(fn, probe);
      probe[t].data[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[t][i], numeric));
      ++result.coordinates;
    }
  return result;
}

GradCheckResult grad_check_params(ParameterStore<double>& store, const LossFn& fn, double h,
                                  std::size_t max_coordinates, std::uint64_t seed) {
  store.zero_grad();
  {
    Tape<double> tape(true);
    tape.backward(fn(tape));
  }
  struct Coord {
    Param<double>* param;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (auto& p : store)
    for (std::size_t i = 0; i < p.value.size(); ++i) coords.push_back({&p, i});
  if (max_coordinates > 0 && coords.size() > max_coordinates) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coordinates);
  }
  auto eval = [&] {
    Tape<double> tape(true);
    NoGradGuard<double> guard(tape);
    return fn(tape).item();
  };
  GradCheckResult result;
  for (const auto& c : coords) {
    double& w = c.param->value[c.index];
    const double orig = w;
    w = orig + h;
    const double up = eval();
    w = orig - h;
    const double down = eval();
    w = orig;
    const double numeric = (up - down) / (2.0 * h);
    result.max_rel_error = std::max(result.max_rel_error, relative_error(c.param->grad[c.index], numeric));
    ++result.coordinates;
  }
  store.zero_grad();
  return result;
}

}  // namespace astgin::nn
