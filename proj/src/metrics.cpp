#include "astgin/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "astgin/error.hpp"

namespace astgin::metrics {

namespace {

void check(const char* name, std::span<const double> y, std::span<const double> y_hat) {
  if (y.empty()) throw ValidationError(std::string(name) + ": empty input");
  if (y.size() != y_hat.size())
    throw ValidationError(std::string(name) + ": truth has " + std::to_string(y.size()) + " entries, prediction " +
                          std::to_string(y_hat.size()));
}

double mean(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s / static_cast<double>(a.size());
}

double sum_sq_residual(std::span<const double> y, std::span<const double> y_hat) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  return s;
}

double sum_sq_centered(std::span<const double> y) {
  const double m = mean(y);
  double s = 0.0;
  for (double v : y) s += (v - m) * (v - m);
  return s;
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> y_hat) {
  check("rmse", y, y_hat);
  return std::sqrt(sum_sq_residual(y, y_hat) / static_cast<double>(y.size()));
}

double r2(std::span<const double> y, std::span<const double> y_hat) {
  check("r2", y, y_hat);
  const double den = sum_sq_centered(y);
  if (den == 0.0) throw ValidationError("undefined R2: truth is constant");
  return 1.0 - sum_sq_residual(y, y_hat) / den;
}

double var_score(std::span<const double> y, std::span<const double> y_hat) {
  check("var_score", y, y_hat);
  const double den = sum_sq_centered(y);
  if (den == 0.0) throw ValidationError("undefined explained variance: truth is constant");
  std::vector<double> resid(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) resid[i] = y[i] - y_hat[i];
  return 1.0 - sum_sq_centered(resid) / den;
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
  check("mae", y, y_hat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]);
  return s / static_cast<double>(y.size());
}

double accuracy(std::span<const double> y, std::span<const double> y_hat) {
  check("accuracy", y, y_hat);
  double norm_y = 0.0;
  for (double v : y) norm_y += v * v;
  if (norm_y == 0.0) throw ValidationError("undefined accuracy: truth is all zero");
  return 1.0 - std::sqrt(sum_sq_residual(y, y_hat)) / std::sqrt(norm_y);
}

MetricsReport compute(std::span<const double> y, std::span<const double> y_hat) {
  MetricsReport r;
  r.rmse = rmse(y, y_hat);
  r.mae = mae(y, y_hat);
  r.accuracy = accuracy(y, y_hat);
  const bool constant = sum_sq_centered(y) == 0.0;
  r.r2 = constant ? std::numeric_limits<double>::quiet_NaN() : r2(y, y_hat);
  r.var_score = constant ? std::numeric_limits<double>::quiet_NaN() : var_score(y, y_hat);
  r.n_points = y.size();
  return r;
}

std::vector<MetricsReport> per_step(std::span<const double> y, std::span<const double> y_hat, std::size_t steps,
                                    std::size_t stations) {
  check("per_step", y, y_hat);
  const std::size_t block = steps * stations;
  if (block == 0 || y.size() % block != 0)
    throw ValidationError("per_step: " + std::to_string(y.size()) + " entries do not form " + std::to_string(steps) +
                          " x " + std::to_string(stations) + " blocks");
  const std::size_t samples = y.size() / block;
  std::vector<MetricsReport> out;
  for (std::size_t m = 0; m < steps; ++m) {
    std::vector<double> ys, yh;
    ys.reserve(samples * stations);
    yh.reserve(samples * stations);
    for (std::size_t s = 0; s < samples; ++s)
      for (std::size_t n = 0; n < stations; ++n) {
        ys.push_back(y[s * block + m * stations + n]);
        yh.push_back(y_hat[s * block + m * stations + n]);
      }
    out.push_back(compute(ys, yh));
  }
  return out;
}

}  // namespace astgin::metrics
