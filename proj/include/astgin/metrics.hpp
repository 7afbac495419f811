#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace astgin::metrics {

// Truth and prediction are flattened over every (step, station) entry.
double rmse(std::span<const double> y, std::span<const double> y_hat);
double r2(std::span<const double> y, std::span<const double> y_hat);
double var_score(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);
double accuracy(std::span<const double> y, std::span<const double> y_hat);

struct MetricsReport {
  double rmse = 0.0;
  double r2 = 0.0;
  double var_score = 0.0;
  double mae = 0.0;
  double accuracy = 0.0;
  std::size_t n_points = 0;
};

// Pooled over all entries. r2 and var_score are NaN when y is constant
// (reported, not thrown); rmse, mae and accuracy still throw on their own
// preconditions.
MetricsReport compute(std::span<const double> y, std::span<const double> y_hat);

// Per-step breakdown. y and y_hat are a sequence of M x N blocks laid out
// row-major, step-major within each block.
std::vector<MetricsReport> per_step(std::span<const double> y, std::span<const double> y_hat, std::size_t steps,
                                    std::size_t stations);

}  // namespace astgin::metrics
