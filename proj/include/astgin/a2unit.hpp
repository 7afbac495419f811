#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "astgin/ingest.hpp"
#include "astgin/matrix.hpp"

namespace astgin::a2unit {

struct AugmentedSample {
  Tensor3 e;  // (L+1) x N x K
  Matrix y;   // M x N
  std::size_t start = 0;

  std::size_t steps() const { return e.d0; }
  std::size_t stations() const { return e.d1; }
  std::size_t features() const { return e.d2; }
};

// Which attribute blocks enter the augmented matrix.
enum class AttributeMode { full, poi_only, weather_only, none };

// K = p + 1 + w * (L + 1).
constexpr std::size_t feature_width(std::size_t p, std::size_t w, std::size_t window) {
  return p + 1 + w * (window + 1);
}

// Per step t the row for station n is [x_t,n | alpha_n | beta_0,n .. beta_L,n].
// alpha may have zero columns and beta a zero last extent.
Tensor3 augment(const Matrix& x_window, const Matrix& alpha, const Tensor3& beta_window);

std::vector<AugmentedSample> augment_dataset(const std::vector<ingest::WindowPrecursor>& precursors,
                                             AttributeMode mode = AttributeMode::full);

struct MinMax {
  double lo = 0.0;
  double hi = 1.0;

  double apply(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }
  double invert(double v) const { return lo + v * (hi - lo); }
};

// Rescales availability into [0, 1] for data that arrives outside that range.
MinMax minmax_normalize(Matrix& values);

// step,station,f0..f{K-1}
std::string format_sample_csv(const AugmentedSample& sample, const std::vector<std::string>& station_ids);

}  // namespace astgin::a2unit
