#include "astgin/a2unit.hpp"

#include <algorithm>
#include <limits>

#include "astgin/csv.hpp"
#include "astgin/error.hpp"

namespace astgin::a2unit {

Tensor3 augment(const Matrix& x_window, const Matrix& alpha, const Tensor3& beta_window) {
  const std::size_t steps = x_window.rows;
  const std::size_t n = x_window.cols;
  if (steps == 0) throw ValidationError("augment: empty window (time axis)");
  if (alpha.rows != n && !(alpha.cols == 0))
    throw ValidationError("augment: station axis mismatch between X (" + std::to_string(n) + ") and alpha (" +
                          std::to_string(alpha.rows) + ")");
  const std::size_t p = alpha.cols;
  const std::size_t w = beta_window.d2;
  if (w > 0) {
    if (beta_window.d0 != steps)
      throw ValidationError("augment: time axis mismatch between X (" + std::to_string(steps) + ") and beta (" +
                            std::to_string(beta_window.d0) + ")");
    if (beta_window.d1 != n)
      throw ValidationError("augment: station axis mismatch between X (" + std::to_string(n) + ") and beta (" +
                            std::to_string(beta_window.d1) + ")");
  }
  const std::size_t k = p + 1 + w * steps;
  Tensor3 e(steps, n, k);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t s = 0; s < n; ++s) {
      double* row = &e(t, s, 0);
      row[0] = x_window(t, s);
      for (std::size_t c = 0; c < p; ++c) row[1 + c] = alpha(s, c);
      for (std::size_t u = 0; u < steps; ++u)
        for (std::size_t f = 0; f < w; ++f) row[1 + p + u * w + f] = beta_window(u, s, f);
    }
  return e;
}

std::vector<AugmentedSample> augment_dataset(const std::vector<ingest::WindowPrecursor>& precursors,
                                             AttributeMode mode) {
  if (precursors.empty()) throw ValidationError("augment_dataset: no samples");
  const bool use_poi = mode == AttributeMode::full || mode == AttributeMode::poi_only;
  const bool use_weather = mode == AttributeMode::full || mode == AttributeMode::weather_only;
  std::vector<AugmentedSample> out;
  out.reserve(precursors.size());
  const Matrix no_alpha;
  const Tensor3 no_beta;
  for (std::size_t i = 0; i < precursors.size(); ++i) {
    const auto& p = precursors[i];
    try {
      AugmentedSample s;
      s.e = augment(p.x, use_poi ? p.alpha : no_alpha, use_weather ? p.beta : no_beta);
      s.y = p.y;
      s.start = p.start;
      out.push_back(std::move(s));
    } catch (const ValidationError& err) {
      throw ValidationError("sample " + std::to_string(i) + ": " + err.what());
    }
  }
  return out;
}

MinMax minmax_normalize(Matrix& values) {
  MinMax mm{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (double v : values.data) {
    mm.lo = std::min(mm.lo, v);
    mm.hi = std::max(mm.hi, v);
  }
  if (values.data.empty()) return MinMax{};
  for (double& v : values.data) v = mm.apply(v);
  return mm;
}

std::string format_sample_csv(const AugmentedSample& sample, const std::vector<std::string>& station_ids) {
  std::string out = "step,station";
  for (std::size_t c = 0; c < sample.features(); ++c) out += ",f" + std::to_string(c);
  out += "\n";
  for (std::size_t t = 0; t < sample.steps(); ++t)
    for (std::size_t s = 0; s < sample.stations(); ++s) {
      out += std::to_string(t) + "," + (s < station_ids.size() ? station_ids[s] : std::to_string(s));
      for (std::size_t c = 0; c < sample.features(); ++c) out += "," + csv::format_number(sample.e(t, s, c));
      out += "\n";
    }
  return out;
}

}  // namespace astgin::a2unit
