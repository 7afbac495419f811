#pragma once

// Brute-force reference implementations used only by tests. Each one is
// written from the defining formula with a different evaluation strategy
// than the library (long double, explicit matrix products, minute-by-minute
// counting) so agreement is evidence, not tautology.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<long double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<long double>(c, 0.0L)); }

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c = zeros(a.size(), b.front().size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.front().size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Great-circle distance from the chord between unit vectors.
inline long double great_circle(double lat1, double lon1, double lat2, double lon2, long double radius = 6371000.0L) {
  const long double d2r = std::numbers::pi_v<long double> / 180.0L;
  auto unit = [&](double lat, double lon) {
    const long double p = lat * d2r, l = lon * d2r;
    return std::vector<long double>{std::cos(p) * std::cos(l), std::cos(p) * std::sin(l), std::sin(p)};
  };
  const auto a = unit(lat1, lon1), b = unit(lat2, lon2);
  long double chord2 = 0.0L;
  for (int i = 0; i < 3; ++i) chord2 += (a[i] - b[i]) * (a[i] - b[i]);
  const long double half = std::min(1.0L, std::sqrt(chord2) / 2.0L);
  return 2.0L * radius * std::asin(half);
}

// Gaussian kernel with hard cutoff.
inline Mat adjacency(const Mat& dist, long double sigma, long double kappa) {
  Mat a = zeros(dist.size(), dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i)
    for (std::size_t j = 0; j < dist.size(); ++j)
      a[i][j] = dist[i][j] <= kappa ? std::exp(-(dist[i][j] * dist[i][j]) / (sigma * sigma)) : 0.0L;
  return a;
}

// D^-1/2 (A + I) D^-1/2 as two explicit dense products.
inline Mat normalize(const Mat& a) {
  const std::size_t n = a.size();
  Mat tilde = a;
  for (std::size_t i = 0; i < n; ++i) tilde[i][i] += 1.0L;
  Mat d = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    long double s = 0.0L;
    for (std::size_t j = 0; j < n; ++j) s += tilde[i][j];
    d[i][i] = 1.0L / std::sqrt(s);
  }
  return matmul(matmul(d, tilde), d);
}

struct Session {
  std::size_t station = 0;
  std::int64_t start = 0;  // minutes from the grid origin
  std::int64_t end = 0;
};

// 1 - busy connector-minutes / (30 * connectors), counted one minute at a
// time, clamped at 0. Returns N x T and the clamp count.
inline std::pair<Mat, std::size_t> availability(const std::vector<Session>& sessions, const std::vector<int>& connectors,
                                                std::size_t steps) {
  const std::size_t n = connectors.size();
  std::vector<std::vector<int>> busy(n, std::vector<int>(steps * 30, 0));
  for (const auto& s : sessions)
    for (std::int64_t m = std::max<std::int64_t>(0, s.start); m < std::min<std::int64_t>(s.end, steps * 30); ++m)
      ++busy[s.station][static_cast<std::size_t>(m)];
  Mat x = zeros(n, steps);
  std::size_t clamps = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < steps; ++t) {
      long double used = 0.0L;
      for (std::size_t m = 0; m < 30; ++m) used += busy[i][t * 30 + m];
      long double v = 1.0L - used / (30.0L * connectors[i]);
      if (v < 0.0L) {
        v = 0.0L;
        ++clamps;
      }
      x[i][t] = v;
    }
  return {x, clamps};
}

inline long double mean(const std::vector<long double>& v) {
  long double s = 0.0L;
  for (long double x : v) s += x;
  return s / static_cast<long double>(v.size());
}

inline long double pop_variance(const std::vector<long double>& v) {
  const long double m = mean(v);
  long double s = 0.0L;
  for (long double x : v) s += (x - m) * (x - m);
  return s / static_cast<long double>(v.size());
}

inline std::vector<long double> widen(const std::vector<double>& v) { return {v.begin(), v.end()}; }

inline long double rmse(const std::vector<double>& y, const std::vector<double>& p) {
  std::vector<long double> sq;
  for (std::size_t i = 0; i < y.size(); ++i) sq.push_back((static_cast<long double>(y[i]) - p[i]) * (y[i] - p[i]));
  return std::sqrt(mean(sq));
}

inline long double mae(const std::vector<double>& y, const std::vector<double>& p) {
  std::vector<long double> ab;
  for (std::size_t i = 0; i < y.size(); ++i) ab.push_back(std::fabs(static_cast<long double>(y[i]) - p[i]));
  return mean(ab);
}

inline long double r2(const std::vector<double>& y, const std::vector<double>& p) {
  const long double m = mean(widen(y));
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += (static_cast<long double>(y[i]) - p[i]) * (y[i] - p[i]);
    den += (y[i] - m) * (y[i] - m);
  }
  return 1.0L - num / den;
}

inline long double var_score(const std::vector<double>& y, const std::vector<double>& p) {
  std::vector<long double> resid;
  for (std::size_t i = 0; i < y.size(); ++i) resid.push_back(static_cast<long double>(y[i]) - p[i]);
  return 1.0L - pop_variance(resid) / pop_variance(widen(y));
}

inline long double accuracy(const std::vector<double>& y, const std::vector<double>& p) {
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += (static_cast<long double>(y[i]) - p[i]) * (y[i] - p[i]);
    den += static_cast<long double>(y[i]) * y[i];
  }
  return 1.0L - std::sqrt(num) / std::sqrt(den);
}

// Symmetric eigenvalues by cyclic Jacobi rotations.
inline std::vector<long double> symmetric_eigenvalues(Mat a, int sweeps = 100) {
  const std::size_t n = a.size();
  for (int s = 0; s < sweeps; ++s) {
    long double off = 0.0L;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30L) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300L) continue;
        const long double theta = (a[q][q] - a[p][p]) / (2.0L * a[p][q]);
        const long double t = (theta >= 0 ? 1.0L : -1.0L) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0L));
        const long double c = 1.0L / std::sqrt(t * t + 1.0L), sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const long double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - sn * akq;
          a[k][q] = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const long double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - sn * aqk;
          a[q][k] = sn * apk + c * aqk;
        }
      }
  }
  std::vector<long double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  return ev;
}

}  // namespace oracle
