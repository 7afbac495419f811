#include "astgin/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <unordered_map>

#include "astgin/csv.hpp"
#include "astgin/error.hpp"

namespace astgin::graph {

namespace {

std::vector<double> upper_triangle(const Matrix& dist) {
  std::vector<double> v;
  for (std::size_t a = 0; a < dist.rows; ++a)
    for (std::size_t b = a + 1; b < dist.cols; ++b) v.push_back(dist(a, b));
  return v;
}

void check_square(const Matrix& m, const char* what) {
  if (m.rows != m.cols) throw ValidationError(std::string(what) + " must be square");
}

void check_distance(const Matrix& dist) {
  check_square(dist, "distance matrix");
  for (std::size_t a = 0; a < dist.rows; ++a) {
    if (dist(a, a) != 0.0) throw ValidationError("distance matrix must have a zero diagonal");
    for (std::size_t b = 0; b < dist.cols; ++b) {
      const double d = dist(a, b);
      if (!std::isfinite(d) || d < 0.0) throw ValidationError("distances must be finite and nonnegative");
      if (d != dist(b, a)) throw ValidationError("distance matrix must be symmetric");
    }
  }
}

StationGraph finish(std::vector<std::string> ids, std::vector<Coordinate> coords, Matrix dist,
                    const GraphOptions& options) {
  StationGraph g;
  g.station_ids = std::move(ids);
  g.coords = std::move(coords);
  g.dist = std::move(dist);
  if (g.station_ids.size() != g.dist.rows) throw ValidationError("station count does not match distance matrix");
  if (g.size() == 1) {
    g.sigma = options.sigma > 0 ? options.sigma : 1.0;
    g.kappa = options.kappa > 0 ? options.kappa : 0.0;
  } else {
    g.sigma = options.sigma > 0 ? options.sigma : default_sigma(g.dist);
    g.kappa = options.kappa > 0 ? options.kappa : distance_percentile(g.dist, 95.0);
  }
  g.adjacency = build_adjacency(g.dist, g.sigma, g.kappa);
  g.normalized = normalize_adjacency(g.adjacency);
  return g;
}

}  // namespace

double haversine(const Coordinate& a, const Coordinate& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double s = std::sin(dlat / 2);
  const double t = std::sin(dlon / 2);
  const double h = s * s + std::cos(a.lat * rad) * std::cos(b.lat * rad) * t * t;
  return 2.0 * kEarthRadiusMeters * std::asin(std::min(1.0, std::sqrt(h)));
}

Matrix pairwise_distance(const std::vector<Coordinate>& coords) {
  for (const auto& c : coords)
    if (!(c.lat >= -90.0 && c.lat <= 90.0 && c.lon >= -180.0 && c.lon <= 180.0))
      throw ValidationError("coordinate out of range: (" + csv::format_number(c.lat) + ", " +
                            csv::format_number(c.lon) + ")");
  const std::size_t n = coords.size();
  Matrix d(n, n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) d(a, b) = d(b, a) = haversine(coords[a], coords[b]);
  return d;
}

Matrix build_adjacency(const Matrix& dist, double sigma, double kappa) {
  if (!(sigma > 0.0)) throw ValidationError("degenerate bandwidth: sigma must be > 0");
  if (!(kappa >= 0.0)) throw ValidationError("cutoff kappa must be >= 0");
  check_distance(dist);
  Matrix a(dist.rows, dist.cols, 0.0);
  const double s2 = sigma * sigma;
  for (std::size_t i = 0; i < dist.rows; ++i)
    for (std::size_t j = 0; j < dist.cols; ++j) {
      const double d = dist(i, j);
      a(i, j) = (i == j || d <= kappa) ? std::exp(-(d * d) / s2) : 0.0;
    }
  return a;
}

double default_sigma(const Matrix& dist) {
  check_square(dist, "distance matrix");
  if (dist.rows < 2) throw ValidationError("sigma needs at least two stations");
  const auto v = upper_triangle(dist);
  double mean = 0.0;
  for (double d : v) mean += d;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double d : v) var += (d - mean) * (d - mean);
  return std::sqrt(var / static_cast<double>(v.size()));
}

double distance_percentile(const Matrix& dist, double q) {
  check_square(dist, "distance matrix");
  if (dist.rows < 2) throw ValidationError("percentile needs at least two stations");
  if (q < 0.0 || q > 100.0) throw ValidationError("percentile must be within [0, 100]");
  auto v = upper_triangle(dist);
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

Matrix normalize_adjacency(const Matrix& adjacency) {
  check_square(adjacency, "adjacency");
  const std::size_t n = adjacency.rows;
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = adjacency(i, j);
      if (!std::isfinite(a) || a < 0.0) throw ValidationError("adjacency entries must be finite and nonnegative");
      deg += a;
    }
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double a = adjacency(i, j) + (i == j ? 1.0 : 0.0);
      out(i, j) = inv_sqrt_deg[i] * a * inv_sqrt_deg[j];
    }
  return out;
}

StationGraph build_graph(std::vector<std::string> station_ids, std::vector<Coordinate> coords,
                         const GraphOptions& options) {
  if (station_ids.size() != coords.size()) throw ValidationError("one coordinate per station required");
  Matrix dist = pairwise_distance(coords);
  return finish(std::move(station_ids), std::move(coords), std::move(dist), options);
}

StationGraph build_graph_from_distances(std::vector<std::string> station_ids, Matrix dist,
                                        const GraphOptions& options) {
  check_distance(dist);
  return finish(std::move(station_ids), {}, std::move(dist), options);
}

Matrix read_distance_matrix(std::istream& in, const std::vector<std::string>& station_ids) {
  const csv::Table table = csv::read(in);
  if (table.header.size() < 2) throw ValidationError("distance matrix needs a header row of station ids");
  // Header cells were lower-cased by the reader; station ids are matched
  // against the first-column ids, which keep their case.
  const std::size_t n = table.rows.size();
  if (table.header.size() != n + 1) throw ValidationError("distance matrix must be square");
  std::vector<std::string> file_ids;
  Matrix raw(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& f = table.rows[r].fields;
    if (f.size() != n + 1) throw ValidationError("distance matrix row " + std::to_string(r + 1) + " has wrong width");
    file_ids.push_back(f[0]);
    if (csv::to_lower(f[0]) != table.header[r + 1])
      throw ValidationError("distance matrix row and column ids disagree at position " + std::to_string(r + 1));
    for (std::size_t c = 0; c < n; ++c) {
      double v = 0.0;
      const std::string& s = f[c + 1];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("distance matrix entry '" + s + "' is not a number");
      raw(r, c) = v;
    }
  }
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) pos[file_ids[i]] = i;
  const std::size_t m = station_ids.size();
  std::vector<std::size_t> src(m);
  for (std::size_t a = 0; a < m; ++a) {
    auto ia = pos.find(station_ids[a]);
    if (ia == pos.end()) throw ValidationError("distance matrix lacks station '" + station_ids[a] + "'");
    src[a] = ia->second;
  }
  Matrix out(m, m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) out(a, b) = raw(src[a], src[b]);
  check_distance(out);
  return out;
}

std::string format_matrix_csv(const Matrix& m, const std::vector<std::string>& station_ids) {
  std::string out = "station_id";
  for (const auto& id : station_ids) out += "," + id;
  out += "\n";
  for (std::size_t r = 0; r < m.rows; ++r) {
    out += station_ids[r];
    for (std::size_t c = 0; c < m.cols; ++c) out += "," + csv::format_number(m(r, c));
    out += "\n";
  }
  return out;
}

void export_graph(const StationGraph& g, const std::filesystem::path& dir) {
  csv::write_text_file(dir / "distance.csv", format_matrix_csv(g.dist, g.station_ids));
  csv::write_text_file(dir / "adjacency.csv", format_matrix_csv(g.adjacency, g.station_ids));
  csv::write_text_file(dir / "adjacency_normalized.csv", format_matrix_csv(g.normalized, g.station_ids));
}

}  // namespace astgin::graph
