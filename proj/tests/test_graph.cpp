#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "astgin/error.hpp"
#include "astgin/graph.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace astgin;
using namespace astgin::graph;

namespace {

oracle::Mat widen(const Matrix& m) {
  oracle::Mat out = oracle::zeros(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out[i][j] = m(i, j);
  return out;
}

std::vector<Coordinate> random_coords(testkit::Gen& g, std::size_t n) {
  std::vector<Coordinate> c(n);
  for (auto& x : c) x = {g.uniform(56.40, 56.52), g.uniform(-3.10, -2.85)};
  return c;
}

Matrix random_distances(testkit::Gen& g, std::size_t n) {
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = g.uniform(10.0, 8000.0);
  return d;
}

}  // namespace

TEST_CASE("haversine examples") {
  CHECK(haversine({56.46, -2.97}, {56.46, -2.97}) == 0.0);
  CHECK(haversine({0, 0}, {0, 180}) == doctest::Approx(20015086.8).epsilon(1e-9));
  CHECK(haversine({0, 0}, {0, 180}) == doctest::Approx(std::numbers::pi * kEarthRadiusMeters).epsilon(1e-14));
  CHECK(haversine({56.4, -3.0}, {56.5, -2.9}) == haversine({56.5, -2.9}, {56.4, -3.0}));
  CHECK_THROWS_AS(pairwise_distance({{95, 0}, {0, 0}}), ValidationError);
  CHECK_THROWS_AS(pairwise_distance({{0, 0}, {0, 181}}), ValidationError);
}

TEST_CASE("pairwise distances agree with the chord oracle") {
  testkit::Gen g(21);
  for (int c = 0; c < testkit::kPropertyCases; ++c) {
    std::vector<Coordinate> pts(g.size(2, 6));
    for (auto& p : pts) p = {g.uniform(-89.0, 89.0), g.uniform(-179.0, 179.0)};
    const Matrix d = pairwise_distance(pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(d(i, i) == 0.0);
      for (std::size_t j = 0; j < pts.size(); ++j) {
        CHECK(d(i, j) == d(j, i));
        const auto want = oracle::great_circle(pts[i].lat, pts[i].lon, pts[j].lat, pts[j].lon);
        REQUIRE(std::fabs(d(i, j) - static_cast<double>(want)) < 1e-6);
      }
    }
  }
}

TEST_CASE("adjacency examples") {
  Matrix d(2, 2);
  d(0, 1) = d(1, 0) = 100.0;
  const Matrix at_sigma = build_adjacency(d, 100.0, 1000.0);
  CHECK(at_sigma(0, 0) == 1.0);
  CHECK(at_sigma(0, 1) == doctest::Approx(0.367879).epsilon(1e-6));
  CHECK(at_sigma(0, 1) == std::exp(-1.0));
  const Matrix cut = build_adjacency(d, 100.0, 99.0);
  CHECK(cut(0, 1) == 0.0);
  CHECK(cut(1, 1) == 1.0);
  CHECK_THROWS_WITH_AS(build_adjacency(d, 0.0, 1.0), doctest::Contains("degenerate bandwidth"), ValidationError);
}

TEST_CASE("bandwidth and cutoff defaults") {
  Matrix same(3, 3, 3.0);
  for (std::size_t i = 0; i < 3; ++i) same(i, i) = 0.0;
  CHECK(default_sigma(same) == 0.0);

  Matrix three(3, 3);
  three(0, 1) = three(1, 0) = 2.0;
  three(0, 2) = three(2, 0) = 4.0;
  three(1, 2) = three(2, 1) = 4.0;
  // {2, 4, 4}: mean 10/3, variance ((4/3)^2 + 2 (2/3)^2) / 3 = 8/9.
  CHECK(default_sigma(three) == doctest::Approx(std::sqrt(8.0 / 9.0)).epsilon(1e-15));
  Matrix two(2, 2);
  two(0, 1) = two(1, 0) = 2.0;
  CHECK(default_sigma(two) == 0.0);

  testkit::Gen g(4);
  for (int c = 0; c < 20; ++c) {
    const Matrix d = random_distances(g, g.size(2, 7));
    Matrix scaled = d;
    const double k = g.uniform(0.1, 10.0);
    for (double& v : scaled.data) v *= k;
    CHECK(default_sigma(scaled) == doctest::Approx(k * default_sigma(d)).epsilon(1e-12));
    CHECK(distance_percentile(d, 100.0) == doctest::Approx(*std::max_element(d.data.begin(), d.data.end())));
  }
  CHECK(distance_percentile(three, 50.0) == 4.0);
  CHECK(distance_percentile(three, 0.0) == 2.0);
  CHECK(distance_percentile(three, 25.0) == 3.0);
}

TEST_CASE("normalization examples") {
  Matrix pair(2, 2);
  pair(0, 1) = pair(1, 0) = 1.0;
  const Matrix h = normalize_adjacency(pair);
  for (double v : h.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normalize_adjacency(Matrix(1, 1)) == Matrix(1, 1, 1.0));

  Matrix isolated(3, 3);
  isolated(0, 1) = isolated(1, 0) = 0.4;
  const Matrix hi = normalize_adjacency(isolated);
  CHECK(hi(2, 2) == 1.0);
  CHECK(hi(2, 0) == 0.0);
  CHECK(hi(0, 2) == 0.0);

  Matrix negative(2, 2);
  negative(0, 1) = negative(1, 0) = -0.1;
  CHECK_THROWS_AS(normalize_adjacency(negative), ValidationError);
}

TEST_CASE("normalization matches the explicit product oracle and stays in the unit spectrum") {
  testkit::Gen g(8);
  for (int c = 0; c < testkit::kPropertyCases; ++c) {
    const std::size_t n = c < 50 ? 5 : g.size(1, 9);
    const Matrix a = g.symmetric_weights(n);
    const Matrix h = normalize_adjacency(a);
    const auto want = oracle::normalize(widen(a));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        REQUIRE(std::fabs(h(i, j) - static_cast<double>(want[i][j])) < 1e-14);
        CHECK(std::fabs(h(i, j) - h(j, i)) <= 1e-12);
      }
    for (long double ev : oracle::symmetric_eigenvalues(widen(h))) CHECK(std::fabs(static_cast<double>(ev)) <= 1.0 + 1e-9);
  }
}

TEST_CASE("relabelling stations permutes adjacency and normalization") {
  testkit::Gen g(12);
  for (int c = 0; c < testkit::kPropertyCases; ++c) {
    const std::size_t n = g.size(2, 8);
    const Matrix d = random_distances(g, n);
    const auto p = g.permutation(n);
    const double sigma = g.uniform(500, 4000), kappa = g.uniform(1000, 9000);
    const Matrix a = build_adjacency(d, sigma, kappa);
    CHECK(build_adjacency(testkit::permute_sym(d, p), sigma, kappa) == testkit::permute_sym(a, p));
    const Matrix lhs = normalize_adjacency(testkit::permute_sym(a, p));
    const Matrix rhs = testkit::permute_sym(normalize_adjacency(a), p);
    CHECK(testkit::max_abs_diff(lhs.data, rhs.data) < 1e-15);
  }
}

TEST_CASE("shrinking the cutoff never raises an entry") {
  testkit::Gen g(13);
  for (int c = 0; c < testkit::kPropertyCases; ++c) {
    const Matrix d = random_distances(g, g.size(2, 8));
    const double sigma = g.uniform(500, 4000);
    const double k1 = g.uniform(0, 9000), k2 = g.uniform(0, k1);
    const Matrix wide = build_adjacency(d, sigma, k1), narrow = build_adjacency(d, sigma, k2);
    for (std::size_t i = 0; i < d.data.size(); ++i) {
      CHECK(narrow.data[i] <= wide.data[i]);
      CHECK((wide.data[i] >= 0.0 && wide.data[i] <= 1.0));
      if (d.data[i] > k2) CHECK(narrow.data[i] == 0.0);
    }
    const auto want = oracle::adjacency(widen(d), sigma, k1);
    for (std::size_t i = 0; i < d.rows; ++i)
      for (std::size_t j = 0; j < d.cols; ++j) CHECK(std::fabs(wide(i, j) - static_cast<double>(want[i][j])) < 1e-15);
  }
}

TEST_CASE("graph built from coordinates carries its defaults") {
  testkit::Gen g(3);
  const auto coords = random_coords(g, 6);
  const auto sg = build_graph({"a", "b", "c", "d", "e", "f"}, coords);
  CHECK(sg.size() == 6);
  CHECK(sg.sigma == doctest::Approx(default_sigma(sg.dist)));
  CHECK(sg.kappa == doctest::Approx(distance_percentile(sg.dist, 95.0)));
  CHECK(sg.normalized == normalize_adjacency(sg.adjacency));
  const auto custom = build_graph({"a", "b", "c", "d", "e", "f"}, coords, {250.0, 1e9});
  CHECK(custom.sigma == 250.0);
  CHECK(custom.kappa == 1e9);
}

TEST_CASE("distance matrix override is reordered to the requested stations") {
  std::istringstream in(
      "station_id,A,B,C\n"
      "A,0,5,7\n"
      "B,5,0,9\n"
      "C,7,9,0\n");
  const Matrix d = read_distance_matrix(in, {"C", "A", "B"});
  CHECK(d(0, 1) == 7.0);
  CHECK(d(0, 2) == 9.0);
  CHECK(d(1, 2) == 5.0);
  CHECK(d(2, 2) == 0.0);
  std::istringstream asym("station_id,A,B\nA,0,5\nB,6,0\n");
  CHECK_THROWS_AS(read_distance_matrix(asym, {"A", "B"}), ValidationError);
  std::istringstream missing("station_id,A,B\nA,0,5\nB,5,0\n");
  CHECK_THROWS_WITH_AS(read_distance_matrix(missing, {"A", "Z"}), doctest::Contains("'Z'"), ValidationError);
  std::istringstream round(format_matrix_csv(d, {"C", "A", "B"}));
  CHECK(read_distance_matrix(round, {"C", "A", "B"}) == d);
}
