#include <doctest.h>

#include <cmath>

#include "astgin/error.hpp"
#include "astgin/metrics.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace astgin;
using namespace astgin::metrics;

using Vec = std::vector<double>;

TEST_CASE("rmse examples") {
  CHECK(rmse(Vec{0.2, 0.4}, Vec{0.2, 0.4}) == 0.0);
  CHECK(rmse(Vec{0.1, 0.5, 0.9}, Vec{0.2, 0.6, 1.0}) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rmse(Vec{0, 1}, Vec{1, 1}) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK_THROWS_AS(rmse(Vec{}, Vec{}), ValidationError);
  CHECK_THROWS_AS(rmse(Vec{1}, Vec{1, 2}), ValidationError);
}

TEST_CASE("r2 examples") {
  CHECK(r2(Vec{0, 1, 3}, Vec{0, 1, 3}) == 1.0);
  CHECK(r2(Vec{0, 2, 4}, Vec{2, 2, 2}) == 0.0);
  CHECK(r2(Vec{0, 2}, Vec{1, 1}) == 0.0);
  CHECK_THROWS_WITH_AS(r2(Vec{3, 3}, Vec{1, 2}), doctest::Contains("undefined R2"), ValidationError);
}

TEST_CASE("explained variance examples") {
  CHECK(var_score(Vec{0, 1, 3}, Vec{0, 1, 3}) == 1.0);
  CHECK(var_score(Vec{0, 1, 3}, Vec{0.5, 1.5, 3.5}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(var_score(Vec{0, 2}, Vec{0, 0}) == 0.0);
  CHECK_THROWS_AS(var_score(Vec{1, 1}, Vec{0, 2}), ValidationError);
}

TEST_CASE("mae examples") {
  CHECK(mae(Vec{0.3, 0.7}, Vec{0.3, 0.7}) == 0.0);
  CHECK(mae(Vec{0.5, 0.5}, Vec{0.6, 0.4}) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(mae(Vec{0, 1}, Vec{0.5, 0.5}) == 0.5);
  CHECK_THROWS_AS(mae(Vec{}, Vec{}), ValidationError);
}

TEST_CASE("accuracy examples") {
  CHECK(accuracy(Vec{3, 4}, Vec{3, 4}) == 1.0);
  CHECK(accuracy(Vec{3, 4}, Vec{0, 0}) == 0.0);
  CHECK(accuracy(Vec{3, 4}, Vec{3, 0}) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_THROWS_WITH_AS(accuracy(Vec{0, 0}, Vec{1, 1}), doctest::Contains("undefined accuracy"), ValidationError);
}

TEST_CASE("pooled report and constant truth") {
  const auto r = compute(Vec{0, 1, 3, 4}, Vec{0.5, 1, 2, 4});
  CHECK(r.n_points == 4);
  CHECK(r.rmse == rmse(Vec{0, 1, 3, 4}, Vec{0.5, 1, 2, 4}));
  CHECK(r.accuracy == accuracy(Vec{0, 1, 3, 4}, Vec{0.5, 1, 2, 4}));
  const auto flat = compute(Vec{0.5, 0.5}, Vec{0.4, 0.6});
  CHECK(std::isnan(flat.r2));
  CHECK(std::isnan(flat.var_score));
  CHECK(flat.rmse == doctest::Approx(0.1));
}

TEST_CASE("per-step breakdown splits M x N blocks by step") {
  // Two samples, M = 2, N = 2: step 0 holds entries 0,1,4,5.
  const Vec y = {1, 2, 10, 20, 3, 4, 30, 40};
  const Vec p = {1, 2, 11, 21, 3, 5, 30, 40};
  const auto steps = per_step(y, p, 2, 2);
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].rmse == doctest::Approx(rmse(Vec{1, 2, 3, 4}, Vec{1, 2, 3, 5})));
  CHECK(steps[1].rmse == doctest::Approx(rmse(Vec{10, 20, 30, 40}, Vec{11, 21, 30, 40})));
  CHECK(steps[0].n_points == 4);
  CHECK_THROWS_AS(per_step(y, p, 3, 2), ValidationError);
}

TEST_CASE("metrics agree with the long-double oracle") {
  testkit::Gen g(31);
  for (int c = 0; c < testkit::kPropertyCases; ++c) {
    const std::size_t n = g.size(2, 200);
    const Vec y = g.vec(n, 0, 1);
    Vec p = y;
    for (double& v : p) v += g.normal(g.uniform(0.01, 0.5));
    CHECK(std::fabs(rmse(y, p) - static_cast<double>(oracle::rmse(y, p))) < 1e-12);
    CHECK(std::fabs(mae(y, p) - static_cast<double>(oracle::mae(y, p))) < 1e-12);
    CHECK(std::fabs(r2(y, p) - static_cast<double>(oracle::r2(y, p))) < 1e-12);
    CHECK(std::fabs(var_score(y, p) - static_cast<double>(oracle::var_score(y, p))) < 1e-12);
    CHECK(std::fabs(accuracy(y, p) - static_cast<double>(oracle::accuracy(y, p))) < 1e-12);
  }
}

TEST_CASE("metric invariants") {
  testkit::Gen g(32);
  for (int c = 0; c < testkit::kPropertyCases; ++c) {
    const std::size_t n = g.size(2, 60);
    const Vec y = g.vec(n, -1, 1), p = g.vec(n, -1, 1);
    const auto r = compute(y, p);
    CHECK(r.mae <= r.rmse + 1e-15);
    CHECK(r.rmse >= 0.0);
    CHECK(r.r2 <= 1.0);
    CHECK(r.var_score <= 1.0);
    CHECK(r.accuracy <= 1.0);
    const double k = g.coin() ? g.uniform(0.1, 10) : -g.uniform(0.1, 10);
    Vec ys = y, ps = p;
    for (double& v : ys) v *= k;
    for (double& v : ps) v *= k;
    CHECK(accuracy(ys, ps) == doctest::Approx(r.accuracy).epsilon(1e-12));
  }
}
