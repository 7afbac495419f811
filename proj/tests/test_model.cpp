#include <doctest.h>

#include <cmath>

#include "astgin/a2unit.hpp"
#include "astgin/error.hpp"
#include "astgin/graph.hpp"
#include "astgin/model.hpp"
#include "support.hpp"

using namespace astgin;
using namespace astgin::model;

namespace {

ModelConfig small_config(Ablation ablation, std::size_t window = 4, std::size_t horizon = 2) {
  ModelConfig c;
  c.window = window;
  c.horizon = horizon;
  c.poi_dims = 3;
  c.weather_dims = 1;
  c.ablation = ablation;
  c.gcn.hidden_dims = {6, 6, 8};
  c.informer.d_model = 8;
  c.informer.n_heads = 2;
  c.informer.encoder_layers = 1;
  c.informer.decoder_layers = 1;
  c.informer.d_ff = 12;
  return c;
}

ingest::WindowPrecursor random_precursor(testkit::Gen& g, const ModelConfig& c, std::size_t n) {
  ingest::WindowPrecursor w;
  w.x = g.matrix(c.window + 1, n, 0, 1);
  w.alpha = Matrix(n, c.poi_dims);
  for (std::size_t i = 0; i < n; ++i) w.alpha(i, g.size(0, c.poi_dims - 1)) = 1.0;
  w.beta = Tensor3(c.window + 1, n, c.weather_dims);
  for (double& v : w.beta.data) v = g.uniform(0, 1);
  w.y = g.matrix(c.horizon, n, 0, 1);
  return w;
}

a2unit::AugmentedSample augment_one(const ingest::WindowPrecursor& w, Ablation ablation) {
  return a2unit::augment_dataset({w}, attribute_mode(ablation)).front();
}

// Station axis of an (L+1) x N x K block reordered so new station i is old p[i].
a2unit::AugmentedSample permute_sample(const a2unit::AugmentedSample& s, const std::vector<std::size_t>& p) {
  a2unit::AugmentedSample out = s;
  for (std::size_t t = 0; t < s.e.d0; ++t)
    for (std::size_t i = 0; i < s.e.d1; ++i)
      for (std::size_t k = 0; k < s.e.d2; ++k) out.e(t, i, k) = s.e(t, p[i], k);
  for (std::size_t m = 0; m < s.y.rows; ++m)
    for (std::size_t i = 0; i < s.y.cols; ++i) out.y(m, i) = s.y(m, p[i]);
  return out;
}

}  // namespace

TEST_CASE("ablation names and attribute modes") {
  for (const char* name : {"full", "no_attributes", "no_gcn", "poi_only", "weather_only"})
    CHECK(to_string(parse_ablation(name)) == name);
  CHECK_THROWS_AS(parse_ablation("poi"), ValidationError);
  CHECK(attribute_mode(Ablation::no_attributes) == a2unit::AttributeMode::none);
  CHECK(attribute_mode(Ablation::no_gcn) == a2unit::AttributeMode::full);
}

TEST_CASE("feature width follows the ablation") {
  CHECK(small_config(Ablation::full).features() == 3 + 1 + 5);
  CHECK(small_config(Ablation::no_gcn).features() == 3 + 1 + 5);
  CHECK(small_config(Ablation::poi_only).features() == 3 + 1);
  CHECK(small_config(Ablation::weather_only).features() == 1 + 5);
  CHECK(small_config(Ablation::no_attributes).features() == 1);

  const ModelConfig f = finalize(small_config(Ablation::full));
  CHECK(f.gcn.in_dim == 9);
  CHECK(f.gcn.hidden_dims.back() == f.informer.d_model);
  CHECK(f.informer.horizon == 2);
  ModelConfig bad = small_config(Ablation::full);
  bad.horizon = 0;
  CHECK_THROWS_AS(finalize(bad), ValidationError);
}

TEST_CASE("every ablation predicts an M x N block") {
  testkit::Gen g(1);
  const std::size_t n = 3;
  const Matrix a_hat = graph::normalize_adjacency(g.symmetric_weights(n));
  for (Ablation ab : {Ablation::full, Ablation::no_attributes, Ablation::no_gcn, Ablation::poi_only,
                      Ablation::weather_only}) {
    const ModelConfig c = small_config(ab, 3, 4);
    AstGin<double> model(c, a_hat, 7);
    CHECK(model.params().contains("proj.weight") == (ab == Ablation::no_gcn));
    CHECK(model.params().contains("gcn.0.weight") == (ab != Ablation::no_gcn));
    const auto sample = augment_one(random_precursor(g, c, n), ab);
    REQUIRE(sample.features() == model.config().features());
    const Matrix y = model.predict(sample);
    CHECK(y.rows == 4);
    CHECK(y.cols == n);
    for (double v : y.data) CHECK(std::isfinite(v));
  }
}

TEST_CASE("batched forward matches per-sample predictions") {
  testkit::Gen g(2);
  const ModelConfig c = small_config(Ablation::full);
  const Matrix a_hat = graph::normalize_adjacency(g.symmetric_weights(4));
  AstGin<double> model(c, a_hat, 3);
  std::vector<a2unit::AugmentedSample> samples;
  for (int i = 0; i < 3; ++i) samples.push_back(augment_one(random_precursor(g, c, 4), Ablation::full));
  std::vector<const a2unit::AugmentedSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  nn::Tape<double> tape;
  const auto out = model.forward(tape, ptrs);
  REQUIRE(out.shape() == nn::Shape{3, 2, 4});
  const std::vector<double> batched(out.value().begin(), out.value().end());
  for (std::size_t b = 0; b < 3; ++b) {
    const Matrix y = model.predict(samples[b]);
    for (std::size_t i = 0; i < y.data.size(); ++i) CHECK(std::fabs(batched[b * 8 + i] - y.data[i]) < 1e-12);
  }
}

TEST_CASE("no_attributes ignores POI and weather") {
  testkit::Gen g(3);
  const ModelConfig c = small_config(Ablation::no_attributes);
  const Matrix a_hat = graph::normalize_adjacency(g.symmetric_weights(3));
  AstGin<double> model(c, a_hat, 5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = random_precursor(g, c, 3);
    auto other = random_precursor(g, c, 3);
    other.x = w.x;
    other.y = w.y;
    CHECK(model.predict(augment_one(w, Ablation::no_attributes)).data ==
          model.predict(augment_one(other, Ablation::no_attributes)).data);
  }
}

TEST_CASE("full forward is equivariant under station relabelling") {
  testkit::Gen g(4);
  for (int trial = 0; trial < testkit::kPropertyCases; ++trial) {
    const std::size_t n = g.size(4, 6);
    const ModelConfig c = small_config(g.coin() ? Ablation::full : Ablation::no_gcn, g.size(2, 5), g.size(1, 3));
    const Matrix a_hat = graph::normalize_adjacency(g.symmetric_weights(n));
    const auto p = g.permutation(n);
    AstGin<double> model(c, a_hat, trial);
    AstGin<double> moved(c, testkit::permute_sym(a_hat, p), model.params());
    const auto sample = augment_one(random_precursor(g, c, n), c.ablation);
    const Matrix base = model.predict(sample);
    const Matrix got = moved.predict(permute_sample(sample, p));
    double worst = 0.0;
    for (std::size_t m = 0; m < base.rows; ++m)
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::fabs(got(m, i) - base(m, p[i])));
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("same seed builds identical parameters") {
  testkit::Gen g(5);
  const ModelConfig c = small_config(Ablation::full);
  const Matrix a_hat = graph::normalize_adjacency(g.symmetric_weights(3));
  AstGin<double> a(c, a_hat, 11), b(c, a_hat, 11), other(c, a_hat, 12);
  bool all_equal = true, any_differs = false;
  auto ia = a.params().begin();
  auto io = other.params().begin();
  for (const auto& p : b.params()) {
    all_equal = all_equal && p.value == ia->value;
    any_differs = any_differs || p.value != io->value;
    ++ia;
    ++io;
  }
  CHECK(all_equal);
  CHECK(any_differs);
}

TEST_CASE("errors carry the pipeline stage") {
  testkit::Gen g(6);
  const ModelConfig c = small_config(Ablation::full);
  AstGin<double> model(c, graph::normalize_adjacency(g.symmetric_weights(3)), 1);
  nn::Tape<double> tape;
  CHECK_THROWS_WITH_AS(model.forward(tape.constant({1, 5, 3, 4}, std::vector<double>(60))),
                       doctest::Contains("a2unit: expected input [B, 5, 3, 9]"), ValidationError);
  const std::vector<const a2unit::AugmentedSample*> none;
  CHECK_THROWS_WITH_AS(model.forward(tape, none), doctest::Contains("a2unit: empty batch"), ValidationError);

  CHECK_THROWS_AS(AstGin<double>(c, Matrix(2, 3), 1), ValidationError);
  nn::ParameterStore<double> partial;
  CHECK_THROWS_WITH_AS(AstGin<double>(c, Matrix(3, 3), partial), doctest::Contains("model: parameter set"),
                       ValidationError);
}
