#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "astgin/dataset.hpp"
#include "astgin/error.hpp"
#include "astgin/graph.hpp"
#include "astgin/synth.hpp"
#include "astgin/trainer.hpp"
#include "support.hpp"

using namespace astgin;
using namespace astgin::trainer;

namespace {

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.window = 4;
  c.horizon = 2;
  c.gcn.hidden_dims = {4, 4, 8};
  c.informer.d_model = 8;
  c.informer.n_heads = 2;
  c.informer.encoder_layers = 1;
  c.informer.decoder_layers = 1;
  c.informer.d_ff = 8;
  return c;
}

struct Fixture {
  synth::SynthData data;
  dataset::Splits splits;
};

Fixture tiny_data() {
  synth::SynthConfig s;
  s.n_stations = 3;
  s.days = 3;
  s.seed = 4;
  Fixture f{synth::generate(s), {}};
  const auto c = tiny_model();
  f.splits = dataset::prepare(f.data.data, c.window, c.horizon, model::attribute_mode(c.ablation), {}, 1);
  return f;
}

// Availability-only samples cut from one series laid out [t][n].
std::vector<a2unit::AugmentedSample> samples_from(const std::vector<std::vector<double>>& series, std::size_t window,
                                                  std::size_t horizon) {
  std::vector<a2unit::AugmentedSample> out;
  const std::size_t n = series.front().size();
  for (std::size_t s = 0; s + window + horizon < series.size(); ++s) {
    a2unit::AugmentedSample a;
    a.start = s;
    a.e = Tensor3(window + 1, n, 1);
    a.y = Matrix(horizon, n);
    for (std::size_t t = 0; t <= window; ++t)
      for (std::size_t i = 0; i < n; ++i) a.e(t, i, 0) = series[s + t][i];
    for (std::size_t m = 0; m < horizon; ++m)
      for (std::size_t i = 0; i < n; ++i) a.y(m, i) = series[s + window + 1 + m][i];
    out.push_back(a);
  }
  return out;
}

std::vector<double> flat_params(const nn::ParameterStore<double>& store) {
  std::vector<double> out;
  for (const auto& p : store) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

}  // namespace

TEST_CASE("step decay schedule") {
  CHECK(lr_at(0, 1e-4) == 1e-4);
  CHECK(lr_at(1, 1e-4) == 1e-4);
  CHECK(lr_at(2, 1e-4) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_at(5, 1e-4) == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(lr_at(40, 1e-4) == kMinLearningRate);
  CHECK(lr_at(9, 1e-3, 4, 0.5) == doctest::Approx(2.5e-4).epsilon(1e-12));
  for (std::size_t e = 1; e < 30; ++e) CHECK(lr_at(e, 1e-3, 3, 0.7) <= lr_at(e - 1, 1e-3, 3, 0.7));
}

TEST_CASE("early stopping") {
  EarlyStopper decreasing(5);
  for (std::size_t e = 0; e < 20; ++e) {
    CHECK(decreasing.update(e, 1.0 / static_cast<double>(e + 1)));
    CHECK_FALSE(decreasing.should_stop());
  }
  CHECK(decreasing.best_epoch() == 19);

  EarlyStopper flat(5);
  std::size_t stopped = 0;
  for (std::size_t e = 0; e < 50; ++e) {
    flat.update(e, e <= 3 ? 10.0 - static_cast<double>(e) : 7.0);
    if (flat.should_stop()) {
      stopped = e;
      break;
    }
  }
  CHECK(stopped == 8);
  CHECK(flat.best_epoch() == 3);
  CHECK(flat.best_loss() == 7.0);

  EarlyStopper off(0);
  for (std::size_t e = 0; e < 30; ++e) off.update(e, 1.0);
  CHECK_FALSE(off.should_stop());
  CHECK(off.best_epoch() == 0);
}

TEST_CASE("loss examples") {
  nn::ParameterStore<double> store;
  nn::Tape<double> tape;
  const auto y = tape.constant({2, 2}, {0.1, 0.2, 0.3, 0.4});
  CHECK(loss(y, y, store, 1.0).value()[0] == 0.0);
  const auto shifted = tape.constant({2, 2}, {0.2, 0.3, 0.4, 0.5});
  CHECK(loss(y, shifted, store, 1.0).value()[0] == doctest::Approx(0.01).epsilon(1e-12));

  store.add("w", {1, 1}, nn::ParamKind::weight, {2.0});
  store.add("b", {1}, nn::ParamKind::bias, {5.0});
  nn::Tape<double> t2;
  const auto y2 = t2.constant({1}, {0.0});
  CHECK(loss(y2, y2, store, 1.0).value()[0] == doctest::Approx(4.0));
  CHECK(loss(y2, y2, store, 0.5).value()[0] == doctest::Approx(2.0));
  double last = -1.0;
  for (double lambda : {0.0, 1e-3, 0.1, 1.0, 10.0}) {
    const double v = loss(y2, t2.constant({1}, {0.3}), store, lambda).value()[0];
    CHECK(v > last);
    last = v;
  }
}

TEST_CASE("one small Adam step lowers the training loss") {
  auto f = tiny_data();
  model::AstGin<double> model(tiny_model(), f.data.graph.normalized, 2);
  std::vector<const a2unit::AugmentedSample*> batch;
  for (std::size_t i = 0; i < 8; ++i) batch.push_back(&f.splits.train[i]);
  auto eval = [&] {
    nn::Tape<double> tape;
    const auto out = model.forward(tape, batch);
    auto l = loss(model::batch_target(tape, batch), out, model.params(), 1.5e-3);
    return l.value()[0];
  };
  const double before = eval();
  {
    nn::Tape<double> tape;
    model.params().zero_grad();
    const auto out = model.forward(tape, batch);
    auto l = loss(model::batch_target(tape, batch), out, model.params(), 1.5e-3);
    tape.backward(l);
  }
  nn::adam_step(model.params(), 1e-6);
  CHECK(eval() < before);
}

TEST_CASE("perturbation only touches availability") {
  auto f = tiny_data();
  const auto& s = f.splits.test;
  const auto same = perturb(s, 0.0, 9);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(same[i].e.data == s[i].e.data);
  const auto a = perturb(s, 0.1, 9), b = perturb(s, 0.1, 9);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(a[i].e.data == b[i].e.data);
    CHECK(a[i].y.data == s[i].y.data);
    for (std::size_t t = 0; t < s[i].e.d0; ++t)
      for (std::size_t n = 0; n < s[i].e.d1; ++n) {
        CHECK(a[i].e(t, n, 0) >= 0.0);
        CHECK(a[i].e(t, n, 0) <= 1.0);
        for (std::size_t k = 1; k < s[i].e.d2; ++k) CHECK(a[i].e(t, n, k) == s[i].e(t, n, k));
      }
  }
  CHECK_THROWS_AS(perturb(s, -0.1, 1), ValidationError);
}

TEST_CASE("persistence and historical average oracles") {
  std::vector<std::vector<double>> flat(60, {0.3, 0.7});
  const auto constant = samples_from(flat, 4, 3);
  const auto p = persistence(constant);
  CHECK(p.steps == 3);
  CHECK(p.stations == 2);
  CHECK(score(p).rmse == 0.0);

  // A daily cycle is predicted exactly from its own history.
  std::vector<std::vector<double>> cycle;
  for (std::size_t t = 0; t < 48 * 6; ++t) {
    const double h = static_cast<double>(t % 48);
    cycle.push_back({0.5 + 0.4 * std::sin(h / 48.0 * 6.283185307179586), 0.2 + 0.01 * h});
  }
  auto all = samples_from(cycle, 4, 2);
  const std::vector<a2unit::AugmentedSample> train(all.begin(), all.begin() + 150), test(all.begin() + 150, all.end());
  ingest::TimeGrid grid;
  grid.count = cycle.size();
  const auto ha = HistoricalAverage(train, grid).predict(test);
  CHECK(score(ha).rmse < 1e-12);
  CHECK(score(persistence(test)).rmse > 0.01);
  const auto both = baselines(train, test, grid);
  CHECK(both.count("persistence") == 1);
  CHECK(both.at("historical_average").rmse < 1e-12);
}

TEST_CASE("training is bit reproducible and restores the best epoch") {
  auto f = tiny_data();
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  c.lr0 = 1e-3;
  c.patience = 0;
  c.seed = 5;
  c.threads = 1;
  model::AstGin<double> a(tiny_model(), f.data.graph.normalized, 1), b(tiny_model(), f.data.graph.normalized, 1);
  std::vector<EpochRecord> seen;
  const auto ra = train(a, f.splits.train, f.splits.val, c, [&](const EpochRecord& r) { seen.push_back(r); });
  const auto rb = train(b, f.splits.train, f.splits.val, c);
  REQUIRE(ra.epochs.size() == 3);
  CHECK(seen.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(ra.epochs[e].train_loss == rb.epochs[e].train_loss);
    CHECK(ra.epochs[e].val_loss == rb.epochs[e].val_loss);
    CHECK(ra.epochs[e].lr == lr_at(e, c.lr0, c.lr_decay_every, c.lr_decay));
  }
  CHECK(flat_params(a.params()) == flat_params(b.params()));
  CHECK(mean_squared_error(a, f.splits.val, 1) == ra.epochs[ra.best_epoch].val_loss);
  CHECK_FALSE(ra.early_stopped);

  TrainConfig bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(a, f.splits.train, f.splits.val, bad), ValidationError);
}

TEST_CASE("predictions do not depend on the worker count") {
  auto f = tiny_data();
  model::AstGin<double> model(tiny_model(), f.data.graph.normalized, 3);
  const auto one = predict_all(model, f.splits.test, 1, 5);
  const auto many = predict_all(model, f.splits.test, 3, 2);
  CHECK(one.y_hat == many.y_hat);
  CHECK(one.y == many.y);
  CHECK(one.starts == many.starts);
  CHECK(one.y.size() == f.splits.test.size() * 2 * 3);
  const auto zero = perturb_eval(model, f.splits.test, {0.0, 0.05}, 1, 2);
  CHECK(zero[0].report.rmse == evaluate(model, f.splits.test, 1).rmse);
  CHECK(zero[1].sigma == 0.05);
}

TEST_CASE("report JSON carries the run record") {
  TrainReport r;
  r.ablation = "no_gcn";
  r.horizon = 3;
  r.epochs = {{0, 0.5, 0.4, 1e-4}, {1, 0.3, 0.35, 1e-5}};
  r.best_epoch = 1;
  r.has_test = true;
  r.test_metrics.rmse = 0.1;
  r.test_metrics.n_points = 12;
  r.seed = 42;
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j.at("ablation") == "no_gcn");
  CHECK(j.at("horizon") == 3);
  CHECK(j.at("best_epoch") == 1);
  CHECK(j.at("seed") == 42);
  CHECK(j.at("history").size() == 2);
  CHECK(j.at("val_loss") == 0.35);
  CHECK(j.at("test_metrics").at("rmse") == 0.1);
  CHECK(j.at("test_metrics").at("n_points") == 12);
  CHECK(j.at("early_stopped") == false);
}
