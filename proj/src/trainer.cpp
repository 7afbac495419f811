#include "astgin/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include <json.hpp>

#include "astgin/error.hpp"
#include "astgin/nn/ops.hpp"

namespace astgin::trainer {

using a2unit::AugmentedSample;
using nlohmann::json;

void validate(const TrainConfig& config) {
  if (!(config.lr0 > 0.0)) throw ValidationError("lr0 must be > 0");
  if (config.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(config.lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (config.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (config.lr_decay_every < 1) throw ValidationError("lr_decay_every must be >= 1");
  if (!(config.lr_decay > 0.0 && config.lr_decay <= 1.0)) throw ValidationError("lr_decay must be in (0, 1]");
}

double lr_at(std::size_t epoch, double lr0, std::size_t decay_every, double factor) {
  if (decay_every == 0) throw ValidationError("lr decay interval must be >= 1");
  const double lr = lr0 * std::pow(factor, static_cast<double>(epoch / decay_every));
  return std::max(lr, kMinLearningRate);
}

std::size_t resolve_threads(std::size_t requested) {
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ASTGIN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return std::min<std::size_t>(static_cast<std::size_t>(v), hw);
  }
  return hw;
}

template <typename T>
nn::Var<T> loss(nn::Var<T> y, nn::Var<T> y_hat, nn::ParameterStore<T>& store, double lambda) {
  if (y.shape() != y_hat.shape())
    throw ValidationError("loss: truth " + nn::to_string(y.shape()) + " vs prediction " + nn::to_string(y_hat.shape()));
  nn::Var<T> data = nn::mse(y_hat, y);
  if (lambda == 0.0) return data;
  return nn::add(data, nn::scale(nn::l2_penalty(y.tape(), store), static_cast<T>(lambda)));
}

bool EarlyStopper::update(std::size_t epoch, double val_loss) {
  if (!seen_ || val_loss < best_loss_) {
    seen_ = true;
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

namespace {

json metrics_json(const metrics::MetricsReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"rmse", num(r.rmse)},         {"r2", num(r.r2)},   {"var", num(r.var_score)},
              {"mae", num(r.mae)},           {"accuracy", num(r.accuracy)}, {"n_points", r.n_points}};
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string to_json(const metrics::MetricsReport& report) { return metrics_json(report).dump(2); }

std::string to_json(const TrainReport& report) {
  json history = json::array();
  for (const auto& e : report.epochs)
    history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr}});
  const double best_val = report.epochs.empty() ? 0.0 : report.epochs[report.best_epoch].val_loss;
  json j{{"ablation", report.ablation},
         {"horizon", report.horizon},
         {"epochs", report.epochs.size()},
         {"best_epoch", report.best_epoch},
         {"early_stopped", report.early_stopped},
         {"val_loss", best_val},
         {"history", history},
         {"seed", report.seed},
         {"wall_seconds", report.wall_seconds}};
  j["test_metrics"] = report.has_test ? metrics_json(report.test_metrics) : json(nullptr);
  return j.dump(2);
}

template <typename T>
TrainReport train(model::AstGin<T>& model, const std::vector<AugmentedSample>& train_set,
                  const std::vector<AugmentedSample>& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  validate(config);
  if (train_set.empty()) throw ValidationError("train: empty training split");
  if (val_set.empty()) throw ValidationError("train: empty validation split");
  const auto t0 = std::chrono::steady_clock::now();

  TrainReport report;
  report.ablation = model::to_string(model.config().ablation);
  report.horizon = model.config().horizon;
  report.seed = config.seed;

  auto& store = model.params();
  const nn::AdamConfig adam{0.9, 0.999, 1e-8, config.checked};
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  EarlyStopper stopper(config.patience);
  std::vector<std::vector<T>> best = store.snapshot();
  nn::Tape<T> tape(config.checked);
  std::vector<const AugmentedSample*> batch;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(epoch, config.lr0, config.lr_decay_every, config.lr_decay);
    std::shuffle(order.begin(), order.end(), rng);
    double mse_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_set[order[i]]);
      tape.reset();
      store.zero_grad();
      informer::ForwardContext ctx;
      ctx.training = true;
      ctx.dropout_seed = mix(config.seed, epoch * 1000003 + batches);
      nn::Var<T> y_hat = model.forward(tape, batch, ctx);
      nn::Var<T> y = model::batch_target(tape, std::span<const AugmentedSample* const>(batch));
      nn::Var<T> data = nn::mse(y_hat, y);
      nn::Var<T> total = config.lambda == 0.0
                             ? data
                             : nn::add(data, nn::scale(nn::l2_penalty(tape, store), static_cast<T>(config.lambda)));
      const double value = static_cast<double>(total.item());
      if (!std::isfinite(value))
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batches) + " (loss " + std::to_string(value) + ")");
      tape.backward(total);
      nn::adam_step(store, lr, adam);
      mse_sum += static_cast<double>(data.item());
      ++batches;
    }
    tape.reset();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = mse_sum / static_cast<double>(batches);
    rec.val_loss = mean_squared_error(model, val_set, config.threads);
    if (!std::isfinite(rec.val_loss))
      throw NumericalError("validation loss is not finite at epoch " + std::to_string(epoch));
    report.epochs.push_back(rec);
    if (stopper.update(epoch, rec.val_loss)) best = store.snapshot();
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      report.early_stopped = true;
      break;
    }
  }
  store.restore(best);
  report.best_epoch = stopper.best_epoch();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

template <typename T>
Predictions predict_all(model::AstGin<T>& model, const std::vector<AugmentedSample>& samples, std::size_t threads,
                        std::size_t batch_size) {
  if (samples.empty()) throw ValidationError("evaluate: empty split");
  if (batch_size == 0) batch_size = 1;
  Predictions out;
  out.steps = model.config().horizon;
  out.stations = model.stations();
  const std::size_t block = out.steps * out.stations;
  out.y.resize(samples.size() * block);
  out.y_hat.resize(samples.size() * block);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.starts.push_back(samples[i].start);
    if (samples[i].y.data.size() != block)
      throw ValidationError("evaluate: sample " + std::to_string(i) + " target is not " + std::to_string(out.steps) +
                            " x " + std::to_string(out.stations));
    std::copy(samples[i].y.data.begin(), samples[i].y.data.end(), out.y.begin() + static_cast<std::ptrdiff_t>(i * block));
  }

  const std::size_t chunks = (samples.size() + batch_size - 1) / batch_size;
  const std::size_t workers = std::min(resolve_threads(threads), chunks);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      nn::Tape<T> tape;
      nn::NoGradGuard<T> guard(tape);
      std::vector<const AugmentedSample*> batch;
      for (std::size_t c = next++; c < chunks; c = next++) {
        const std::size_t begin = c * batch_size, end = std::min(samples.size(), begin + batch_size);
        batch.clear();
        for (std::size_t i = begin; i < end; ++i) batch.push_back(&samples[i]);
        tape.reset();
        auto v = model.forward(tape, batch).value();
        for (std::size_t i = 0; i < v.size(); ++i) out.y_hat[begin * block + i] = static_cast<double>(v[i]);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

metrics::MetricsReport score(const Predictions& p) { return metrics::compute(p.y, p.y_hat); }

template <typename T>
metrics::MetricsReport evaluate(model::AstGin<T>& model, const std::vector<AugmentedSample>& samples,
                                std::size_t threads) {
  return score(predict_all(model, samples, threads));
}

template <typename T>
double mean_squared_error(model::AstGin<T>& model, const std::vector<AugmentedSample>& samples, std::size_t threads) {
  const Predictions p = predict_all(model, samples, threads);
  const double r = metrics::rmse(p.y, p.y_hat);
  return r * r;
}

std::vector<AugmentedSample> perturb(const std::vector<AugmentedSample>& samples, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ValidationError("perturbation sigma must be >= 0");
  std::vector<AugmentedSample> out = samples;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& s : out) {
    const std::size_t k = s.e.d2;
    for (std::size_t i = 0; i < s.e.d0 * s.e.d1; ++i) {
      const double z = normal(rng);
      double& x = s.e.data[i * k];
      x = std::clamp(x + sigma * z, 0.0, 1.0);
    }
  }
  return out;
}

template <typename T>
std::vector<PerturbResult> perturb_eval(model::AstGin<T>& model, const std::vector<AugmentedSample>& samples,
                                        const std::vector<double>& sigmas, std::uint64_t seed, std::size_t threads) {
  std::vector<PerturbResult> out;
  for (double sigma : sigmas) {
    if (!(sigma >= 0.0)) throw ValidationError("perturbation sigma must be >= 0");
    PerturbResult r;
    r.sigma = sigma;
    r.report = sigma == 0.0 ? evaluate(model, samples, threads) : evaluate(model, perturb(samples, sigma, seed), threads);
    out.push_back(r);
  }
  return out;
}

Predictions persistence(const std::vector<AugmentedSample>& samples) {
  if (samples.empty()) throw ValidationError("persistence: empty split");
  Predictions out;
  out.steps = samples.front().y.rows;
  out.stations = samples.front().stations();
  for (const auto& s : samples) {
    out.starts.push_back(s.start);
    out.y.insert(out.y.end(), s.y.data.begin(), s.y.data.end());
    const std::size_t last = s.steps() - 1;
    for (std::size_t m = 0; m < out.steps; ++m)
      for (std::size_t n = 0; n < out.stations; ++n) out.y_hat.push_back(s.e(last, n, 0));
  }
  return out;
}

HistoricalAverage::HistoricalAverage(const std::vector<AugmentedSample>& train_set, const ingest::TimeGrid& grid)
    : grid_(grid) {
  if (train_set.empty()) throw ValidationError("historical average: empty training split");
  constexpr std::size_t slots = 24 * 60 / ingest::TimeGrid::kStepMinutes;
  stations_ = train_set.front().stations();
  // Each covered step is counted once even when windows overlap.
  std::map<std::size_t, std::vector<double>> steps;
  for (const auto& s : train_set) {
    const std::size_t len = s.steps();
    for (std::size_t t = 0; t < len; ++t) {
      auto& row = steps[s.start + t];
      if (row.empty())
        for (std::size_t n = 0; n < stations_; ++n) row.push_back(s.e(t, n, 0));
    }
    for (std::size_t m = 0; m < s.y.rows; ++m) {
      auto& row = steps[s.start + len + m];
      if (row.empty())
        for (std::size_t n = 0; n < stations_; ++n) row.push_back(s.y(m, n));
    }
  }
  std::vector<double> slot_sum(stations_ * slots, 0.0), total(stations_, 0.0);
  std::vector<std::size_t> slot_count(slots, 0);
  for (const auto& [step, row] : steps) {
    const auto slot = static_cast<std::size_t>(grid_.slot(step));
    ++slot_count[slot];
    for (std::size_t n = 0; n < stations_; ++n) {
      slot_sum[n * slots + slot] += row[n];
      total[n] += row[n];
    }
  }
  slot_mean_.assign(stations_ * slots, std::numeric_limits<double>::quiet_NaN());
  station_mean_.resize(stations_);
  for (std::size_t n = 0; n < stations_; ++n) {
    station_mean_[n] = total[n] / static_cast<double>(steps.size());
    for (std::size_t k = 0; k < slots; ++k)
      if (slot_count[k] > 0) slot_mean_[n * slots + k] = slot_sum[n * slots + k] / static_cast<double>(slot_count[k]);
  }
}

Predictions HistoricalAverage::predict(const std::vector<AugmentedSample>& samples) const {
  if (samples.empty()) throw ValidationError("historical average: empty split");
  constexpr std::size_t slots = 24 * 60 / ingest::TimeGrid::kStepMinutes;
  Predictions out;
  out.steps = samples.front().y.rows;
  out.stations = samples.front().stations();
  if (out.stations != stations_) throw ValidationError("historical average: station count differs from training");
  for (const auto& s : samples) {
    out.starts.push_back(s.start);
    out.y.insert(out.y.end(), s.y.data.begin(), s.y.data.end());
    for (std::size_t m = 0; m < out.steps; ++m) {
      const auto slot = static_cast<std::size_t>(grid_.slot(s.start + s.steps() + m));
      for (std::size_t n = 0; n < out.stations; ++n) {
        const double v = slot_mean_[n * slots + slot];
        out.y_hat.push_back(std::isnan(v) ? station_mean_[n] : v);
      }
    }
  }
  return out;
}

std::map<std::string, metrics::MetricsReport> baselines(const std::vector<AugmentedSample>& train_set,
                                                        const std::vector<AugmentedSample>& test_set,
                                                        const ingest::TimeGrid& grid) {
  if (test_set.empty()) throw ValidationError("baselines: empty test split");
  std::map<std::string, metrics::MetricsReport> out;
  out["persistence"] = score(persistence(test_set));
  out["historical_average"] = score(HistoricalAverage(train_set, grid).predict(test_set));
  return out;
}

#define ASTGIN_INSTANTIATE_TRAINER(T)                                                                              \
  template nn::Var<T> loss<T>(nn::Var<T>, nn::Var<T>, nn::ParameterStore<T>&, double);                            \
  template TrainReport train<T>(model::AstGin<T>&, const std::vector<AugmentedSample>&,                            \
                                const std::vector<AugmentedSample>&, const TrainConfig&, const EpochCallback&);    \
  template Predictions predict_all<T>(model::AstGin<T>&, const std::vector<AugmentedSample>&, std::size_t,         \
                                      std::size_t);                                                                \
  template metrics::MetricsReport evaluate<T>(model::AstGin<T>&, const std::vector<AugmentedSample>&, std::size_t); \
  template double mean_squared_error<T>(model::AstGin<T>&, const std::vector<AugmentedSample>&, std::size_t);      \
  template std::vector<PerturbResult> perturb_eval<T>(model::AstGin<T>&, const std::vector<AugmentedSample>&,      \
                                                      const std::vector<double>&, std::uint64_t, std::size_t);

ASTGIN_INSTANTIATE_TRAINER(float)
ASTGIN_INSTANTIATE_TRAINER(double)

#undef ASTGIN_INSTANTIATE_TRAINER

}  // namespace astgin::trainer
