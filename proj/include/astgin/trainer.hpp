#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "astgin/a2unit.hpp"
#include "astgin/ingest.hpp"
#include "astgin/metrics.hpp"
#include "astgin/model.hpp"
#include "astgin/nn/params.hpp"
#include "astgin/nn/tape.hpp"

namespace astgin::trainer {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  double lr0 = 1e-4;
  double lr_decay = 0.1;         // multiplier applied every lr_decay_every epochs
  std::size_t lr_decay_every = 2;
  double lambda = 1.5e-3;
  std::size_t patience = 5;      // 0 disables early stopping
  std::uint64_t seed = 0;
  bool checked = false;          // NaN/Inf anywhere throws NumericalError
  std::size_t threads = 0;       // evaluation workers; 0 reads ASTGIN_THREADS
};

void validate(const TrainConfig& config);

inline constexpr double kMinLearningRate = 1e-8;

// lr0 * factor^floor(epoch / decay_every), never below kMinLearningRate.
double lr_at(std::size_t epoch, double lr0, std::size_t decay_every = 2, double factor = 0.1);

// Worker count: `requested` when nonzero, otherwise ASTGIN_THREADS capped by
// the hardware, otherwise the hardware concurrency.
std::size_t resolve_threads(std::size_t requested);

// MSE over every entry plus lambda times the L2 weight penalty.
template <typename T>
nn::Var<T> loss(nn::Var<T> y, nn::Var<T> y_hat, nn::ParameterStore<T>& store, double lambda);

// Tracks the best validation loss; a strictly lower loss counts as an
// improvement. With patience p > 0, stops after p epochs without one.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  // Returns true when `val_loss` improves on the best so far.
  bool update(std::size_t epoch, double val_loss);
  bool should_stop() const { return patience_ > 0 && since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_loss_ = 0.0;
  bool seen_ = false;
  std::size_t since_best_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean batch MSE (data term)
  double val_loss = 0.0;    // validation MSE
  double lr = 0.0;
};

struct TrainReport {
  std::string ablation;
  std::size_t horizon = 1;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
  bool has_test = false;
  metrics::MetricsReport test_metrics;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

std::string to_json(const TrainReport& report);
std::string to_json(const metrics::MetricsReport& report);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Minibatch Adam over the seeded shuffled train split. The model holds the
// best-validation parameters on return.
template <typename T>
TrainReport train(model::AstGin<T>& model, const std::vector<a2unit::AugmentedSample>& train_set,
                  const std::vector<a2unit::AugmentedSample>& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct Predictions {
  std::size_t steps = 0;     // M
  std::size_t stations = 0;  // N
  std::vector<std::size_t> starts;
  std::vector<double> y;      // samples x M x N
  std::vector<double> y_hat;  // same layout
};

// Raw predictions in sample order; workers fill fixed slots so the result
// does not depend on the thread count.
template <typename T>
Predictions predict_all(model::AstGin<T>& model, const std::vector<a2unit::AugmentedSample>& samples,
                        std::size_t threads = 0, std::size_t batch_size = 32);

template <typename T>
metrics::MetricsReport evaluate(model::AstGin<T>& model, const std::vector<a2unit::AugmentedSample>& samples,
                                std::size_t threads = 0);

// Mean squared error over the samples (the validation loss).
template <typename T>
double mean_squared_error(model::AstGin<T>& model, const std::vector<a2unit::AugmentedSample>& samples,
                          std::size_t threads = 0);

// Copies of `samples` with the availability block replaced by
// clamp(x + sigma * z, 0, 1). z is a standard normal drawn from `seed` in a
// fixed order, so every sigma sees the same z.
std::vector<a2unit::AugmentedSample> perturb(const std::vector<a2unit::AugmentedSample>& samples, double sigma,
                                             std::uint64_t seed);

struct PerturbResult {
  double sigma = 0.0;
  metrics::MetricsReport report;
};

template <typename T>
std::vector<PerturbResult> perturb_eval(model::AstGin<T>& model, const std::vector<a2unit::AugmentedSample>& samples,
                                        const std::vector<double>& sigmas, std::uint64_t seed,
                                        std::size_t threads = 0);

// Repeats the last observed step M times.
Predictions persistence(const std::vector<a2unit::AugmentedSample>& samples);

// Per-station, per-time-of-day means of every step covered by the train
// split; stations without data in a slot fall back to their overall mean.
class HistoricalAverage {
 public:
  HistoricalAverage(const std::vector<a2unit::AugmentedSample>& train_set, const ingest::TimeGrid& grid);
  Predictions predict(const std::vector<a2unit::AugmentedSample>& samples) const;

 private:
  ingest::TimeGrid grid_;
  std::size_t stations_ = 0;
  std::vector<double> slot_mean_;  // N x 48, NaN when empty
  std::vector<double> station_mean_;
};

metrics::MetricsReport score(const Predictions& p);

std::map<std::string, metrics::MetricsReport> baselines(const std::vector<a2unit::AugmentedSample>& train_set,
                                                        const std::vector<a2unit::AugmentedSample>& test_set,
                                                        const ingest::TimeGrid& grid);

}  // namespace astgin::trainer
