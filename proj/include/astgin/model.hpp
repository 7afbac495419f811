#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "astgin/a2unit.hpp"
#include "astgin/gcn.hpp"
#include "astgin/informer.hpp"
#include "astgin/matrix.hpp"
#include "astgin/nn/params.hpp"
#include "astgin/nn/tape.hpp"

namespace astgin::model {

enum class Ablation { full, no_attributes, no_gcn, poi_only, weather_only };

Ablation parse_ablation(const std::string& name);
std::string to_string(Ablation a);
// Attribute blocks the ablation feeds into the augmented matrix.
a2unit::AttributeMode attribute_mode(Ablation a);

struct ModelConfig {
  std::size_t window = 11;  // L; inputs span L + 1 steps
  std::size_t horizon = 1;  // M
  std::size_t poi_dims = 8;
  std::size_t weather_dims = 1;
  Ablation ablation = Ablation::full;
  gcn::GcnConfig gcn;
  informer::InformerConfig informer;

  // Width K of one augmented row under the current ablation.
  std::size_t features() const;
};

// Derives gcn.in_dim, the final GCN width and informer.horizon from the
// rest of the config, then validates everything.
ModelConfig finalize(ModelConfig config);

// A2Unit -> GCN (or a per-station projection under no_gcn) -> Informer.
template <typename T>
class AstGin {
 public:
  AstGin(const ModelConfig& config, const Matrix& a_hat, std::uint64_t seed);
  AstGin(const ModelConfig& config, const Matrix& a_hat, nn::ParameterStore<T> params);

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore<T>& params() { return params_; }
  const nn::ParameterStore<T>& params() const { return params_; }
  const Matrix& a_hat() const { return a_hat_; }
  std::size_t stations() const { return a_hat_.rows; }

  // e: [B, L+1, N, K] -> [B, M, N].
  nn::Var<T> forward(nn::Var<T> e, const informer::ForwardContext& ctx = {});
  nn::Var<T> forward(nn::Tape<T>& tape, std::span<const a2unit::AugmentedSample* const> batch,
                     const informer::ForwardContext& ctx = {});

  // M x N raw predictions.
  Matrix predict(const a2unit::AugmentedSample& sample, std::vector<informer::AttentionMap>* trace = nullptr);

 private:
  ModelConfig config_;
  Matrix a_hat_;
  nn::ParameterStore<T> params_;
};

// Stacks sample inputs into a [B, L+1, N, K] constant.
template <typename T>
nn::Var<T> batch_input(nn::Tape<T>& tape, std::span<const a2unit::AugmentedSample* const> batch);

// Stacks targets into a [B, M, N] constant.
template <typename T>
nn::Var<T> batch_target(nn::Tape<T>& tape, std::span<const a2unit::AugmentedSample* const> batch);

}  // namespace astgin::model
