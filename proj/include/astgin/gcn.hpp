#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "astgin/nn/params.hpp"
#include "astgin/nn/tape.hpp"

namespace astgin::gcn {

enum class Activation { relu, sigmoid, tanh, identity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct GcnConfig {
  std::size_t in_dim = 1;
  std::vector<std::size_t> hidden_dims = {64, 64, 64};  // last entry is d_model
  std::vector<Activation> activations = {Activation::relu, Activation::relu, Activation::identity};
  bool bias = false;

  std::size_t layers() const { return hidden_dims.size(); }
  std::size_t out_dim() const { return hidden_dims.empty() ? in_dim : hidden_dims.back(); }
};

void validate(const GcnConfig& config);

template <typename T>
nn::Var<T> activate(nn::Var<T> x, Activation a);

// Weight names are "<prefix>.<layer>.weight" (and ".bias" when enabled).
template <typename T>
void init_params(nn::ParameterStore<T>& store, const GcnConfig& config, std::mt19937_64& rng,
                 const std::string& prefix = "gcn");

// activation(A_hat H W (+ b)). h is [..., N, F_in]; each leading index is an
// independent graph signal sharing the same weights.
template <typename T>
nn::Var<T> gcn_layer(nn::Var<T> a_hat, nn::Var<T> h, nn::Var<T> w, Activation activation,
                     nn::Var<T> bias = {});

// Applies the configured stack to e: [..., N, K] -> [..., N, out_dim].
template <typename T>
nn::Var<T> gcn_forward(nn::Var<T> a_hat, nn::Var<T> e, const GcnConfig& config, nn::ParameterStore<T>& store,
                       const std::string& prefix = "gcn");

}  // namespace astgin::gcn
