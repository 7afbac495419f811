#include "astgin/gcn.hpp"

#include "astgin/error.hpp"
#include "astgin/nn/ops.hpp"

namespace astgin::gcn {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity" || name == "linear") return Activation::identity;
  throw ValidationError("unknown activation '" + name + "' (relu, sigmoid, tanh, identity)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

void validate(const GcnConfig& config) {
  if (config.layers() < 1) throw ValidationError("gcn: at least one layer required");
  if (config.activations.size() != config.layers())
    throw ValidationError("gcn: need one activation per layer (" + std::to_string(config.layers()) + ")");
  if (config.in_dim == 0) throw ValidationError("gcn: input width must be positive");
  for (std::size_t d : config.hidden_dims)
    if (d == 0) throw ValidationError("gcn: layer widths must be positive");
}

template <typename T>
nn::Var<T> activate(nn::Var<T> x, Activation a) {
  switch (a) {
    case Activation::relu: return nn::relu(x);
    case Activation::sigmoid: return nn::sigmoid(x);
    case Activation::tanh: return nn::tanh(x);
    case Activation::identity: return x;
  }
  return x;
}

template <typename T>
void init_params(nn::ParameterStore<T>& store, const GcnConfig& config, std::mt19937_64& rng,
                 const std::string& prefix) {
  validate(config);
  std::size_t in = config.in_dim;
  for (std::size_t l = 0; l < config.layers(); ++l) {
    const std::size_t out = config.hidden_dims[l];
    const std::string base = prefix + "." + std::to_string(l);
    store.add(base + ".weight", {in, out}, nn::ParamKind::weight, nn::glorot_uniform<T>(in, out, rng));
    if (config.bias) store.add(base + ".bias", {out}, nn::ParamKind::bias, std::vector<T>(out, T(0)));
    in = out;
  }
}

template <typename T>
nn::Var<T> gcn_layer(nn::Var<T> a_hat, nn::Var<T> h, nn::Var<T> w, Activation activation, nn::Var<T> bias) {
  if (a_hat.rank() != 2 || a_hat.dim(0) != a_hat.dim(1))
    throw ValidationError("gcn_layer: A_hat must be square, got " + nn::to_string(a_hat.shape()));
  if (h.rank() < 2 || h.dim(h.rank() - 2) != a_hat.dim(0))
    throw ValidationError("gcn_layer: H " + nn::to_string(h.shape()) + " does not match A_hat " +
                          nn::to_string(a_hat.shape()));
  nn::Var<T> hw = nn::matmul(h, w);
  nn::Var<T> z = nn::matmul(a_hat, hw);
  if (bias.valid()) z = nn::add(z, bias);
  return activate(z, activation);
}

template <typename T>
nn::Var<T> gcn_forward(nn::Var<T> a_hat, nn::Var<T> e, const GcnConfig& config, nn::ParameterStore<T>& store,
                       const std::string& prefix) {
  validate(config);
  if (e.rank() < 2 || e.shape().back() != config.in_dim)
    throw ValidationError("gcn_forward: input " + nn::to_string(e.shape()) + " does not end in width " +
                          std::to_string(config.in_dim));
  nn::Tape<T>& tape = e.tape();
  nn::Var<T> h = e;
  for (std::size_t l = 0; l < config.layers(); ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    if (!store.contains(base + ".weight")) throw ValidationError("gcn_forward: missing parameter for layer " + std::to_string(l));
    nn::Var<T> w = tape.parameter(store.get(base + ".weight"));
    nn::Var<T> b;
    if (config.bias) b = tape.parameter(store.get(base + ".bias"));
    h = gcn_layer(a_hat, h, w, config.activations[l], b);
  }
  return h;
}

#define ASTGIN_INSTANTIATE_GCN(T)                                                                              \
  template nn::Var<T> activate<T>(nn::Var<T>, Activation);                                                     \
  template void init_params<T>(nn::ParameterStore<T>&, const GcnConfig&, std::mt19937_64&, const std::string&); \
  template nn::Var<T> gcn_layer<T>(nn::Var<T>, nn::Var<T>, nn::Var<T>, Activation, nn::Var<T>);                \
  template nn::Var<T> gcn_forward<T>(nn::Var<T>, nn::Var<T>, const GcnConfig&, nn::ParameterStore<T>&,         \
                                     const std::string&);

ASTGIN_INSTANTIATE_GCN(float)
ASTGIN_INSTANTIATE_GCN(double)

#undef ASTGIN_INSTANTIATE_GCN

}  // namespace astgin::gcn
