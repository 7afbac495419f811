#include "astgin/model.hpp"

#include <random>

#include "astgin/error.hpp"
#include "astgin/nn/ops.hpp"

namespace astgin::model {

namespace {

// Rethrows with the pipeline stage prepended, keeping the error category.
template <typename F>
auto staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(stage) + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(std::string(stage) + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(stage) + ": " + e.what());
  }
}

}  // namespace

Ablation parse_ablation(const std::string& name) {
  if (name == "full") return Ablation::full;
  if (name == "no_attributes") return Ablation::no_attributes;
  if (name == "no_gcn") return Ablation::no_gcn;
  if (name == "poi_only") return Ablation::poi_only;
  if (name == "weather_only") return Ablation::weather_only;
  throw ValidationError("unknown ablation '" + name + "' (full, no_attributes, no_gcn, poi_only, weather_only)");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_attributes: return "no_attributes";
    case Ablation::no_gcn: return "no_gcn";
    case Ablation::poi_only: return "poi_only";
    case Ablation::weather_only: return "weather_only";
  }
  return "full";
}

a2unit::AttributeMode attribute_mode(Ablation a) {
  switch (a) {
    case Ablation::no_attributes: return a2unit::AttributeMode::none;
    case Ablation::poi_only: return a2unit::AttributeMode::poi_only;
    case Ablation::weather_only: return a2unit::AttributeMode::weather_only;
    case Ablation::full:
    case Ablation::no_gcn: return a2unit::AttributeMode::full;
  }
  return a2unit::AttributeMode::full;
}

std::size_t ModelConfig::features() const {
  switch (attribute_mode(ablation)) {
    case a2unit::AttributeMode::full: return a2unit::feature_width(poi_dims, weather_dims, window);
    case a2unit::AttributeMode::poi_only: return a2unit::feature_width(poi_dims, 0, window);
    case a2unit::AttributeMode::weather_only: return a2unit::feature_width(0, weather_dims, window);
    case a2unit::AttributeMode::none: return 1;
  }
  return 1;
}

ModelConfig finalize(ModelConfig config) {
  if (config.window < 1) throw ValidationError("window length L must be >= 1");
  if (config.horizon < 1) throw ValidationError("horizon M must be >= 1");
  config.gcn.in_dim = config.features();
  if (config.gcn.hidden_dims.empty()) throw ValidationError("gcn: at least one layer required");
  config.gcn.hidden_dims.back() = config.informer.d_model;
  config.informer.horizon = config.horizon;
  gcn::validate(config.gcn);
  informer::validate(config.informer);
  informer::resolved_label_len(config.informer, config.window + 1);
  return config;
}

template <typename T>
AstGin<T>::AstGin(const ModelConfig& config, const Matrix& a_hat, std::uint64_t seed)
    : config_(finalize(config)), a_hat_(a_hat) {
  if (a_hat_.rows == 0 || a_hat_.rows != a_hat_.cols) throw ValidationError("model: A_hat must be square and nonempty");
  std::mt19937_64 rng(seed);
  if (config_.ablation == Ablation::no_gcn) {
    const std::size_t k = config_.features(), d = config_.informer.d_model;
    params_.add("proj.weight", {k, d}, nn::ParamKind::weight, nn::glorot_uniform<T>(k, d, rng));
    params_.add("proj.bias", {d}, nn::ParamKind::bias, std::vector<T>(d, T(0)));
  } else {
    gcn::init_params(params_, config_.gcn, rng);
  }
  informer::init_params(params_, config_.informer, rng);
}

template <typename T>
AstGin<T>::AstGin(const ModelConfig& config, const Matrix& a_hat, nn::ParameterStore<T> params)
    : AstGin(config, a_hat, std::uint64_t{0}) {
  if (params.size() != params_.size())
    throw ValidationError("model: parameter set holds " + std::to_string(params.size()) + " entries, expected " +
                          std::to_string(params_.size()));
  for (auto& p : params_) {
    if (!params.contains(p.name)) throw ValidationError("model: missing parameter '" + p.name + "'");
    const auto& q = params.get(p.name);
    if (q.shape != p.shape)
      throw ValidationError("model: parameter '" + p.name + "' has shape " + nn::to_string(q.shape) + ", expected " +
                            nn::to_string(p.shape));
    p.value = q.value;
  }
}

template <typename T>
nn::Var<T> AstGin<T>::forward(nn::Var<T> e, const informer::ForwardContext& ctx) {
  nn::Tape<T>& tape = e.tape();
  const std::size_t n = stations();
  staged("a2unit", [&] {
    if (e.rank() != 4 || e.dim(1) != config_.window + 1 || e.dim(2) != n || e.dim(3) != config_.features())
      throw ValidationError("expected input [B, " + std::to_string(config_.window + 1) + ", " + std::to_string(n) +
                            ", " + std::to_string(config_.features()) + "], got " + nn::to_string(e.shape()));
    return 0;
  });
  nn::Var<T> h = staged("gcn", [&] {
    if (config_.ablation == Ablation::no_gcn)
      return nn::add(nn::matmul(e, tape.parameter(params_.get("proj.weight"))),
                     tape.parameter(params_.get("proj.bias")));
    nn::Var<T> a = tape.constant({n, n}, std::vector<T>(a_hat_.data.begin(), a_hat_.data.end()));
    return gcn::gcn_forward(a, e, config_.gcn, params_);
  });
  return staged("informer", [&] { return informer::informer_forward(h, config_.informer, params_, ctx); });
}

template <typename T>
nn::Var<T> AstGin<T>::forward(nn::Tape<T>& tape, std::span<const a2unit::AugmentedSample* const> batch,
                              const informer::ForwardContext& ctx) {
  return forward(staged("a2unit", [&] { return batch_input(tape, batch); }), ctx);
}

template <typename T>
Matrix AstGin<T>::predict(const a2unit::AugmentedSample& sample, std::vector<informer::AttentionMap>* trace) {
  nn::Tape<T> tape;
  nn::NoGradGuard<T> guard(tape);
  const a2unit::AugmentedSample* one[] = {&sample};
  informer::ForwardContext ctx;
  ctx.trace = trace;
  nn::Var<T> y = forward(tape, one, ctx);
  Matrix out(config_.horizon, stations());
  auto v = y.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<double>(v[i]);
  return out;
}

template <typename T>
nn::Var<T> batch_input(nn::Tape<T>& tape, std::span<const a2unit::AugmentedSample* const> batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  const Tensor3& first = batch.front()->e;
  std::vector<T> data;
  data.reserve(batch.size() * first.data.size());
  for (const auto* s : batch) {
    if (s->e.d0 != first.d0 || s->e.d1 != first.d1 || s->e.d2 != first.d2)
      throw ValidationError("batch samples differ in shape");
    data.insert(data.end(), s->e.data.begin(), s->e.data.end());
  }
  return tape.constant({batch.size(), first.d0, first.d1, first.d2}, std::move(data));
}

template <typename T>
nn::Var<T> batch_target(nn::Tape<T>& tape, std::span<const a2unit::AugmentedSample* const> batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  const Matrix& first = batch.front()->y;
  std::vector<T> data;
  data.reserve(batch.size() * first.data.size());
  for (const auto* s : batch) {
    if (s->y.rows != first.rows || s->y.cols != first.cols) throw ValidationError("batch targets differ in shape");
    data.insert(data.end(), s->y.data.begin(), s->y.data.end());
  }
  return tape.constant({batch.size(), first.rows, first.cols}, std::move(data));
}

template class AstGin<float>;
template class AstGin<double>;
template nn::Var<float> batch_input<float>(nn::Tape<float>&, std::span<const a2unit::AugmentedSample* const>);
template nn::Var<double> batch_input<double>(nn::Tape<double>&, std::span<const a2unit::AugmentedSample* const>);
template nn::Var<float> batch_target<float>(nn::Tape<float>&, std::span<const a2unit::AugmentedSample* const>);
template nn::Var<double> batch_target<double>(nn::Tape<double>&, std::span<const a2unit::AugmentedSample* const>);

}  // namespace astgin::model
