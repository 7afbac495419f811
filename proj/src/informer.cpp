#include "astgin/informer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "astgin/error.hpp"
#include "astgin/nn/ops.hpp"

namespace astgin::informer {

namespace {

constexpr std::size_t kExactMeasureMaxKeys = 25;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename T>
void add_linear(nn::ParameterStore<T>& store, const std::string& w, const std::string& b, std::size_t in,
                std::size_t out, std::mt19937_64& rng) {
  store.add(w, {in, out}, nn::ParamKind::weight, nn::glorot_uniform<T>(in, out, rng));
  store.add(b, {out}, nn::ParamKind::bias, std::vector<T>(out, T(0)));
}

template <typename T>
void add_attention(nn::ParameterStore<T>& store, const std::string& p, std::size_t d, std::mt19937_64& rng) {
  for (const char* m : {"q", "k", "v", "o"}) add_linear(store, p + ".w" + m, p + ".b" + m, d, d, rng);
}

template <typename T>
void add_norm(nn::ParameterStore<T>& store, const std::string& p, std::size_t d) {
  store.add(p + ".gamma", {d}, nn::ParamKind::norm, std::vector<T>(d, T(1)));
  store.add(p + ".beta", {d}, nn::ParamKind::norm, std::vector<T>(d, T(0)));
}

template <typename T>
void add_ffn(nn::ParameterStore<T>& store, const std::string& p, std::size_t d, std::size_t d_ff,
             std::mt19937_64& rng) {
  add_linear(store, p + ".w1", p + ".b1", d, d_ff, rng);
  add_linear(store, p + ".w2", p + ".b2", d_ff, d, rng);
}

template <typename T>
nn::Var<T> param(nn::Tape<T>& tape, nn::ParameterStore<T>& store, const std::string& name) {
  return tape.parameter(store.get(name));
}

template <typename T>
nn::Var<T> linear(nn::Var<T> x, nn::ParameterStore<T>& store, const std::string& w, const std::string& b) {
  nn::Tape<T>& tape = x.tape();
  return nn::add(nn::matmul(x, param(tape, store, w)), param(tape, store, b));
}

template <typename T>
nn::Var<T> norm(nn::Var<T> x, nn::ParameterStore<T>& store, const std::string& p, double eps) {
  nn::Tape<T>& tape = x.tape();
  return nn::layer_norm(x, param(tape, store, p + ".gamma"), param(tape, store, p + ".beta"), eps);
}

template <typename T>
nn::Var<T> maybe_dropout(nn::Var<T> x, const InformerConfig& config, const ForwardContext& ctx,
                         std::uint64_t site) {
  if (!ctx.training || config.dropout <= 0.0) return x;
  return nn::dropout(x, config.dropout, mix(ctx.dropout_seed, site));
}

template <typename T>
nn::Var<T> ffn(nn::Var<T> x, nn::ParameterStore<T>& store, const std::string& p) {
  return linear(nn::relu(linear(x, store, p + ".w1", p + ".b1")), store, p + ".w2", p + ".b2");
}

// [B, L, d] -> [B, H, L, d / H]
template <typename T>
nn::Var<T> split_heads(nn::Var<T> x, std::size_t heads) {
  const std::size_t b = x.dim(0), len = x.dim(1), d = x.dim(2);
  return nn::permute(nn::reshape(x, {b, len, heads, d / heads}), {0, 2, 1, 3});
}

template <typename T>
nn::Var<T> merge_heads(nn::Var<T> x) {
  const std::size_t b = x.dim(0), heads = x.dim(1), len = x.dim(2), dh = x.dim(3);
  return nn::reshape(nn::permute(x, {0, 2, 1, 3}), {b, len, heads * dh});
}

template <typename T>
void capture(std::vector<AttentionMap>* trace, const std::string& name, nn::Var<T> weights) {
  if (trace == nullptr) return;
  const std::size_t r = weights.rank();
  AttentionMap map;
  map.name = name;
  map.queries = weights.dim(r - 2);
  map.keys = weights.dim(r - 1);
  map.heads = r >= 3 ? weights.dim(r - 3) : 1;
  const std::size_t count = map.heads * map.queries * map.keys;
  auto w = weights.value();
  map.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(count));
  trace->push_back(std::move(map));
}

template <typename T>
void check_qkv(const char* op, nn::Var<T> q, nn::Var<T> k, nn::Var<T> v) {
  const std::size_t r = q.rank();
  if (r < 2 || k.rank() != r || v.rank() != r)
    throw ValidationError(std::string(op) + ": q, k, v must share a rank >= 2");
  const auto& sq = q.shape();
  const auto& sk = k.shape();
  const auto& sv = v.shape();
  if (!std::equal(sq.begin(), sq.end() - 2, sk.begin()) || sk != sv || sq.back() != sk.back())
    throw ValidationError(std::string(op) + ": incompatible shapes " + nn::to_string(sq) + ", " + nn::to_string(sk) +
                          ", " + nn::to_string(sv));
}

}  // namespace

void validate(const InformerConfig& config) {
  if (config.d_model == 0 || config.n_heads == 0) throw ValidationError("informer: d_model and n_heads must be positive");
  if (config.d_model % config.n_heads != 0)
    throw ValidationError("informer: d_model " + std::to_string(config.d_model) + " is not divisible by n_heads " +
                          std::to_string(config.n_heads));
  if (config.encoder_layers == 0 || config.decoder_layers == 0)
    throw ValidationError("informer: at least one encoder and one decoder layer required");
  if (config.d_ff == 0) throw ValidationError("informer: d_ff must be positive");
  if (!(config.sampling_factor > 0.0)) throw ValidationError("informer: sampling factor must be positive");
  if (config.horizon == 0) throw ValidationError("informer: horizon must be at least 1");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw ValidationError("informer: dropout must be in [0, 1)");
  if (!(config.ln_eps > 0.0)) throw ValidationError("informer: layer norm eps must be positive");
}

std::size_t resolved_label_len(const InformerConfig& config, std::size_t seq_len) {
  const std::size_t label = config.label_len == 0 ? (seq_len + 1) / 2 : config.label_len;
  if (label > seq_len)
    throw ValidationError("informer: label_len " + std::to_string(label) + " exceeds input length " +
                          std::to_string(seq_len));
  return label;
}

template <typename T>
void init_params(nn::ParameterStore<T>& store, const InformerConfig& config, std::mt19937_64& rng,
                 const std::string& prefix) {
  validate(config);
  const std::size_t d = config.d_model;
  for (std::size_t i = 0; i < config.encoder_layers; ++i) {
    const std::string p = prefix + ".enc." + std::to_string(i);
    add_attention(store, p + ".attn", d, rng);
    add_norm(store, p + ".ln1", d);
    add_ffn(store, p + ".ffn", d, config.d_ff, rng);
    add_norm(store, p + ".ln2", d);
  }
  if (config.distilling)
    for (std::size_t i = 0; i + 1 < config.encoder_layers; ++i) {
      const std::string p = prefix + ".distil." + std::to_string(i);
      add_linear(store, p + ".conv", p + ".conv_bias", 3 * d, d, rng);
      add_norm(store, p + ".ln", d);
    }
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    const std::string p = prefix + ".dec." + std::to_string(i);
    add_attention(store, p + ".self_attn", d, rng);
    add_norm(store, p + ".ln1", d);
    add_attention(store, p + ".cross_attn", d, rng);
    add_norm(store, p + ".ln2", d);
    add_ffn(store, p + ".ffn", d, config.d_ff, rng);
    add_norm(store, p + ".ln3", d);
  }
  add_linear(store, prefix + ".head.weight", prefix + ".head.bias", d, 1, rng);
}

std::vector<double> positional_encoding(std::size_t len, std::size_t d) {
  std::vector<double> pe(len * d);
  for (std::size_t pos = 0; pos < len; ++pos)
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * freq;
      pe[pos * d + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

std::size_t active_query_count(std::size_t lq, double c) {
  if (!(c > 0.0)) throw ValidationError("prob_sparse_attention: sampling factor must be positive");
  if (lq == 0) return 0;
  const double u = std::ceil(c * std::log(static_cast<double>(lq)));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(u, 1.0)), 1, lq);
}

std::size_t sampled_key_count(std::size_t lk, double c) {
  if (!(c > 0.0)) throw ValidationError("prob_sparse_attention: sampling factor must be positive");
  if (lk <= kExactMeasureMaxKeys) return lk;
  const double n = std::ceil(c * std::log(static_cast<double>(lk)));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(n, 1.0)), 1, lk);
}

std::vector<std::vector<std::size_t>> key_subsets(std::size_t lq, std::size_t lk, double c, std::uint64_t seed) {
  const std::size_t count = sampled_key_count(lk, c);
  std::vector<std::size_t> all(lk);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> out(lq);
  if (count == lk) {
    for (auto& s : out) s = all;
    return out;
  }
  std::mt19937_64 rng(seed);
  for (auto& s : out) {
    std::vector<std::size_t> pool = all;
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, lk - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    s.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(s.begin(), s.end());
  }
  return out;
}

template <typename T>
std::vector<double> sparsity_measure(const T* q, const T* k, std::size_t lq, std::size_t dh,
                                     const std::vector<std::vector<std::size_t>>& keys) {
  if (keys.size() != lq) throw ValidationError("sparsity_measure: need one key subset per query");
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> out(lq);
  for (std::size_t i = 0; i < lq; ++i) {
    if (keys[i].empty()) throw ValidationError("sparsity_measure: empty key subset");
    double mx = -INFINITY, total = 0.0;
    for (std::size_t j : keys[i]) {
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += static_cast<double>(q[i * dh + c]) * static_cast<double>(k[j * dh + c]);
      s *= inv;
      mx = std::max(mx, s);
      total += s;
    }
    out[i] = mx - total / static_cast<double>(keys[i].size());
  }
  return out;
}

std::vector<std::size_t> select_top_queries(const std::vector<double>& measure, std::size_t u) {
  std::vector<std::size_t> order(measure.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return measure[a] > measure[b]; });
  order.resize(std::min(u, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

template <typename T>
nn::Var<T> scaled_dot_attention(nn::Var<T> q, nn::Var<T> k, nn::Var<T> v, bool causal,
                                std::vector<AttentionMap>* trace, const std::string& name) {
  check_qkv("full_attention", q, k, v);
  const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(q.shape().back())));
  nn::Var<T> weights = nn::softmax(nn::scale(nn::matmul(q, k, true), inv), causal);
  capture(trace, name, weights);
  return nn::matmul(weights, v);
}

template <typename T>
nn::Var<T> prob_sparse_dot_attention(nn::Var<T> q, nn::Var<T> k, nn::Var<T> v, double c, std::uint64_t seed,
                                     std::vector<AttentionMap>* trace, const std::string& name) {
  check_qkv("prob_sparse_attention", q, k, v);
  const std::size_t r = q.rank();
  const std::size_t lq = q.dim(r - 2), lk = k.dim(r - 2), dh = q.dim(r - 1);
  if (lq != lk) throw ValidationError("prob_sparse_attention: self-attention needs equal query and key lengths");
  // No shortcut when u >= lq: the selection path must reduce to full
  // attention on its own.
  const std::size_t u = active_query_count(lq, c);

  nn::Tape<T>& tape = q.tape();
  const std::size_t blocks = q.numel() / (lq * dh);
  std::vector<T> mask(blocks * lq * lk, T(0));
  auto qv = q.value();
  auto kv = k.value();
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto keys = key_subsets(lq, lk, c, mix(seed, b));
    const auto measure = sparsity_measure(qv.data() + b * lq * dh, kv.data() + b * lk * dh, lq, dh, keys);
    for (std::size_t i : select_top_queries(measure, u))
      std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>((b * lq + i) * lk), lk, T(1));
  }
  nn::Shape mask_shape(q.shape().begin(), q.shape().end() - 1);
  mask_shape.push_back(lk);
  const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  nn::Var<T> scores = nn::scale(nn::matmul(q, k, true), inv);
  // Zeroed rows give uniform weights, so unselected queries emit mean(V).
  nn::Var<T> weights = nn::softmax(nn::mul(scores, tape.constant(mask_shape, std::move(mask))));
  capture(trace, name, weights);
  return nn::matmul(weights, v);
}

template <typename T>
nn::Var<T> multi_head_attention(nn::Var<T> query_in, nn::Var<T> kv_in, nn::ParameterStore<T>& store,
                                const std::string& prefix, const InformerConfig& config, AttentionKind kind,
                                std::uint64_t seed, const ForwardContext& ctx) {
  if (query_in.rank() != 3 || kv_in.rank() != 3 || query_in.dim(0) != kv_in.dim(0) ||
      query_in.dim(2) != config.d_model || kv_in.dim(2) != config.d_model)
    throw ValidationError("attention '" + prefix + "': expected [B, L, " + std::to_string(config.d_model) +
                          "] inputs, got " + nn::to_string(query_in.shape()) + " and " + nn::to_string(kv_in.shape()));
  const std::size_t h = config.n_heads;
  nn::Var<T> q = split_heads(linear(query_in, store, prefix + ".wq", prefix + ".bq"), h);
  nn::Var<T> k = split_heads(linear(kv_in, store, prefix + ".wk", prefix + ".bk"), h);
  nn::Var<T> v = split_heads(linear(kv_in, store, prefix + ".wv", prefix + ".bv"), h);
  nn::Var<T> o;
  if (kind == AttentionKind::prob_sparse)
    o = prob_sparse_dot_attention(q, k, v, config.sampling_factor, seed, ctx.trace, prefix);
  else
    o = scaled_dot_attention(q, k, v, kind == AttentionKind::causal, ctx.trace, prefix);
  return linear(merge_heads(o), store, prefix + ".wo", prefix + ".bo");
}

namespace {

// Circular conv (kernel 3) -> norm -> ELU -> max pool halving the length.
template <typename T>
nn::Var<T> distil(nn::Var<T> x, nn::ParameterStore<T>& store, const std::string& p, double eps) {
  const std::size_t len = x.dim(1);
  nn::Var<T> prev = len > 1 ? nn::concat<T>({nn::slice(x, 1, len - 1, len), nn::slice(x, 1, 0, len - 1)}, 1) : x;
  nn::Var<T> next = len > 1 ? nn::concat<T>({nn::slice(x, 1, 1, len), nn::slice(x, 1, 0, 1)}, 1) : x;
  nn::Var<T> conv = linear(nn::concat<T>({prev, x, next}, 2), store, p + ".conv", p + ".conv_bias");
  return nn::max_pool1d(nn::elu(norm(conv, store, p + ".ln", eps)));
}

}  // namespace

template <typename T>
nn::Var<T> encoder_forward(nn::Var<T> x, const InformerConfig& config, nn::ParameterStore<T>& store,
                           const ForwardContext& ctx, const std::string& prefix) {
  validate(config);
  if (x.rank() != 3 || x.dim(2) != config.d_model)
    throw ValidationError("encoder: expected [B, S, " + std::to_string(config.d_model) + "], got " +
                          nn::to_string(x.shape()));
  for (std::size_t i = 0; i < config.encoder_layers; ++i) {
    const std::string p = prefix + ".enc." + std::to_string(i);
    nn::Var<T> a = multi_head_attention(x, x, store, p + ".attn", config, AttentionKind::prob_sparse,
                                        mix(config.sample_seed, i), ctx);
    x = norm(nn::add(x, maybe_dropout(a, config, ctx, 100 + 2 * i)), store, p + ".ln1", config.ln_eps);
    nn::Var<T> f = ffn(x, store, p + ".ffn");
    x = norm(nn::add(x, maybe_dropout(f, config, ctx, 101 + 2 * i)), store, p + ".ln2", config.ln_eps);
    if (config.distilling && i + 1 < config.encoder_layers)
      x = distil(x, store, prefix + ".distil." + std::to_string(i), config.ln_eps);
  }
  return x;
}

template <typename T>
nn::Var<T> decoder_forward(nn::Var<T> dec_in, nn::Var<T> enc_out, const InformerConfig& config,
                           nn::ParameterStore<T>& store, const ForwardContext& ctx, const std::string& prefix) {
  validate(config);
  if (dec_in.rank() != 3 || dec_in.dim(2) != config.d_model)
    throw ValidationError("decoder: expected [B, label_len + M, " + std::to_string(config.d_model) + "], got " +
                          nn::to_string(dec_in.shape()));
  if (config.label_len != 0 && dec_in.dim(1) != config.label_len + config.horizon)
    throw ValidationError("decoder: input length " + std::to_string(dec_in.dim(1)) + " != label_len + M = " +
                          std::to_string(config.label_len + config.horizon));
  if (dec_in.dim(1) <= config.horizon)
    throw ValidationError("decoder: input length " + std::to_string(dec_in.dim(1)) +
                          " leaves no label steps before the " + std::to_string(config.horizon) + " placeholders");
  nn::Var<T> x = dec_in;
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    const std::string p = prefix + ".dec." + std::to_string(i);
    nn::Var<T> s = multi_head_attention(x, x, store, p + ".self_attn", config, AttentionKind::causal, 0, ctx);
    x = norm(nn::add(x, maybe_dropout(s, config, ctx, 200 + 3 * i)), store, p + ".ln1", config.ln_eps);
    nn::Var<T> c = multi_head_attention(x, enc_out, store, p + ".cross_attn", config, AttentionKind::full, 0, ctx);
    x = norm(nn::add(x, maybe_dropout(c, config, ctx, 201 + 3 * i)), store, p + ".ln2", config.ln_eps);
    nn::Var<T> f = ffn(x, store, p + ".ffn");
    x = norm(nn::add(x, maybe_dropout(f, config, ctx, 202 + 3 * i)), store, p + ".ln3", config.ln_eps);
  }
  return x;
}

template <typename T>
nn::Var<T> informer_forward(nn::Var<T> seq, const InformerConfig& config, nn::ParameterStore<T>& store,
                            const ForwardContext& ctx, const std::string& prefix) {
  validate(config);
  const bool unbatched = seq.rank() == 3;
  if (unbatched) seq = nn::reshape(seq, {1, seq.dim(0), seq.dim(1), seq.dim(2)});
  if (seq.rank() != 4 || seq.dim(3) != config.d_model)
    throw ValidationError("informer: expected [B, S, N, " + std::to_string(config.d_model) + "], got " +
                          nn::to_string(seq.shape()));
  nn::Tape<T>& tape = seq.tape();
  const std::size_t b = seq.dim(0), s = seq.dim(1), n = seq.dim(2), d = seq.dim(3), m = config.horizon;
  const std::size_t label = resolved_label_len(config, s);

  nn::Var<T> x = nn::reshape(nn::permute(seq, {0, 2, 1, 3}), {b * n, s, d});
  auto pe = [&](std::size_t len) {
    const auto table = positional_encoding(len, d);
    return tape.constant({len, d}, std::vector<T>(table.begin(), table.end()));
  };
  nn::Var<T> enc = encoder_forward(nn::add(x, pe(s)), config, store, ctx, prefix);

  nn::Var<T> start = nn::slice(x, 1, s - label, s);
  nn::Var<T> zeros = tape.constant({b * n, m, d}, std::vector<T>(b * n * m * d, T(0)));
  nn::Var<T> dec_in = nn::add(nn::concat<T>({start, zeros}, 1), pe(label + m));
  InformerConfig dec_config = config;
  dec_config.label_len = label;
  nn::Var<T> dec = decoder_forward(dec_in, enc, dec_config, store, ctx, prefix);

  nn::Var<T> tail = nn::slice(dec, 1, label, label + m);
  nn::Var<T> y = linear(tail, store, prefix + ".head.weight", prefix + ".head.bias");
  y = nn::permute(nn::reshape(y, {b, n, m}), {0, 2, 1});
  if (unbatched) y = nn::reshape(y, {m, n});
  return y;
}

#define ASTGIN_INSTANTIATE_INFORMER(T)                                                                            \
  template void init_params<T>(nn::ParameterStore<T>&, const InformerConfig&, std::mt19937_64&,                  \
                               const std::string&);                                                              \
  template std::vector<double> sparsity_measure<T>(const T*, const T*, std::size_t, std::size_t,                 \
                                                   const std::vector<std::vector<std::size_t>>&);                \
  template nn::Var<T> scaled_dot_attention<T>(nn::Var<T>, nn::Var<T>, nn::Var<T>, bool,                          \
                                              std::vector<AttentionMap>*, const std::string&);                   \
  template nn::Var<T> prob_sparse_dot_attention<T>(nn::Var<T>, nn::Var<T>, nn::Var<T>, double, std::uint64_t,    \
                                                   std::vector<AttentionMap>*, const std::string&);              \
  template nn::Var<T> multi_head_attention<T>(nn::Var<T>, nn::Var<T>, nn::ParameterStore<T>&, const std::string&, \
                                              const InformerConfig&, AttentionKind, std::uint64_t,               \
                                              const ForwardContext&);                                            \
  template nn::Var<T> encoder_forward<T>(nn::Var<T>, const InformerConfig&, nn::ParameterStore<T>&,              \
                                         const ForwardContext&, const std::string&);                             \
  template nn::Var<T> decoder_forward<T>(nn::Var<T>, nn::Var<T>, const InformerConfig&, nn::ParameterStore<T>&,  \
                                         const ForwardContext&, const std::string&);                             \
  template nn::Var<T> informer_forward<T>(nn::Var<T>, const InformerConfig&, nn::ParameterStore<T>&,             \
                                          const ForwardContext&, const std::string&);

ASTGIN_INSTANTIATE_INFORMER(float)
ASTGIN_INSTANTIATE_INFORMER(double)

#undef ASTGIN_INSTANTIATE_INFORMER

}  // namespace astgin::informer
