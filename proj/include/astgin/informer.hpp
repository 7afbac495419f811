#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "astgin/nn/params.hpp"
#include "astgin/nn/tape.hpp"

namespace astgin::informer {

struct InformerConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 3;
  std::size_t d_ff = 128;
  double sampling_factor = 5.0;
  std::size_t label_len = 0;  // 0 selects ceil(seq_len / 2)
  std::size_t horizon = 1;
  bool distilling = false;
  double dropout = 0.0;
  double ln_eps = 1e-5;
  std::uint64_t sample_seed = 0;  // key sampling, used only when keys > 25
};

void validate(const InformerConfig& config);
std::size_t resolved_label_len(const InformerConfig& config, std::size_t seq_len);

// Weights of one attention map captured for debugging: all heads of the
// first batch element, row-major [head][query][key].
struct AttentionMap {
  std::string name;
  std::size_t heads = 0;
  std::size_t queries = 0;
  std::size_t keys = 0;
  std::vector<double> weights;
};

struct ForwardContext {
  bool training = false;
  std::uint64_t dropout_seed = 0;
  std::vector<AttentionMap>* trace = nullptr;
};

// Parameter names live under "<prefix>.enc.<i>", "<prefix>.dec.<i>",
// "<prefix>.distil.<i>" and "<prefix>.head".
template <typename T>
void init_params(nn::ParameterStore<T>& store, const InformerConfig& config, std::mt19937_64& rng,
                 const std::string& prefix = "informer");

// Sinusoidal table [len, d]: sin at even columns, cos at odd ones.
std::vector<double> positional_encoding(std::size_t len, std::size_t d);

// Number of queries that attend normally: max(1, min(lq, ceil(c ln lq))).
std::size_t active_query_count(std::size_t lq, double c);
// Keys scored per query by the sparsity measure; all of them when lk <= 25.
std::size_t sampled_key_count(std::size_t lk, double c);

// Max-minus-mean of the scaled scores q.k_j / sqrt(dh) for each of the lq
// queries of one head. keys[i] lists the key indices scored for query i.
template <typename T>
std::vector<double> sparsity_measure(const T* q, const T* k, std::size_t lq, std::size_t dh,
                                     const std::vector<std::vector<std::size_t>>& keys);

// Indices of the u largest entries, ascending; ties go to the lower index.
std::vector<std::size_t> select_top_queries(const std::vector<double>& measure, std::size_t u);

// Key subsets for every query of one head: all keys in exact mode, otherwise
// a seeded sample without replacement.
std::vector<std::vector<std::size_t>> key_subsets(std::size_t lq, std::size_t lk, double c, std::uint64_t seed);

// Scaled dot-product attention on head-split tensors [..., L, dh].
template <typename T>
nn::Var<T> scaled_dot_attention(nn::Var<T> q, nn::Var<T> k, nn::Var<T> v, bool causal,
                                std::vector<AttentionMap>* trace = nullptr, const std::string& name = "");

// ProbSparse variant: unselected queries emit the mean of v.
template <typename T>
nn::Var<T> prob_sparse_dot_attention(nn::Var<T> q, nn::Var<T> k, nn::Var<T> v, double c, std::uint64_t seed,
                                     std::vector<AttentionMap>* trace = nullptr, const std::string& name = "");

enum class AttentionKind { full, causal, prob_sparse };

// Projected multi-head attention over [B, L, d] inputs with parameters
// <prefix>.{wq,bq,wk,bk,wv,bv,wo,bo}.
template <typename T>
nn::Var<T> multi_head_attention(nn::Var<T> query_in, nn::Var<T> kv_in, nn::ParameterStore<T>& store,
                                const std::string& prefix, const InformerConfig& config, AttentionKind kind,
                                std::uint64_t seed, const ForwardContext& ctx = {});

// x: [B, S, d] -> [B, S', d] (S' < S only with distilling).
template <typename T>
nn::Var<T> encoder_forward(nn::Var<T> x, const InformerConfig& config, nn::ParameterStore<T>& store,
                           const ForwardContext& ctx = {}, const std::string& prefix = "informer");

// dec_in: [B, label_len + M, d]; enc_out: [B, S', d].
template <typename T>
nn::Var<T> decoder_forward(nn::Var<T> dec_in, nn::Var<T> enc_out, const InformerConfig& config,
                           nn::ParameterStore<T>& store, const ForwardContext& ctx = {},
                           const std::string& prefix = "informer");

// seq: [B, S, N, d] (or [S, N, d]) -> [B, M, N] (or [M, N]). Stations are
// folded into the batch; each runs through the same weights.
template <typename T>
nn::Var<T> informer_forward(nn::Var<T> seq, const InformerConfig& config, nn::ParameterStore<T>& store,
                            const ForwardContext& ctx = {}, const std::string& prefix = "informer");

}  // namespace astgin::informer
