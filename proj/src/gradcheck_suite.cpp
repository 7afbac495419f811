#include "astgin/gradcheck_suite.hpp"

#include <random>

#include "astgin/gcn.hpp"
#include "astgin/graph.hpp"
#include "astgin/informer.hpp"
#include "astgin/model.hpp"
#include "astgin/nn/ops.hpp"
#include "astgin/trainer.hpp"

namespace astgin::gradsuite {

namespace {

using nn::GradCheckResult;
using nn::HostTensor;
using nn::Shape;
using V = nn::Var<double>;
using Tape = nn::Tape<double>;

HostTensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  HostTensor t{std::move(shape), {}};
  t.data.resize(nn::numel(t.shape));
  for (double& v : t.data) v = u(rng);
  return t;
}

std::size_t dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 4) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Contracts an arbitrary tensor with fixed random weights so every output
// entry carries a distinct upstream gradient.
V project(V y, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xabcdefULL);
  HostTensor w = random_tensor(y.shape(), rng);
  return nn::sum(nn::mul(y, y.tape().constant(w.shape, w.data)));
}

using Builder = std::function<V(Tape&, const std::vector<V>&)>;

GradCheckResult check(std::uint64_t seed, std::vector<HostTensor> inputs, Builder build, double h = 1e-5) {
  return nn::grad_check([&](Tape& t, const std::vector<V>& in) { return project(build(t, in), seed); }, inputs, h);
}

// The full model stacks many ReLUs; a 1e-5 stencil occasionally straddles a
// pre-activation zero, where the central difference averages two one-sided
// slopes. The narrower step keeps the stencil on one side while 64-bit
// rounding error stays near 1e-10.
constexpr double kModelStep = 1e-6;

Entry unary(std::string name, V (*op)(V)) {
  return {name, [op](std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            return check(seed, {random_tensor({dim(rng), dim(rng), dim(rng)}, rng, -2.0, 2.0)},
                         [op](Tape&, const std::vector<V>& in) { return op(in[0]); });
          }};
}

informer::InformerConfig micro_informer(std::size_t heads = 1) {
  informer::InformerConfig c;
  c.d_model = 8;
  c.n_heads = heads;
  c.d_ff = 16;
  c.encoder_layers = 2;
  c.decoder_layers = 3;
  c.horizon = 2;
  c.ln_eps = 1e-5;
  return c;
}

// Micro end-to-end model: 2 stations, L = 4, M = 2, d_model = 8, one head.
model::ModelConfig micro_model() {
  model::ModelConfig c;
  c.window = 4;
  c.horizon = 2;
  c.informer = micro_informer(1);
  c.gcn.hidden_dims = {8, 8, 8};
  return c;
}

Matrix micro_a_hat(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 0.9);
  Matrix a(2, 2, 1.0);
  a(0, 1) = a(1, 0) = u(rng);
  return graph::normalize_adjacency(a);
}

std::vector<Entry> build_registry() {
  std::vector<Entry> r;

  r.push_back({"matmul", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t b = dim(rng), m = dim(rng), k = dim(rng), n = dim(rng);
                 return check(seed, {random_tensor({b, m, k}, rng), random_tensor({b, k, n}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::matmul(in[0], in[1]); });
               }});
  r.push_back({"matmul_transpose_b", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t b = dim(rng), m = dim(rng), k = dim(rng), n = dim(rng);
                 return check(seed, {random_tensor({b, m, k}, rng), random_tensor({b, n, k}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::matmul(in[0], in[1], true); });
               }});
  r.push_back({"matmul_broadcast_rhs", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t b = dim(rng), m = dim(rng), k = dim(rng), n = dim(rng);
                 return check(seed, {random_tensor({b, 2, m, k}, rng), random_tensor({k, n}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::matmul(in[0], in[1]); });
               }});
  r.push_back({"matmul_broadcast_lhs", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t b = dim(rng), m = dim(rng), k = dim(rng), n = dim(rng);
                 return check(seed, {random_tensor({m, k}, rng), random_tensor({b, k, n}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::matmul(in[0], in[1]); });
               }});
  for (auto [name, op] : std::vector<std::pair<std::string, V (*)(V, V)>>{
           {"add", nn::add<double>}, {"sub", nn::sub<double>}, {"mul", nn::mul<double>}}) {
    r.push_back({name, [op](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   const std::size_t a = dim(rng), b = dim(rng), c = dim(rng);
                   return check(seed, {random_tensor({a, b, c}, rng), random_tensor({a, b, c}, rng)},
                                [op](Tape&, const std::vector<V>& in) { return op(in[0], in[1]); });
                 }});
    r.push_back({name + "_broadcast", [op](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   const std::size_t a = dim(rng), b = dim(rng), c = dim(rng);
                   return check(seed, {random_tensor({a, b, c}, rng), random_tensor({c}, rng)},
                                [op](Tape&, const std::vector<V>& in) { return op(in[0], in[1]); });
                 }});
  }
  r.push_back({"scale", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 return check(seed, {random_tensor({dim(rng), dim(rng)}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::scale(in[0], -1.7); });
               }});
  r.push_back({"concat", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t a = dim(rng), c = dim(rng), axis = dim(rng, 0, 2);
                 Shape s1{a, 2, c}, s2{a, 2, c};
                 s1[axis] = dim(rng);
                 s2[axis] = dim(rng);
                 return check(seed, {random_tensor(s1, rng), random_tensor(s2, rng)},
                              [axis](Tape&, const std::vector<V>& in) { return nn::concat<double>({in[0], in[1]}, axis); });
               }});
  r.push_back({"slice", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t axis = dim(rng, 0, 2);
                 Shape s{dim(rng), dim(rng), dim(rng)};
                 s[axis] = dim(rng, 2, 5);
                 const std::size_t begin = dim(rng, 0, s[axis] - 1), end = dim(rng, begin + 1, s[axis]);
                 return check(seed, {random_tensor(s, rng)}, [=](Tape&, const std::vector<V>& in) {
                   return nn::slice(in[0], axis, begin, end);
                 });
               }});
  r.push_back({"reshape", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t a = dim(rng), b = dim(rng), c = dim(rng);
                 return check(seed, {random_tensor({a, b, c}, rng)},
                              [=](Tape&, const std::vector<V>& in) { return nn::reshape(in[0], {a * b, c}); });
               }});
  r.push_back({"permute", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 std::vector<std::size_t> perm{0, 1, 2, 3};
                 std::shuffle(perm.begin(), perm.end(), rng);
                 return check(seed, {random_tensor({dim(rng), dim(rng), dim(rng), dim(rng)}, rng)},
                              [perm](Tape&, const std::vector<V>& in) { return nn::permute(in[0], perm); });
               }});
  r.push_back({"transpose", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 return check(seed, {random_tensor({dim(rng), dim(rng), dim(rng)}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::transpose(in[0]); });
               }});
  r.push_back(unary("relu", nn::relu<double>));
  r.push_back(unary("sigmoid", nn::sigmoid<double>));
  r.push_back(unary("tanh", nn::tanh<double>));
  r.push_back(unary("elu", nn::elu<double>));
  r.push_back({"max_pool1d", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 return check(seed, {random_tensor({dim(rng), dim(rng, 1, 7), dim(rng)}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::max_pool1d(in[0]); });
               }});
  r.push_back({"softmax", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 return check(seed, {random_tensor({dim(rng), dim(rng), dim(rng)}, rng, -3.0, 3.0)},
                              [](Tape&, const std::vector<V>& in) { return nn::softmax(in[0]); });
               }});
  r.push_back({"softmax_causal", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t l = dim(rng, 1, 5);
                 return check(seed, {random_tensor({dim(rng), l, l}, rng, -3.0, 3.0)},
                              [](Tape&, const std::vector<V>& in) { return nn::softmax(in[0], true); });
               }});
  r.push_back({"layer_norm", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t d = dim(rng, 2, 6);
                 return check(seed,
                              {random_tensor({dim(rng), dim(rng), d}, rng, -2.0, 2.0), random_tensor({d}, rng),
                               random_tensor({d}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::layer_norm(in[0], in[1], in[2]); });
               }});
  r.push_back({"dropout", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 return check(seed, {random_tensor({dim(rng), dim(rng, 2, 6)}, rng)},
                              [seed](Tape&, const std::vector<V>& in) { return nn::dropout(in[0], 0.3, seed); });
               }});
  r.push_back({"embedding_lookup", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t vocab = dim(rng, 2, 5);
                 std::vector<std::size_t> idx(dim(rng, 1, 6));
                 for (auto& i : idx) i = dim(rng, 0, vocab - 1);
                 return check(seed, {random_tensor({vocab, dim(rng)}, rng)},
                              [idx](Tape&, const std::vector<V>& in) { return nn::embedding_lookup(in[0], idx); });
               }});
  r.push_back({"sum", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 return check(seed, {random_tensor({dim(rng), dim(rng)}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::sum(in[0]); });
               }});
  r.push_back({"mean", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 return check(seed, {random_tensor({dim(rng), dim(rng)}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::mean(in[0]); });
               }});
  r.push_back({"sum_squares", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 return check(seed, {random_tensor({dim(rng), dim(rng)}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::sum_squares(in[0]); });
               }});
  r.push_back({"mse", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t a = dim(rng), b = dim(rng);
                 return check(seed, {random_tensor({a, b}, rng), random_tensor({a, b}, rng)},
                              [](Tape&, const std::vector<V>& in) { return nn::mse(in[0], in[1]); });
               }});

  r.push_back({"gcn_layer", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t n = dim(rng, 2, 5), fin = dim(rng), fout = dim(rng);
                 HostTensor a = random_tensor({n, n}, rng, 0.0, 1.0);
                 Matrix adj(n, n);
                 for (std::size_t i = 0; i < n; ++i)
                   for (std::size_t j = 0; j < n; ++j) adj(i, j) = i == j ? 1.0 : a.data[std::min(i, j) * n + std::max(i, j)];
                 const Matrix norm = graph::normalize_adjacency(adj);
                 return check(seed, {random_tensor({3, n, fin}, rng), random_tensor({fin, fout}, rng)},
                              [norm, n](Tape& t, const std::vector<V>& in) {
                                return gcn::gcn_layer(t.constant({n, n}, norm.data), in[0], in[1],
                                                      gcn::Activation::tanh);
                              });
               }});
  r.push_back({"full_attention", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t b = dim(rng), lq = dim(rng, 1, 6), lk = dim(rng, 1, 6), d = dim(rng, 1, 5);
                 return check(seed,
                              {random_tensor({b, lq, d}, rng), random_tensor({b, lk, d}, rng),
                               random_tensor({b, lk, d}, rng)},
                              [](Tape&, const std::vector<V>& in) {
                                return informer::scaled_dot_attention(in[0], in[1], in[2], false);
                              });
               }});
  r.push_back({"causal_attention", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 const std::size_t b = dim(rng), l = dim(rng, 1, 6), d = dim(rng, 1, 5);
                 return check(seed,
                              {random_tensor({b, l, d}, rng), random_tensor({b, l, d}, rng),
                               random_tensor({b, l, d}, rng)},
                              [](Tape&, const std::vector<V>& in) {
                                return informer::scaled_dot_attention(in[0], in[1], in[2], true);
                              });
               }});
  r.push_back({"prob_sparse_attention", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 // c = 1 keeps u = ceil(ln L) below L so the masked path is exercised.
                 const std::size_t b = dim(rng), l = dim(rng, 5, 9), d = dim(rng, 1, 5);
                 return check(seed,
                              {random_tensor({b, l, d}, rng), random_tensor({b, l, d}, rng),
                               random_tensor({b, l, d}, rng)},
                              [seed](Tape&, const std::vector<V>& in) {
                                return informer::prob_sparse_dot_attention(in[0], in[1], in[2], 1.0, seed);
                              });
               }});
  r.push_back({"multi_head_attention", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 auto cfg = micro_informer(2);
                 nn::ParameterStore<double> store;
                 informer::init_params(store, cfg, rng);
                 const std::size_t l = dim(rng, 2, 6);
                 return check(seed, {random_tensor({2, l, cfg.d_model}, rng)}, [&](Tape&, const std::vector<V>& in) {
                   return informer::multi_head_attention(in[0], in[0], store, "informer.enc.0.attn", cfg,
                                                         informer::AttentionKind::prob_sparse, 0);
                 });
               }});
  r.push_back({"encoder", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 auto cfg = micro_informer(1);
                 cfg.encoder_layers = 1;
                 nn::ParameterStore<double> store;
                 informer::init_params(store, cfg, rng);
                 return check(seed, {random_tensor({2, 5, cfg.d_model}, rng)}, [&](Tape&, const std::vector<V>& in) {
                   return informer::encoder_forward(in[0], cfg, store);
                 });
               }});
  r.push_back({"encoder_distilling", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 auto cfg = micro_informer(2);
                 cfg.distilling = true;
                 nn::ParameterStore<double> store;
                 informer::init_params(store, cfg, rng);
                 return check(seed, {random_tensor({2, 6, cfg.d_model}, rng)}, [&](Tape&, const std::vector<V>& in) {
                   return informer::encoder_forward(in[0], cfg, store);
                 });
               }});
  r.push_back({"decoder", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 auto cfg = micro_informer(1);
                 cfg.decoder_layers = 1;
                 cfg.label_len = 3;
                 nn::ParameterStore<double> store;
                 informer::init_params(store, cfg, rng);
                 return check(seed,
                              {random_tensor({2, cfg.label_len + cfg.horizon, cfg.d_model}, rng),
                               random_tensor({2, 5, cfg.d_model}, rng)},
                              [&](Tape&, const std::vector<V>& in) {
                                return informer::decoder_forward(in[0], in[1], cfg, store);
                              });
               }});
  r.push_back({"informer_forward", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 auto cfg = micro_informer(1);
                 nn::ParameterStore<double> store;
                 informer::init_params(store, cfg, rng);
                 return check(seed, {random_tensor({5, 2, cfg.d_model}, rng)}, [&](Tape&, const std::vector<V>& in) {
                   return informer::informer_forward(in[0], cfg, store);
                 });
               }});
  r.push_back({"model_inputs", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 model::AstGin<double> m(micro_model(), micro_a_hat(rng), seed);
                 const auto& c = m.config();
                 return check(
                     seed, {random_tensor({2, c.window + 1, 2, c.features()}, rng, 0.0, 1.0)},
                     [&](Tape&, const std::vector<V>& in) { return m.forward(in[0]); }, kModelStep);
               }});
  r.push_back({"model_parameters", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 model::AstGin<double> m(micro_model(), micro_a_hat(rng), seed);
                 const auto& c = m.config();
                 const HostTensor e = random_tensor({2, c.window + 1, 2, c.features()}, rng, 0.0, 1.0);
                 const HostTensor y = random_tensor({2, c.horizon, 2}, rng, 0.0, 1.0);
                 return nn::grad_check_params(m.params(), [&](Tape& t) {
                   V pred = m.forward(t.constant(e.shape, e.data));
                   return trainer::loss(t.constant(y.shape, y.data), pred, m.params(), 1.5e-3);
                 }, kModelStep);
               }});
  r.push_back({"l2_penalty", [](std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 nn::ParameterStore<double> store;
                 const std::size_t a = dim(rng), b = dim(rng);
                 store.add("w", {a, b}, nn::ParamKind::weight, random_tensor({a, b}, rng).data);
                 store.add("b", {b}, nn::ParamKind::bias, random_tensor({b}, rng).data);
                 return nn::grad_check_params(store, [&](Tape& t) { return nn::l2_penalty(t, store); });
               }});
  return r;
}

}  // namespace

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = build_registry();
  return entries;
}

std::vector<Outcome> run(std::size_t seeds, double tolerance, const std::string& filter) {
  std::vector<Outcome> out;
  for (const auto& e : registry()) {
    if (!filter.empty() && e.name.find(filter) == std::string::npos) continue;
    Outcome o;
    o.name = e.name;
    for (std::size_t s = 0; s < seeds; ++s) {
      const GradCheckResult r = e.run(s);
      o.max_rel_error = std::max(o.max_rel_error, r.max_rel_error);
      o.coordinates += r.coordinates;
      ++o.seeds;
    }
    o.passed = o.max_rel_error < tolerance;
    out.push_back(o);
  }
  return out;
}

}  // namespace astgin::gradsuite
