#include <doctest.h>

#include <cmath>

#include "astgin/error.hpp"
#include "astgin/informer.hpp"
#include "astgin/nn/ops.hpp"
#include "support.hpp"

using namespace astgin;
using namespace astgin::informer;
using V = nn::Var<double>;

namespace {

std::vector<double> values(V v) { return {v.value().begin(), v.value().end()}; }

InformerConfig small_config(std::size_t heads = 2) {
  InformerConfig c;
  c.d_model = 8;
  c.n_heads = heads;
  c.d_ff = 12;
  c.horizon = 2;
  return c;
}

// softmax(q k^T / sqrt(dh)) v for one [l, dh] block, in long double.
std::vector<long double> attention_oracle(const double* q, const double* k, const double* v, std::size_t lq,
                                          std::size_t lk, std::size_t dh, bool causal) {
  std::vector<long double> out(lq * dh, 0.0L);
  for (std::size_t i = 0; i < lq; ++i) {
    std::vector<long double> s(lk);
    long double mx = -INFINITY;
    const std::size_t limit = causal ? i + 1 : lk;
    for (std::size_t j = 0; j < limit; ++j) {
      long double dot = 0.0L;
      for (std::size_t c = 0; c < dh; ++c) dot += static_cast<long double>(q[i * dh + c]) * k[j * dh + c];
      s[j] = dot / std::sqrt(static_cast<long double>(dh));
      mx = std::max(mx, s[j]);
    }
    long double z = 0.0L;
    for (std::size_t j = 0; j < limit; ++j) z += std::exp(s[j] - mx);
    for (std::size_t j = 0; j < limit; ++j)
      for (std::size_t c = 0; c < dh; ++c) out[i * dh + c] += std::exp(s[j] - mx) / z * v[j * dh + c];
  }
  return out;
}

}  // namespace

TEST_CASE("query and key counts") {
  CHECK(active_query_count(12, 5.0) == 12);
  CHECK(active_query_count(6, 1.0) == 2);
  CHECK(active_query_count(1, 5.0) == 1);
  CHECK(active_query_count(100, 1.0) == 5);
  CHECK(sampled_key_count(25, 5.0) == 25);
  CHECK(sampled_key_count(26, 5.0) == 17);
  CHECK_THROWS_AS(active_query_count(4, 0.0), ValidationError);
  CHECK(resolved_label_len(InformerConfig{}, 12) == 6);
  CHECK(resolved_label_len(InformerConfig{}, 5) == 3);
}

TEST_CASE("key sampling draws distinct keys deterministically") {
  const auto a = key_subsets(40, 40, 5.0, 9), b = key_subsets(40, 40, 5.0, 9);
  CHECK(a == b);
  for (const auto& s : a) {
    CHECK(s.size() == sampled_key_count(40, 5.0));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    CHECK(s.back() < 40);
  }
  for (const auto& s : key_subsets(10, 10, 5.0, 1)) CHECK(s.size() == 10);
}

TEST_CASE("top query selection breaks ties toward the lower index") {
  CHECK(select_top_queries({1, 3, 3, 2}, 2) == std::vector<std::size_t>{1, 2});
  CHECK(select_top_queries({5, 5, 5, 5}, 2) == std::vector<std::size_t>{0, 1});
  CHECK(select_top_queries({0.1, 0.9, 0.5}, 5) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("full attention matches the oracle and its examples") {
  testkit::Gen g(1);
  for (int c = 0; c < testkit::kPropertyCases; ++c) {
    const std::size_t b = g.size(1, 3), lq = g.size(1, 7), lk = g.size(1, 7), dh = g.size(1, 5);
    const bool causal = lq == lk && g.coin();
    const auto q = g.vec(b * lq * dh, -2, 2), k = g.vec(b * lk * dh, -2, 2), v = g.vec(b * lk * dh);
    nn::Tape<double> tape;
    const auto out = values(scaled_dot_attention(tape.constant({b, lq, dh}, q), tape.constant({b, lk, dh}, k),
                                                 tape.constant({b, lk, dh}, v), causal));
    for (std::size_t i = 0; i < b; ++i) {
      const auto want =
          attention_oracle(&q[i * lq * dh], &k[i * lk * dh], &v[i * lk * dh], lq, lk, dh, causal);
      for (std::size_t j = 0; j < lq * dh; ++j)
        REQUIRE(std::fabs(out[i * lq * dh + j] - static_cast<double>(want[j])) < 1e-12);
    }
  }

  nn::Tape<double> tape;
  const auto v1 = std::vector<double>{0.3, -0.7};
  const auto single = values(scaled_dot_attention(tape.constant({3, 2}, g.vec(6)), tape.constant({1, 2}, g.vec(2)),
                                                  tape.constant({1, 2}, v1), false));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(single[i * 2] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(single[i * 2 + 1] == doctest::Approx(-0.7).epsilon(1e-15));
  }
  // Orthogonal query: all scores equal, so the output is the plain mean of V.
  const auto uniform = values(scaled_dot_attention(tape.constant({1, 2}, {1, 0}), tape.constant({3, 2}, {0, 1, 0, 2, 0, -1}),
                                                   tape.constant({3, 2}, {1, 0, 2, 0, 6, 0}), false));
  CHECK(uniform[0] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("causal attention ignores later positions") {
  testkit::Gen g(2);
  for (int c = 0; c < 20; ++c) {
    const std::size_t dh = 3;
    auto x = g.vec(6 * dh);
    nn::Tape<double> tape;
    auto run = [&](const std::vector<double>& in) {
      const V t = tape.constant({6, dh}, in);
      return values(scaled_dot_attention(t, t, t, true));
    };
    const auto base = run(x);
    const std::size_t t = g.size(0, 4);
    for (std::size_t i = (t + 1) * dh; i < x.size(); ++i) x[i] += g.uniform(-5, 5);
    const auto moved = run(x);
    for (std::size_t i = 0; i < (t + 1) * dh; ++i) CHECK(moved[i] == base[i]);
  }
}

TEST_CASE("prob-sparse attention with every query active equals full attention") {
  testkit::Gen g(3);
  for (int c = 0; c < testkit::kPropertyCases; ++c) {
    const std::size_t b = g.size(1, 3), h = g.size(1, 2), l = g.size(1, 25), dh = g.size(1, 5);
    const double factor = l == 1 ? 1.0 : std::ceil(static_cast<double>(l) / std::log(static_cast<double>(l))) + 1.0;
    REQUIRE(active_query_count(l, factor) == l);
    const auto q = g.vec(b * h * l * dh, -3, 3), k = g.vec(b * h * l * dh, -3, 3), v = g.vec(b * h * l * dh);
    nn::Tape<double> tape;
    const nn::Shape s{b, h, l, dh};
    const auto sparse = values(prob_sparse_dot_attention(tape.constant(s, q), tape.constant(s, k), tape.constant(s, v), factor, c));
    const auto full = values(scaled_dot_attention(tape.constant(s, q), tape.constant(s, k), tape.constant(s, v), false));
    CHECK(testkit::max_abs_diff(sparse, full) < 1e-10);
  }
}

TEST_CASE("single query always attends normally") {
  testkit::Gen g(4);
  nn::Tape<double> tape;
  const auto q = g.vec(3), k = g.vec(3), v = g.vec(3);
  CHECK(values(prob_sparse_dot_attention(tape.constant({1, 3}, q), tape.constant({1, 3}, k), tape.constant({1, 3}, v), 0.5, 1)) ==
        values(scaled_dot_attention(tape.constant({1, 3}, q), tape.constant({1, 3}, k), tape.constant({1, 3}, v), false)));
}

TEST_CASE("constant queries select the lowest indices and the rest emit mean V") {
  nn::Tape<double> tape;
  const std::vector<double> q = {0.5, -1.0, 0.5, -1.0, 0.5, -1.0, 0.5, -1.0};
  const std::vector<double> k = {1, 0, 0, 1, -1, 2, 3, 1};
  const std::vector<double> v = {1, 10, 2, 20, 3, 30, 6, 60};
  std::vector<AttentionMap> trace;
  const auto out = values(prob_sparse_dot_attention(tape.constant({4, 2}, q), tape.constant({4, 2}, k),
                                                    tape.constant({4, 2}, v), 1.0, 0, &trace, "probe"));
  // u = ceil(ln 4) = 2, so queries 0 and 1 attend and 2, 3 average V.
  const auto attended = attention_oracle(q.data(), k.data(), v.data(), 4, 4, 2, false);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 2; ++c) CHECK(out[i * 2 + c] == doctest::Approx(static_cast<double>(attended[i * 2 + c])).epsilon(1e-14));
  for (std::size_t i = 2; i < 4; ++i) {
    CHECK(out[i * 2] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(out[i * 2 + 1] == doctest::Approx(30.0).epsilon(1e-15));
  }
  REQUIRE(trace.size() == 1);
  CHECK(trace[0].name == "probe");
  for (std::size_t i = 0; i < 4; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 4; ++j) total += trace[0].weights[i * 4 + j];
    CHECK(std::fabs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("sparsity measure is max minus mean of scaled scores") {
  const std::vector<double> q = {1, 0}, k = {1, 0, 0, 1, -1, 0};
  const auto m = sparsity_measure(q.data(), k.data(), 1, 2, {{0, 1, 2}});
  CHECK(m[0] == doctest::Approx((1.0 - 0.0) / std::sqrt(2.0)).epsilon(1e-15));
  const auto partial = sparsity_measure(q.data(), k.data(), 1, 2, {{1, 2}});
  CHECK(partial[0] == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(sparsity_measure(q.data(), k.data(), 1, 2, {{}}), ValidationError);
}

TEST_CASE("positional encoding layout") {
  const auto pe = positional_encoding(3, 4);
  CHECK(pe[0] == 0.0);
  CHECK(pe[1] == 1.0);
  CHECK(pe[4 + 0] == doctest::Approx(std::sin(1.0)));
  CHECK(pe[4 + 1] == doctest::Approx(std::cos(1.0)));
  CHECK(pe[8 + 2] == doctest::Approx(std::sin(2.0 / 100.0)));
}

TEST_CASE("config validation") {
  InformerConfig c = small_config();
  CHECK_NOTHROW(validate(c));
  c.n_heads = 3;
  CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("divisible"), ValidationError);
  c = small_config();
  c.sampling_factor = 0.0;
  CHECK_THROWS_AS(validate(c), ValidationError);
  CHECK(InformerConfig{}.encoder_layers == 2);
  CHECK(InformerConfig{}.decoder_layers == 3);
}

TEST_CASE("encoder with silenced residual branches is a chain of layer norms") {
  testkit::Gen g(5);
  const InformerConfig c = small_config();
  nn::ParameterStore<double> store;
  std::mt19937_64 rng(5);
  init_params(store, c, rng);
  for (std::size_t i = 0; i < c.encoder_layers; ++i) {
    const std::string p = "informer.enc." + std::to_string(i);
    for (const char* name : {".attn.wo", ".attn.bo", ".ffn.w2", ".ffn.b2"})
      for (double& w : store.get(p + name).value) w = 0.0;
  }
  nn::Tape<double> tape;
  const V x = tape.constant({2, 5, 8}, g.vec(80, -2, 2));
  const auto got = values(encoder_forward(x, c, store));
  V want = x;
  const V ones = tape.constant({8}, std::vector<double>(8, 1.0)), zeros = tape.constant({8}, std::vector<double>(8, 0.0));
  for (std::size_t i = 0; i < 2 * c.encoder_layers; ++i) want = nn::layer_norm(want, ones, zeros, c.ln_eps);
  CHECK(testkit::max_abs_diff(got, values(want)) < 1e-12);
}

TEST_CASE("feed-forward width changes parameters, not shapes") {
  testkit::Gen g(6);
  InformerConfig narrow = small_config(), wide = small_config();
  wide.d_ff = 2 * narrow.d_ff;
  nn::ParameterStore<double> a, b;
  std::mt19937_64 rng(1);
  init_params(a, narrow, rng);
  init_params(b, wide, rng);
  CHECK(b.element_count() > a.element_count());
  nn::Tape<double> tape;
  const V x = tape.constant({1, 5, 8}, g.vec(40));
  // Copies: shape() refers into the tape, which the second pass may grow.
  const nn::Shape first = encoder_forward(x, narrow, a).shape();
  const nn::Shape second = encoder_forward(x, wide, b).shape();
  CHECK(first == second);
  CHECK(first == nn::Shape{1, 5, 8});
}

TEST_CASE("decoder is causal over its input positions") {
  testkit::Gen g(7);
  InformerConfig c = small_config();
  c.label_len = 3;
  nn::ParameterStore<double> store;
  std::mt19937_64 rng(7);
  init_params(store, c, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = c.label_len + c.horizon;
    auto dec = g.vec(2 * len * 8);
    const auto enc = g.vec(2 * 6 * 8);
    nn::Tape<double> tape;
    const auto base = values(decoder_forward(tape.constant({2, len, 8}, dec), tape.constant({2, 6, 8}, enc), c, store));
    const std::size_t t = g.size(1, len - 1);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t pos = t; pos < len; ++pos)
        for (std::size_t k = 0; k < 8; ++k) dec[(b * len + pos) * 8 + k] += g.uniform(-3, 3);
    const auto moved = values(decoder_forward(tape.constant({2, len, 8}, dec), tape.constant({2, 6, 8}, enc), c, store));
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t pos = 0; pos < t; ++pos)
        for (std::size_t k = 0; k < 8; ++k) {
          const std::size_t i = (b * len + pos) * 8 + k;
          REQUIRE(std::fabs(moved[i] - base[i]) <= 1e-10);
        }
  }
  nn::Tape<double> tape;
  CHECK_THROWS_WITH_AS(decoder_forward(tape.constant({1, 4, 8}, g.vec(32)), tape.constant({1, 6, 8}, g.vec(48)), c, store),
                       doctest::Contains("label_len + M"), ValidationError);
}

TEST_CASE("decoder without cross values ignores the encoder") {
  testkit::Gen g(8);
  InformerConfig c = small_config();
  c.label_len = 2;
  c.horizon = 1;
  nn::ParameterStore<double> store;
  std::mt19937_64 rng(8);
  init_params(store, c, rng);
  for (std::size_t i = 0; i < c.decoder_layers; ++i)
    for (const char* name : {".cross_attn.wv", ".cross_attn.bv", ".cross_attn.bo"})
      for (double& w : store.get("informer.dec." + std::to_string(i) + name).value) w = 0.0;
  nn::Tape<double> tape;
  const V dec = tape.constant({1, 3, 8}, g.vec(24));
  const auto zero_enc = values(decoder_forward(dec, tape.constant({1, 4, 8}, std::vector<double>(32, 0.0)), c, store));
  const auto other = values(decoder_forward(dec, tape.constant({1, 4, 8}, g.vec(32, -4, 4)), c, store));
  CHECK(testkit::max_abs_diff(zero_enc, other) < 1e-12);
}

TEST_CASE("per-station forecasting shares weights") {
  testkit::Gen g(9);
  InformerConfig c = small_config();
  c.horizon = 1;
  nn::ParameterStore<double> store;
  std::mt19937_64 rng(9);
  init_params(store, c, rng);
  nn::Tape<double> tape;

  const auto one = g.vec(6 * 8);
  const auto y1 = tape.constant({6, 1, 8}, one);
  CHECK(informer_forward(y1, c, store).shape() == nn::Shape{1, 1});

  // Station axis sits between time and features.
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = g.size(2, 5);
    std::vector<std::vector<double>> stations(n);
    for (auto& s : stations) s = g.vec(6 * 8);
    stations[1] = stations[0];
    auto pack = [&](const std::vector<std::size_t>& order) {
      std::vector<double> x(6 * n * 8);
      for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < 8; ++k) x[(t * n + i) * 8 + k] = stations[order[i]][t * 8 + k];
      return x;
    };
    std::vector<std::size_t> ident(n);
    for (std::size_t i = 0; i < n; ++i) ident[i] = i;
    const auto base = values(informer_forward(tape.constant({6, n, 8}, pack(ident)), c, store));
    CHECK(base[0] == base[1]);
    const auto p = g.permutation(n);
    const auto moved = values(informer_forward(tape.constant({6, n, 8}, pack(p)), c, store));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(moved[i] - base[p[i]]) < 1e-12);
    const auto alone = values(informer_forward(tape.constant({6, 1, 8}, stations[n - 1]), c, store));
    CHECK(std::fabs(alone[0] - base[n - 1]) < 1e-12);
  }
}

TEST_CASE("attention maps are captured with unit rows") {
  testkit::Gen g(10);
  InformerConfig c = small_config();
  nn::ParameterStore<double> store;
  std::mt19937_64 rng(10);
  init_params(store, c, rng);
  nn::Tape<double> tape;
  std::vector<AttentionMap> trace;
  ForwardContext ctx;
  ctx.trace = &trace;
  informer_forward(tape.constant({2, 6, 3, 8}, g.vec(2 * 6 * 3 * 8)), c, store, ctx);
  CHECK(trace.size() == c.encoder_layers + 2 * c.decoder_layers);
  for (const auto& m : trace) {
    CHECK(m.heads == c.n_heads);
    for (std::size_t r = 0; r < m.heads * m.queries; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < m.keys; ++j) total += m.weights[r * m.keys + j];
      CHECK(std::fabs(total - 1.0) < 1e-12);
    }
  }
}
