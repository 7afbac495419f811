#include "astgin/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "astgin/error.hpp"
#include "astgin/simd/kernels.hpp"

namespace astgin::nn {

namespace {

[[noreturn]] void fail(const char* op, const std::string& msg) { throw ValidationError(std::string(op) + ": " + msg); }

template <typename T>
const simd::Kernels<T>& K() {
  return simd::active<T>();
}

bool is_suffix(const Shape& full, const Shape& tail) {
  if (tail.size() > full.size()) return false;
  return std::equal(tail.begin(), tail.end(), full.end() - static_cast<std::ptrdiff_t>(tail.size()));
}

template <typename T>
void transpose_into(const T* src, std::size_t rows, std::size_t cols, T* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

// Element offsets into the source for each output position of a permute.
std::shared_ptr<std::vector<std::size_t>> permute_offsets(const Shape& in, const std::vector<std::size_t>& perm,
                                                          Shape& out_shape) {
  const std::size_t r = in.size();
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  out_shape.resize(r);
  std::vector<std::size_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in[perm[i]];
    stride[i] = in_stride[perm[i]];
  }
  auto offsets = std::make_shared<std::vector<std::size_t>>(numel(in));
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t& o : *offsets) {
    o = off;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      off += stride[d];
      if (idx[d] < out_shape[d]) break;
      off -= stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  return offsets;
}

template <typename T, typename F, typename G>
Var<T> unary(const char* op, Var<T> a, F forward, G derivative_from_in_out) {
  Tape<T>& tape = a.tape();
  auto in = a.value();
  std::vector<T> out = tape.buffer(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  Var<T> y = tape.emplace(op, a.shape(), std::move(out), a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(y, [ia, derivative_from_in_out](Tape<T>& t, std::uint32_t self) {
    const auto& dy = t.node(self).grad;
    const auto& yv = t.node(self).value;
    const auto& xv = t.node(ia).value;
    auto da = t.grad_buffer(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * derivative_from_in_out(xv[i], yv[i]);
  });
  return y;
}

enum class BatchMode { paired, broadcast_b, broadcast_a };

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool transpose_b) {
  Tape<T>& tape = a.tape();
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) fail("matmul", "operands need rank >= 2, got " + to_string(sa) + " x " + to_string(sb));
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa.back();
  const std::size_t kb = transpose_b ? sb.back() : sb[sb.size() - 2];
  const std::size_t n = transpose_b ? sb[sb.size() - 2] : sb.back();
  if (k != kb)
    fail("matmul", "inner dimensions differ: " + to_string(sa) + " x " + to_string(sb) + (transpose_b ? "^T" : ""));
  const Shape batch_a(sa.begin(), sa.end() - 2);
  const Shape batch_b(sb.begin(), sb.end() - 2);
  BatchMode mode;
  Shape out_shape;
  if (batch_b.empty()) {
    mode = BatchMode::broadcast_b;
    out_shape = batch_a;
  } else if (batch_a == batch_b) {
    mode = BatchMode::paired;
    out_shape = batch_a;
  } else if (batch_a.empty()) {
    mode = BatchMode::broadcast_a;
    out_shape = batch_b;
  } else {
    fail("matmul", "batch axes differ: " + to_string(sa) + " x " + to_string(sb));
  }
  out_shape.push_back(m);
  out_shape.push_back(n);
  const std::size_t batches = mode == BatchMode::broadcast_a ? numel(batch_b) : numel(batch_a);

  const auto& kern = K<T>();
  const T* av = a.value().data();
  const T* bv = b.value().data();
  std::vector<T> out = tape.buffer(batches * m * n);
  std::vector<T> scratch(transpose_b ? k * n : 0);
  if (mode == BatchMode::broadcast_b) {
    const T* bkn = bv;
    if (transpose_b) {
      transpose_into(bv, n, k, scratch.data());
      bkn = scratch.data();
    }
    kern.gemm(batches * m, n, k, av, k, 1, bkn, out.data(), false);
  } else {
    for (std::size_t q = 0; q < batches; ++q) {
      const T* aq = mode == BatchMode::broadcast_a ? av : av + q * m * k;
      const T* bq = bv + q * k * n;
      if (transpose_b) {
        transpose_into(bq, n, k, scratch.data());
        bq = scratch.data();
      }
      kern.gemm(m, n, k, aq, k, 1, bq, out.data() + q * m * n, false);
    }
  }

  Var<T> c = tape.emplace("matmul", out_shape, std::move(out), a.requires_grad() || b.requires_grad());
  const auto ia = a.id();
  const auto ib = b.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const auto& kn = K<T>();
    const T* dc = t.node(self).grad.data();
    const T* A = t.node(ia).value.data();
    const T* B = t.node(ib).value.data();
    const bool need_a = t.node(ia).requires_grad;
    const bool need_b = t.node(ib).requires_grad;
    std::vector<T> bt;
    if (need_a) {
      T* da = t.grad_buffer(ia).data();
      if (!transpose_b) bt.resize(k * n);
      if (mode == BatchMode::broadcast_b) {
        const T* bnk = B;
        if (!transpose_b) {
          transpose_into(B, k, n, bt.data());
          bnk = bt.data();
        }
        kn.gemm(batches * m, k, n, dc, n, 1, bnk, da, true);
      } else {
        for (std::size_t q = 0; q < batches; ++q) {
          const T* bq = B + q * k * n;
          if (!transpose_b) {
            transpose_into(bq, k, n, bt.data());
            bq = bt.data();
          }
          T* daq = mode == BatchMode::broadcast_a ? da : da + q * m * k;
          kn.gemm(m, k, n, dc + q * m * n, n, 1, bq, daq, true);
        }
      }
    }
    if (need_b) {
      T* db = t.grad_buffer(ib).data();
      const std::size_t rows = mode == BatchMode::broadcast_b ? batches * m : m;
      const std::size_t reps = mode == BatchMode::broadcast_b ? 1 : batches;
      for (std::size_t q = 0; q < reps; ++q) {
        const T* aq = mode == BatchMode::broadcast_a ? A : A + q * rows * k;
        const T* dcq = dc + q * rows * n;
        T* dbq = mode == BatchMode::broadcast_b ? db : db + q * k * n;
        if (!transpose_b)
          kn.gemm(k, n, rows, aq, 1, k, dcq, dbq, true);
        else
          kn.gemm(n, k, rows, dcq, 1, n, aq, dbq, true);
      }
    }
  });
  return c;
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = a.tape();
  if (!is_suffix(a.shape(), b.shape()))
    fail("add", "cannot broadcast " + to_string(b.shape()) + " onto " + to_string(a.shape()));
  const std::size_t inner = b.numel();
  const std::size_t outer = inner ? a.numel() / inner : 0;
  std::vector<T> out = tape.buffer(a.numel());
  const auto& kern = K<T>();
  for (std::size_t o = 0; o < outer; ++o)
    kern.add(inner, a.value().data() + o * inner, b.value().data(), out.data() + o * inner);
  Var<T> c = tape.emplace("add", a.shape(), std::move(out), a.requires_grad() || b.requires_grad());
  const auto ia = a.id();
  const auto ib = b.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const auto& kn = K<T>();
    const T* dc = t.node(self).grad.data();
    if (t.node(ia).requires_grad) kn.axpy(outer * inner, T(1), dc, t.grad_buffer(ia).data());
    if (t.node(ib).requires_grad) {
      T* db = t.grad_buffer(ib).data();
      for (std::size_t o = 0; o < outer; ++o) kn.axpy(inner, T(1), dc + o * inner, db);
    }
  });
  return c;
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& tape = a.tape();
  if (!is_suffix(a.shape(), b.shape()))
    fail("sub", "cannot broadcast " + to_string(b.shape()) + " onto " + to_string(a.shape()));
  const std::size_t inner = b.numel();
  const std::size_t outer = inner ? a.numel() / inner : 0;
  std::vector<T> out = tape.buffer(a.numel());
  auto av = a.value();
  auto bv = b.value();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = av[o * inner + i] - bv[i];
  Var<T> c = tape.emplace("sub", a.shape(), std::move(out), a.requires_grad() || b.requires_grad());
  const auto ia = a.id();
  const auto ib = b.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const auto& kn = K<T>();
    const T* dc = t.node(self).grad.data();
    if (t.node(ia).requires_grad) kn.axpy(outer * inner, T(1), dc, t.grad_buffer(ia).data());
    if (t.node(ib).requires_grad) {
      T* db = t.grad_buffer(ib).data();
      for (std::size_t o = 0; o < outer; ++o) kn.axpy(inner, T(-1), dc + o * inner, db);
    }
  });
  return c;
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tape = a.tape();
  if (!is_suffix(a.shape(), b.shape()))
    fail("mul", "cannot broadcast " + to_string(b.shape()) + " onto " + to_string(a.shape()));
  const std::size_t inner = b.numel();
  const std::size_t outer = inner ? a.numel() / inner : 0;
  std::vector<T> out = tape.buffer(a.numel());
  const auto& kern = K<T>();
  for (std::size_t o = 0; o < outer; ++o)
    kern.mul(inner, a.value().data() + o * inner, b.value().data(), out.data() + o * inner);
  Var<T> c = tape.emplace("mul", a.shape(), std::move(out), a.requires_grad() || b.requires_grad());
  const auto ia = a.id();
  const auto ib = b.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const auto& kn = K<T>();
    const T* dc = t.node(self).grad.data();
    const T* A = t.node(ia).value.data();
    const T* B = t.node(ib).value.data();
    if (t.node(ia).requires_grad) {
      T* da = t.grad_buffer(ia).data();
      for (std::size_t o = 0; o < outer; ++o) kn.mul_acc(inner, dc + o * inner, B, da + o * inner);
    }
    if (t.node(ib).requires_grad) {
      T* db = t.grad_buffer(ib).data();
      for (std::size_t o = 0; o < outer; ++o) kn.mul_acc(inner, dc + o * inner, A + o * inner, db);
    }
  });
  return c;
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tape<T>& tape = a.tape();
  std::vector<T> out = tape.buffer(a.value());
  for (T& v : out) v *= factor;
  Var<T> c = tape.emplace("scale", a.shape(), std::move(out), a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const auto& dc = t.node(self).grad;
    K<T>().axpy(dc.size(), factor, dc.data(), t.grad_buffer(ia).data());
  });
  return c;
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) fail("concat", "no inputs");
  Tape<T>& tape = parts.front().tape();
  const Shape base = parts.front().shape();
  if (axis >= base.size()) fail("concat", "axis " + std::to_string(axis) + " out of range for " + to_string(base));
  Shape out_shape = base;
  out_shape[axis] = 0;
  bool req = false;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == base.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == base[d];
    if (!ok) fail("concat", "shape " + to_string(s) + " incompatible with " + to_string(base) + " on axis " + std::to_string(axis));
    out_shape[axis] += s[axis];
    req = req || p.requires_grad();
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= base[d];
  for (std::size_t d = axis + 1; d < base.size(); ++d) inner *= base[d];
  const std::size_t out_row = out_shape[axis] * inner;
  std::vector<T> out = tape.buffer(outer * out_row);
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[axis] * inner;
    const T* src = p.value().data();
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(src + o * w, w, out.data() + o * out_row + offset);
    offset += w;
    ids.push_back(p.id());
    widths.push_back(w);
  }
  Var<T> c = tape.emplace("concat", out_shape, std::move(out), req);
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const T* dc = t.node(self).grad.data();
    std::size_t off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::size_t w = widths[i];
      if (t.node(ids[i]).requires_grad) {
        T* dp = t.grad_buffer(ids[i]).data();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < w; ++j) dp[o * w + j] += dc[o * out_row + off + j];
      }
      off += w;
    }
  });
  return c;
}

template <typename T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape<T>& tape = a.tape();
  const Shape s = a.shape();
  if (axis >= s.size() || begin > end || end > s[axis])
    fail("slice", "range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " + std::to_string(axis) +
                      " invalid for " + to_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t in_row = s[axis] * inner;
  const std::size_t w = (end - begin) * inner;
  const std::size_t off = begin * inner;
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  std::vector<T> out = tape.buffer(outer * w);
  const T* src = a.value().data();
  for (std::size_t o = 0; o < outer; ++o) std::copy_n(src + o * in_row + off, w, out.data() + o * w);
  Var<T> c = tape.emplace("slice", out_shape, std::move(out), a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const T* dc = t.node(self).grad.data();
    T* da = t.grad_buffer(ia).data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < w; ++j) da[o * in_row + off + j] += dc[o * w + j];
  });
  return c;
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tape<T>& tape = a.tape();
  if (numel(shape) != a.numel()) fail("reshape", "cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  std::vector<T> out = tape.buffer(a.value());
  Var<T> c = tape.emplace("reshape", std::move(shape), std::move(out), a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const auto& dc = t.node(self).grad;
    K<T>().axpy(dc.size(), T(1), dc.data(), t.grad_buffer(ia).data());
  });
  return c;
}

template <typename T>
Var<T> permute(Var<T> a, const std::vector<std::size_t>& perm) {
  Tape<T>& tape = a.tape();
  const Shape s = a.shape();
  if (perm.size() != s.size()) fail("permute", "permutation rank differs from " + to_string(s));
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) fail("permute", "invalid permutation");
    seen[p] = true;
  }
  Shape out_shape;
  auto offsets = permute_offsets(s, perm, out_shape);
  std::vector<T> out = tape.buffer(offsets->size());
  const T* src = a.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[(*offsets)[i]];
  Var<T> c = tape.emplace("permute", out_shape, std::move(out), a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const T* dc = t.node(self).grad.data();
    T* da = t.grad_buffer(ia).data();
    for (std::size_t i = 0; i < offsets->size(); ++i) da[(*offsets)[i]] += dc[i];
  });
  return c;
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const std::size_t r = a.rank();
  if (r < 2) fail("transpose", "needs rank >= 2, got " + to_string(a.shape()));
  std::vector<std::size_t> perm(r);
  for (std::size_t i = 0; i < r; ++i) perm[i] = i;
  std::swap(perm[r - 1], perm[r - 2]);
  return permute(a, perm);
}

template <typename T>
Var<T> relu(Var<T> a) {
  return unary<T>(
      "relu", a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary<T>(
      "sigmoid", a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return unary<T>(
      "tanh", a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> elu(Var<T> a) {
  return unary<T>(
      "elu", a, [](T x) { return x > T(0) ? x : std::expm1(x); },
      [](T x, T y) { return x > T(0) ? T(1) : y + T(1); });
}

template <typename T>
Var<T> max_pool1d(Var<T> a) {
  Tape<T>& tape = a.tape();
  if (a.rank() != 3) fail("max_pool1d", "expects [B, L, C], got " + to_string(a.shape()));
  const std::size_t b = a.dim(0), len = a.dim(1), ch = a.dim(2);
  if (len == 0) fail("max_pool1d", "empty sequence");
  const std::size_t out_len = (len - 1) / 2 + 1;
  auto argmax = std::make_shared<std::vector<std::size_t>>(b * out_len * ch);
  std::vector<T> out = tape.buffer(b * out_len * ch);
  const T* x = a.value().data();
  for (std::size_t q = 0; q < b; ++q)
    for (std::size_t o = 0; o < out_len; ++o)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t center = 2 * o;
        std::size_t best = center;
        for (std::size_t i = center == 0 ? 0 : center - 1; i <= std::min(center + 1, len - 1); ++i)
          if (x[(q * len + i) * ch + c] > x[(q * len + best) * ch + c]) best = i;
        const std::size_t dst = (q * out_len + o) * ch + c;
        (*argmax)[dst] = (q * len + best) * ch + c;
        out[dst] = x[(*argmax)[dst]];
      }
  Var<T> y = tape.emplace("max_pool1d", Shape{b, out_len, ch}, std::move(out), a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(y, [=](Tape<T>& t, std::uint32_t self) {
    const T* dy = t.node(self).grad.data();
    T* dx = t.grad_buffer(ia).data();
    for (std::size_t i = 0; i < argmax->size(); ++i) dx[(*argmax)[i]] += dy[i];
  });
  return y;
}

template <typename T>
Var<T> softmax(Var<T> a, bool causal) {
  Tape<T>& tape = a.tape();
  const Shape s = a.shape();
  if (s.empty()) fail("softmax", "needs rank >= 1");
  const std::size_t len = s.back();
  if (len == 0) fail("softmax", "empty axis");
  std::size_t lq = 1, offset = 0;
  if (causal) {
    if (s.size() < 2) fail("softmax", "causal mask needs a (query, key) matrix, got " + to_string(s));
    lq = s[s.size() - 2];
    if (lq > len) fail("softmax", "causal mask needs queries <= keys, got " + to_string(s));
    offset = len - lq;
  }
  const std::size_t rows = a.numel() / len;
  std::vector<T> out = tape.buffer(a.numel());
  const T* x = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t valid = causal ? (r % lq) + offset + 1 : len;
    const T* xr = x + r * len;
    T* yr = out.data() + r * len;
    T mx = xr[0];
    for (std::size_t j = 1; j < valid; ++j) mx = std::max(mx, xr[j]);
    T total = T(0);
    for (std::size_t j = 0; j < valid; ++j) total += (yr[j] = std::exp(xr[j] - mx));
    const T inv = T(1) / total;
    for (std::size_t j = 0; j < valid; ++j) yr[j] *= inv;
  }
  Var<T> c = tape.emplace("softmax", s, std::move(out), a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const T* dy = t.node(self).grad.data();
    const T* y = t.node(self).value.data();
    T* dx = t.grad_buffer(ia).data();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* dyr = dy + r * len;
      const T* yr = y + r * len;
      T dot = T(0);
      for (std::size_t j = 0; j < len; ++j) dot += dyr[j] * yr[j];
      for (std::size_t j = 0; j < len; ++j) dx[r * len + j] += yr[j] * (dyr[j] - dot);
    }
  });
  return c;
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps) {
  Tape<T>& tape = x.tape();
  const Shape s = x.shape();
  if (s.empty()) fail("layer_norm", "needs rank >= 1");
  const std::size_t d = s.back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
    fail("layer_norm", "affine parameters must be [" + std::to_string(d) + "], got " + to_string(gamma.shape()) +
                           " and " + to_string(beta.shape()));
  if (!(eps >= 0)) fail("layer_norm", "eps must be >= 0");
  const std::size_t rows = x.numel() / d;
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  std::vector<T> out = tape.buffer(x.numel());
  const T* xv = x.value().data();
  const T* g = gamma.value().data();
  const T* b = beta.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv + r * d;
    T mu = T(0);
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xr[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * g[j] + b[j];
    }
  }
  Var<T> c = tape.emplace("layer_norm", s, std::move(out),
                          x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
  const auto ix = x.id();
  const auto ig = gamma.id();
  const auto ib = beta.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const T* dy = t.node(self).grad.data();
    const T* gv = t.node(ig).value.data();
    if (t.node(ig).requires_grad) {
      T* dg = t.grad_buffer(ig).data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) dg[j] += dy[r * d + j] * (*xhat)[r * d + j];
    }
    if (t.node(ib).requires_grad) {
      T* db = t.grad_buffer(ib).data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) db[j] += dy[r * d + j];
    }
    if (t.node(ix).requires_grad) {
      T* dx = t.grad_buffer(ix).data();
      std::vector<T> dh(d);
      for (std::size_t r = 0; r < rows; ++r) {
        T mean_dh = T(0), mean_dh_h = T(0);
        for (std::size_t j = 0; j < d; ++j) {
          dh[j] = dy[r * d + j] * gv[j];
          mean_dh += dh[j];
          mean_dh_h += dh[j] * (*xhat)[r * d + j];
        }
        mean_dh /= static_cast<T>(d);
        mean_dh_h /= static_cast<T>(d);
        for (std::size_t j = 0; j < d; ++j)
          dx[r * d + j] += (*inv_std)[r] * (dh[j] - mean_dh - (*xhat)[r * d + j] * mean_dh_h);
      }
    }
  });
  return c;
}

template <typename T>
Var<T> dropout(Var<T> a, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) fail("dropout", "rate must be in [0, 1)");
  if (rate == 0.0) return a;
  Tape<T>& tape = a.tape();
  auto mask = std::make_shared<std::vector<T>>(a.numel());
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const T s = static_cast<T>(1.0 / (1.0 - rate));
  for (T& m : *mask) m = keep(rng) ? s : T(0);
  std::vector<T> out = tape.buffer(a.numel());
  K<T>().mul(out.size(), a.value().data(), mask->data(), out.data());
  Var<T> c = tape.emplace("dropout", a.shape(), std::move(out), a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const auto& dy = t.node(self).grad;
    K<T>().mul_acc(dy.size(), dy.data(), mask->data(), t.grad_buffer(ia).data());
  });
  return c;
}

template <typename T>
Var<T> embedding_lookup(Var<T> table, const std::vector<std::size_t>& indices) {
  Tape<T>& tape = table.tape();
  if (table.rank() != 2) fail("embedding_lookup", "table must be rank 2, got " + to_string(table.shape()));
  const std::size_t v = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<T> out = tape.buffer(indices.size() * d);
  const T* tv = table.value().data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= v)
      fail("embedding_lookup", "index " + std::to_string(indices[i]) + " out of range for " + std::to_string(v) + " rows");
    std::copy_n(tv + indices[i] * d, d, out.data() + i * d);
  }
  Var<T> c = tape.emplace("embedding_lookup", Shape{indices.size(), d}, std::move(out), table.requires_grad());
  const auto it = table.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const T* dy = t.node(self).grad.data();
    T* dt = t.grad_buffer(it).data();
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) dt[indices[i] * d + j] += dy[i * d + j];
  });
  return c;
}

template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& tape = a.tape();
  T total = T(0);
  for (T v : a.value()) total += v;
  Var<T> c = tape.emplace("sum", Shape{}, std::vector<T>{total}, a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const T g = t.node(self).grad[0];
    for (T& d : t.grad_buffer(ia)) d += g;
  });
  return c;
}

template <typename T>
Var<T> mean(Var<T> a) {
  if (a.numel() == 0) fail("mean", "empty input");
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Var<T> sum_squares(Var<T> a) {
  Tape<T>& tape = a.tape();
  const T total = K<T>().dot(a.value().data(), a.value().data(), a.numel());
  Var<T> c = tape.emplace("sum_squares", Shape{}, std::vector<T>{total}, a.requires_grad());
  const auto ia = a.id();
  tape.set_backward(c, [=](Tape<T>& t, std::uint32_t self) {
    const T g = t.node(self).grad[0];
    const auto& x = t.node(ia).value;
    K<T>().axpy(x.size(), T(2) * g, x.data(), t.grad_buffer(ia).data());
  });
  return c;
}

template <typename T>
Var<T> mse(Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) fail("mse", "shapes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  if (a.numel() == 0) fail("mse", "empty input");
  return scale(sum_squares(sub(a, b)), T(1) / static_cast<T>(a.numel()));
}

#define ASTGIN_INSTANTIATE_OPS(T)                                                  \
  template Var<T> matmul<T>(Var<T>, Var<T>, bool);                                 \
  template Var<T> add<T>(Var<T>, Var<T>);                                          \
  template Var<T> sub<T>(Var<T>, Var<T>);                                          \
  template Var<T> mul<T>(Var<T>, Var<T>);                                          \
  template Var<T> scale<T>(Var<T>, T);                                             \
  template Var<T> concat<T>(const std::vector<Var<T>>&, std::size_t);              \
  template Var<T> slice<T>(Var<T>, std::size_t, std::size_t, std::size_t);         \
  template Var<T> reshape<T>(Var<T>, Shape);                                       \
  template Var<T> permute<T>(Var<T>, const std::vector<std::size_t>&);             \
  template Var<T> transpose<T>(Var<T>);                                            \
  template Var<T> relu<T>(Var<T>);                                                 \
  template Var<T> sigmoid<T>(Var<T>);                                              \
  template Var<T> tanh<T>(Var<T>);                                                 \
  template Var<T> elu<T>(Var<T>);                                                  \
  template Var<T> max_pool1d<T>(Var<T>);                                           \
  template Var<T> softmax<T>(Var<T>, bool);                                        \
  template Var<T> layer_norm<T>(Var<T>, Var<T>, Var<T>, double);                   \
  template Var<T> dropout<T>(Var<T>, double, std::uint64_t);                       \
  template Var<T> embedding_lookup<T>(Var<T>, const std::vector<std::size_t>&);    \
  template Var<T> sum<T>(Var<T>);                                                  \
  template Var<T> mean<T>(Var<T>);                                                 \
  template Var<T> sum_squares<T>(Var<T>);                                          \
  template Var<T> mse<T>(Var<T>, Var<T>);

ASTGIN_INSTANTIATE_OPS(float)
ASTGIN_INSTANTIATE_OPS(double)

#undef ASTGIN_INSTANTIATE_OPS

}  // namespace astgin::nn
