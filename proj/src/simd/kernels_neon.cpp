// aarch64 only; NEON is part of the base ISA there.

#include <arm_neon.h>

#include "kernels_impl.hpp"

namespace astgin::simd::detail {

namespace {

template <typename T>
struct V;

template <>
struct V<float> {
  using reg = float32x4_t;
  static constexpr std::size_t width = 4;
  static reg load(const float* p) { return vld1q_f32(p); }
  static void store(float* p, reg v) { vst1q_f32(p, v); }
  static reg set1(float v) { return vdupq_n_f32(v); }
  static reg zero() { return vdupq_n_f32(0.0f); }
  static reg fmadd(reg a, reg b, reg c) { return vfmaq_f32(c, a, b); }
  static reg add(reg a, reg b) { return vaddq_f32(a, b); }
  static reg mul(reg a, reg b) { return vmulq_f32(a, b); }
  static float hsum(reg v) { return vaddvq_f32(v); }
};

template <>
struct V<double> {
  using reg = float64x2_t;
  static constexpr std::size_t width = 2;
  static reg load(const double* p) { return vld1q_f64(p); }
  static void store(double* p, reg v) { vst1q_f64(p, v); }
  static reg set1(double v) { return vdupq_n_f64(v); }
  static reg zero() { return vdupq_n_f64(0.0); }
  static reg fmadd(reg a, reg b, reg c) { return vfmaq_f64(c, a, b); }
  static reg add(reg a, reg b) { return vaddq_f64(a, b); }
  static reg mul(reg a, reg b) { return vmulq_f64(a, b); }
  static double hsum(reg v) { return vaddvq_f64(v); }
};

template <typename T, std::size_t R>
void gemm_rows(std::size_t n, std::size_t k, const T* a, std::size_t a_rs, std::size_t a_cs, const T* b, T* c,
               bool accumulate) {
  using v = V<T>;
  constexpr std::size_t W = v::width;
  std::size_t j = 0;
  for (; j + 2 * W <= n; j += 2 * W) {
    typename v::reg c0[R], c1[R];
    for (std::size_t r = 0; r < R; ++r) {
      c0[r] = accumulate ? v::load(c + r * n + j) : v::zero();
      c1[r] = accumulate ? v::load(c + r * n + j + W) : v::zero();
    }
    for (std::size_t p = 0; p < k; ++p) {
      const auto b0 = v::load(b + p * n + j);
      const auto b1 = v::load(b + p * n + j + W);
      for (std::size_t r = 0; r < R; ++r) {
        const auto ar = v::set1(a[r * a_rs + p * a_cs]);
        c0[r] = v::fmadd(ar, b0, c0[r]);
        c1[r] = v::fmadd(ar, b1, c1[r]);
      }
    }
    for (std::size_t r = 0; r < R; ++r) {
      v::store(c + r * n + j, c0[r]);
      v::store(c + r * n + j + W, c1[r]);
    }
  }
  for (; j < n; ++j)
    for (std::size_t r = 0; r < R; ++r) {
      T s = accumulate ? c[r * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) s += a[r * a_rs + p * a_cs] * b[p * n + j];
      c[r * n + j] = s;
    }
}

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t a_rs, std::size_t a_cs, const T* b,
          T* c, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<T, 4>(n, k, a + i * a_rs, a_rs, a_cs, b, c + i * n, accumulate);
  for (; i < m; ++i) gemm_rows<T, 1>(n, k, a + i * a_rs, a_rs, a_cs, b, c + i * n, accumulate);
}

template <typename T>
T dot(const T* x, const T* y, std::size_t n) {
  using v = V<T>;
  constexpr std::size_t W = v::width;
  auto acc = v::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) acc = v::fmadd(v::load(x + i), v::load(y + i), acc);
  T s = v::hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  using v = V<T>;
  constexpr std::size_t W = v::width;
  const auto va = v::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) v::store(y + i, v::fmadd(va, v::load(x + i), v::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void add(std::size_t n, const T* x, const T* y, T* out) {
  using v = V<T>;
  constexpr std::size_t W = v::width;
  std::size_t i = 0;
  for (; i + W <= n; i += W) v::store(out + i, v::add(v::load(x + i), v::load(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

template <typename T>
void mul(std::size_t n, const T* x, const T* y, T* out) {
  using v = V<T>;
  constexpr std::size_t W = v::width;
  std::size_t i = 0;
  for (; i + W <= n; i += W) v::store(out + i, v::mul(v::load(x + i), v::load(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

template <typename T>
void mul_acc(std::size_t n, const T* x, const T* y, T* out) {
  using v = V<T>;
  constexpr std::size_t W = v::width;
  std::size_t i = 0;
  for (; i + W <= n; i += W) v::store(out + i, v::fmadd(v::load(x + i), v::load(y + i), v::load(out + i)));
  for (; i < n; ++i) out[i] += x[i] * y[i];
}

template <typename T>
Kernels<T> make() {
  Kernels<T> k;
  k.level = Level::neon;
  k.gemm = &gemm<T>;
  k.dot = &dot<T>;
  k.axpy = &axpy<T>;
  k.add = &add<T>;
  k.mul = &mul<T>;
  k.mul_acc = &mul_acc<T>;
  return k;
}

}  // namespace

template <typename T>
const Kernels<T>& neon_kernels() {
  static const Kernels<T> k = make<T>();
  return k;
}

template const Kernels<float>& neon_kernels<float>();
template const Kernels<double>& neon_kernels<double>();

}  // namespace astgin::simd::detail
