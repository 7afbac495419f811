// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace astgin::simd::detail {

namespace {

template <typename T>
struct V;

template <>
struct V<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

template <>
struct V<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

// R rows of C, processed in column panels of 2 vectors, then 1 vector, then
// scalars.
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
  for (; j + W <= n; j += W) {
    typename v::reg c0[R];
    for (std::size_t r = 0; r < R; ++r) c0[r] = accumulate ? v::load(c + r * n + j) : v::zero();
    for (std::size_t p = 0; p < k; ++p) {
      const auto b0 = v::load(b + p * n + j);
      for (std::size_t r = 0; r < R; ++r) c0[r] = v::fmadd(v::set1(a[r * a_rs + p * a_cs]), b0, c0[r]);
    }
    for (std::size_t r = 0; r < R; ++r) v::store(c + r * n + j, c0[r]);
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
  k.level = Level::avx2;
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
const Kernels<T>& avx2_kernels() {
  static const Kernels<T> k = make<T>();
  return k;
}

template const Kernels<float>& avx2_kernels<float>();
template const Kernels<double>& avx2_kernels<double>();

}  // namespace astgin::simd::detail
