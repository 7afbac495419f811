#include "kernels_impl.hpp"

namespace astgin::simd::detail {

namespace {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t a_rs, std::size_t a_cs, const T* b,
          T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * a_rs + p * a_cs];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

template <typename T>
T dot(const T* x, const T* y, std::size_t n) {
  T s = T(0);
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void add(std::size_t n, const T* x, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

template <typename T>
void mul(std::size_t n, const T* x, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

template <typename T>
void mul_acc(std::size_t n, const T* x, const T* y, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}

template <typename T>
Kernels<T> make() {
  Kernels<T> k;
  k.level = Level::scalar;
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
const Kernels<T>& scalar_kernels() {
  static const Kernels<T> k = make<T>();
  return k;
}

template const Kernels<float>& scalar_kernels<float>();
template const Kernels<double>& scalar_kernels<double>();

}  // namespace astgin::simd::detail
