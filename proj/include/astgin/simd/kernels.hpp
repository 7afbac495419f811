#pragma once

#include <cstddef>
#include <string_view>

// Dense inner loops used by the tensor engine. Every kernel has a portable
// scalar reference and optional AVX2/FMA (x86-64) and NEON (aarch64)
// variants; the variant is chosen once at startup from CPU features and can
// be forced with ASTGIN_SIMD=scalar|avx2|neon.

namespace astgin::simd {

enum class Level { scalar, avx2, neon };

std::string_view to_string(Level level);

template <typename T>
struct Kernels {
  Level level = Level::scalar;

  // C[m x n] = (C +) A * B where A(i, p) = a[i * a_rs + p * a_cs] and B is a
  // dense row-major k x n block. Each C entry accumulates p in ascending order.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t a_rs, std::size_t a_cs,
               const T* b, T* c, bool accumulate) = nullptr;
  T (*dot)(const T* x, const T* y, std::size_t n) = nullptr;
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y) = nullptr;
  // out = x + y
  void (*add)(std::size_t n, const T* x, const T* y, T* out) = nullptr;
  // out = x * y
  void (*mul)(std::size_t n, const T* x, const T* y, T* out) = nullptr;
  // out += x * y
  void (*mul_acc)(std::size_t n, const T* x, const T* y, T* out) = nullptr;
};

bool supported(Level level);

// Best level the CPU supports, unless overridden by ASTGIN_SIMD.
Level detect();

Level active_level();

// Throws ValidationError if the CPU (or this build) lacks `level`.
void set_active_level(Level level);

template <typename T>
const Kernels<T>& active();

template <typename T>
const Kernels<T>& for_level(Level level);

}  // namespace astgin::simd
