#pragma once

#include "astgin/simd/kernels.hpp"

namespace astgin::simd::detail {

template <typename T>
const Kernels<T>& scalar_kernels();

#if defined(ASTGIN_HAVE_AVX2_KERNELS)
template <typename T>
const Kernels<T>& avx2_kernels();
#endif

#if defined(ASTGIN_HAVE_NEON_KERNELS)
template <typename T>
const Kernels<T>& neon_kernels();
#endif

}  // namespace astgin::simd::detail
