#include <atomic>
#include <cstdlib>
#include <string>

#include "astgin/csv.hpp"
#include "astgin/error.hpp"
#include "kernels_impl.hpp"

namespace astgin::simd {

namespace {

Level probe() {
#if defined(ASTGIN_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Level::avx2;
#endif
#if defined(ASTGIN_HAVE_NEON_KERNELS)
  return Level::neon;
#endif
  return Level::scalar;
}

Level best_supported() {
  static const Level level = probe();
  return level;
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{detect()};
  return level;
}

}  // namespace

std::string_view to_string(Level level) {
  switch (level) {
    case Level::scalar: return "scalar";
    case Level::avx2: return "avx2";
    case Level::neon: return "neon";
  }
  return "scalar";
}

bool supported(Level level) {
  switch (level) {
    case Level::scalar: return true;
    case Level::avx2: return best_supported() == Level::avx2;
    case Level::neon: return best_supported() == Level::neon;
  }
  return false;
}

Level detect() {
  if (const char* env = std::getenv("ASTGIN_SIMD")) {
    const std::string want = csv::to_lower(env);
    for (Level l : {Level::scalar, Level::avx2, Level::neon})
      if (want == to_string(l)) {
        if (!supported(l)) throw ValidationError("ASTGIN_SIMD=" + want + " is not supported on this CPU");
        return l;
      }
    throw ValidationError("ASTGIN_SIMD must be one of scalar, avx2, neon");
  }
  return best_supported();
}

Level active_level() { return current().load(std::memory_order_relaxed); }

void set_active_level(Level level) {
  if (!supported(level)) throw ValidationError("SIMD level " + std::string(to_string(level)) + " is not supported");
  current().store(level, std::memory_order_relaxed);
}

template <typename T>
const Kernels<T>& for_level(Level level) {
  if (!supported(level)) throw ValidationError("SIMD level " + std::string(to_string(level)) + " is not supported");
  switch (level) {
#if defined(ASTGIN_HAVE_AVX2_KERNELS)
    case Level::avx2: return detail::avx2_kernels<T>();
#endif
#if defined(ASTGIN_HAVE_NEON_KERNELS)
    case Level::neon: return detail::neon_kernels<T>();
#endif
    default: return detail::scalar_kernels<T>();
  }
}

template <typename T>
const Kernels<T>& active() {
  return for_level<T>(active_level());
}

template const Kernels<float>& for_level<float>(Level);
template const Kernels<double>& for_level<double>(Level);
template const Kernels<float>& active<float>();
template const Kernels<double>& active<double>();

}  // namespace astgin::simd
