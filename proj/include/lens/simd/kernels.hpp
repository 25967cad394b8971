#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation; vectorised variants (AVX2+FMA on x86-64, NEON on aarch64)
// are selected once at runtime and must agree with the reference up to
// summation-order rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace lens::simd {

enum class Backend { kScalar, kAvx2, kNeon };

struct KernelTable {
  float (*dot)(const float* a, const float* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  // out[j] = dot(q, base + j*dim) for j < count
  void (*dot_rows)(const float* q, const float* base, std::size_t count, std::size_t dim,
                   float* out);
};

std::string_view name(Backend backend) noexcept;

/// True when the backend was compiled in and the running CPU supports it.
bool available(Backend backend) noexcept;

/// Backend picked at startup: the best available one, unless the environment
/// variable LENS_SIMD names another available backend ("scalar", "avx2", "neon").
Backend active_backend() noexcept;

/// Overrides the active backend; throws ConfigError when unavailable.
void set_backend(Backend backend);

const KernelTable& kernels() noexcept;
const KernelTable& kernels(Backend backend);

inline float dot(std::span<const float> a, std::span<const float> b) noexcept {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(float alpha, std::span<const float> x, std::span<float> y) noexcept {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace lens::simd
