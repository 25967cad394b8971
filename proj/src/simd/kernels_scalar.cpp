#include "simd/tables.hpp"

namespace lens::simd::detail {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void dot_rows_scalar(const float* q, const float* base, std::size_t count, std::size_t dim,
                     float* out) {
  for (std::size_t j = 0; j < count; ++j) out[j] = dot_scalar(q, base + j * dim, dim);
}

}  // namespace

const KernelTable kScalarTable{&dot_scalar, &axpy_scalar, &dot_rows_scalar};

}  // namespace lens::simd::detail
