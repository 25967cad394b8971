#pragma once

#include "lens/simd/kernels.hpp"

namespace lens::simd::detail {

extern const KernelTable kScalarTable;
#if defined(LENS_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(LENS_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif

}  // namespace lens::simd::detail
