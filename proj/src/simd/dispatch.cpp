#include <atomic>
#include <cstdlib>
#include <string>

#include "lens/errors.hpp"
#include "simd/tables.hpp"

namespace lens::simd {
namespace {

bool cpu_supports(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(LENS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::kNeon:
#if defined(LENS_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* table_for(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return &detail::kScalarTable;
    case Backend::kAvx2:
#if defined(LENS_HAVE_AVX2)
      return &detail::kAvx2Table;
#else
      return nullptr;
#endif
    case Backend::kNeon:
#if defined(LENS_HAVE_NEON)
      return &detail::kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Backend pick_default() noexcept {
  if (const char* env = std::getenv("LENS_SIMD")) {
    const std::string want(env);
    for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
      if (want == name(b) && available(b)) return b;
    }
  }
  if (available(Backend::kAvx2)) return Backend::kAvx2;
  if (available(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

struct State {
  std::atomic<Backend> backend;
  std::atomic<const KernelTable*> table;
  State() {
    Backend b = pick_default();
    backend.store(b);
    table.store(table_for(b));
  }
};

State& state() noexcept {
  static State s;
  return s;
}

}  // namespace

std::string_view name(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
    case Backend::kNeon:
      return "neon";
  }
  return "unknown";
}

bool available(Backend backend) noexcept {
  return table_for(backend) != nullptr && cpu_supports(backend);
}

Backend active_backend() noexcept { return state().backend.load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!available(backend)) {
    throw ConfigError("SIMD backend '" + std::string(name(backend)) + "' is not available");
  }
  state().backend.store(backend);
  state().table.store(table_for(backend));
}

const KernelTable& kernels() noexcept { return *state().table.load(std::memory_order_relaxed); }

const KernelTable& kernels(Backend backend) {
  if (!available(backend)) {
    throw ConfigError("SIMD backend '" + std::string(name(backend)) + "' is not available");
  }
  return *table_for(backend);
}

}  // namespace lens::simd
