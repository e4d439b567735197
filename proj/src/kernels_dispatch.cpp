#include "pmvc/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace pmvc::kern {

#if defined(PMVC_BUILD_AVX2)
const Table* avx2_table_impl();
#endif

const Table* avx2_table() {
#if defined(PMVC_BUILD_AVX2)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return avx2_table_impl();
#endif
  return nullptr;
}

namespace {

const Table* g_active = nullptr;

const Table* resolve_default() {
  if (const char* env = std::getenv("PMVC_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2") {
      if (const Table* t = avx2_table()) return t;
      throw std::runtime_error("PMVC_KERNELS=avx2 but AVX2 is unavailable");
    }
    throw std::runtime_error("unknown PMVC_KERNELS value: " + want);
  }
  if (const Table* t = avx2_table()) return t;
  return &scalar_table();
}

}  // namespace

const Table& active() {
  if (!g_active) g_active = resolve_default();
  return *g_active;
}

void set_active(const std::string& name) {
  if (name == "scalar") {
    g_active = &scalar_table();
  } else if (name == "avx2") {
    const Table* t = avx2_table();
    if (!t) throw std::runtime_error("AVX2 kernels unavailable on this host");
    g_active = t;
  } else {
    throw std::runtime_error("unknown kernel variant: " + name);
  }
}

}  // namespace pmvc::kern
