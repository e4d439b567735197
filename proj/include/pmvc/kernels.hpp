#pragma once

#include <cstddef>
#include <string>

namespace pmvc::kern {

// Hot inner loops behind a runtime-dispatched table. The scalar variant is the
// reference; SIMD variants must agree with it per tests/test_kernels.cpp:
// bitwise for elementwise ops, exact for sad2d on 8-bit-derived values, small
// relative error for gemm and the double reductions.
//
// Transcendentals (tanh/sigmoid/exp) are not in the table on purpose: they are
// always scalar std:: calls, so results never depend on the dispatched variant.
struct Table {
  const char* name;

  // C[M,N] (+)= A[M,K] * B[K,N], row-major with leading dimensions.
  void (*gemm)(int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, float* c, int ldc, bool accumulate);

  void (*vadd)(const float* a, const float* b, float* out, std::size_t n);
  void (*vsub)(const float* a, const float* b, float* out, std::size_t n);
  void (*vmul)(const float* a, const float* b, float* out, std::size_t n);
  void (*vscale)(float s, const float* a, float* out, std::size_t n);
  void (*vaxpy)(float s, const float* a, float* inout, std::size_t n);
  void (*relu)(const float* a, float* out, std::size_t n);
  // out = g where x > 0, else 0
  void (*relu_bwd)(const float* x, const float* g, float* out, std::size_t n);

  double (*reduce_sum)(const float* a, std::size_t n);
  double (*reduce_sumsq)(const float* a, std::size_t n);

  // Sum of |a-b| over rows x cols with per-row strides, accumulated in double.
  double (*sad2d)(const float* a, std::size_t stride_a, const float* b,
                  std::size_t stride_b, int rows, int cols);
};

const Table& scalar_table();
// nullptr when the AVX2 variant is not built or the CPU lacks AVX2.
const Table* avx2_table();

// Resolved once per process: PMVC_KERNELS env ("scalar"/"avx2") if set,
// otherwise the best supported variant.
const Table& active();
void set_active(const std::string& name);

// Shared helper (memory-bound, single implementation): dst[c*rows + r] = src[r*cols + c].
void transpose(int rows, int cols, const float* src, float* dst);

}  // namespace pmvc::kern
