#include "pmvc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pmvc::kern {
namespace {

void gemm_scalar(int m, int n, int k, const float* a, int lda, const float* b,
                 int ldb, float* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    if (!accumulate) std::memset(crow, 0, sizeof(float) * n);
    const float* arow = a + static_cast<std::size_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      if (av == 0.0f) continue;
      const float* brow = b + static_cast<std::size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void vadd_scalar(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void vsub_scalar(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void vmul_scalar(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void vscale_scalar(float s, const float* a, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s * a[i];
}
void vaxpy_scalar(float s, const float* a, float* inout, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) inout[i] += s * a[i];
}
void relu_scalar(const float* a, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0f ? a[i] : 0.0f;
}
void relu_bwd_scalar(const float* x, const float* g, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

double reduce_sum_scalar(const float* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}
double reduce_sumsq_scalar(const float* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * a[i];
  return acc;
}

double sad2d_scalar(const float* a, std::size_t stride_a, const float* b,
                    std::size_t stride_b, int rows, int cols) {
  double acc = 0.0;
  for (int r = 0; r < rows; ++r) {
    const float* pa = a + r * stride_a;
    const float* pb = b + r * stride_b;
    for (int c = 0; c < cols; ++c) acc += std::fabs(pa[c] - pb[c]);
  }
  return acc;
}

}  // namespace

const Table& scalar_table() {
  static const Table t = {
      "scalar",       gemm_scalar, vadd_scalar,       vsub_scalar,
      vmul_scalar,    vscale_scalar, vaxpy_scalar,    relu_scalar,
      relu_bwd_scalar, reduce_sum_scalar, reduce_sumsq_scalar, sad2d_scalar,
  };
  return t;
}

void transpose(int rows, int cols, const float* src, float* dst) {
  constexpr int kBlock = 32;
  for (int r0 = 0; r0 < rows; r0 += kBlock) {
    const int r1 = std::min(rows, r0 + kBlock);
    for (int c0 = 0; c0 < cols; c0 += kBlock) {
      const int c1 = std::min(cols, c0 + kBlock);
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c)
          dst[static_cast<std::size_t>(c) * rows + r] =
              src[static_cast<std::size_t>(r) * cols + c];
    }
  }
}

}  // namespace pmvc::kern
