#include "pmvc/kernels.hpp"

#if defined(PMVC_BUILD_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pmvc::kern {
namespace {

constexpr int kKC = 256;  // K-panel so a 16-wide B panel stays L1-resident

// MR x 16 FMA microkernel over one K panel. C is loaded/stored each call.
template <int MR>
inline void micro_16(int kc, const float* a, int lda, const float* b, int ldb,
                     float* c, int ldc) {
  __m256 acc0[MR], acc1[MR];
  for (int r = 0; r < MR; ++r) {
    acc0[r] = _mm256_loadu_ps(c + static_cast<std::size_t>(r) * ldc);
    acc1[r] = _mm256_loadu_ps(c + static_cast<std::size_t>(r) * ldc + 8);
  }
  for (int p = 0; p < kc; ++p) {
    const float* brow = b + static_cast<std::size_t>(p) * ldb;
    const __m256 b0 = _mm256_loadu_ps(brow);
    const __m256 b1 = _mm256_loadu_ps(brow + 8);
    for (int r = 0; r < MR; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + static_cast<std::size_t>(r) * lda + p);
      acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    _mm256_storeu_ps(c + static_cast<std::size_t>(r) * ldc, acc0[r]);
    _mm256_storeu_ps(c + static_cast<std::size_t>(r) * ldc + 8, acc1[r]);
  }
}

template <int MR>
inline void micro_8(int kc, const float* a, int lda, const float* b, int ldb,
                    float* c, int ldc) {
  __m256 acc[MR];
  for (int r = 0; r < MR; ++r)
    acc[r] = _mm256_loadu_ps(c + static_cast<std::size_t>(r) * ldc);
  for (int p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + static_cast<std::size_t>(p) * ldb);
    for (int r = 0; r < MR; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + static_cast<std::size_t>(r) * lda + p);
      acc[r] = _mm256_fmadd_ps(av, b0, acc[r]);
    }
  }
  for (int r = 0; r < MR; ++r)
    _mm256_storeu_ps(c + static_cast<std::size_t>(r) * ldc, acc[r]);
}

template <int MR>
inline void micro_mask(int kc, const float* a, int lda, const float* b, int ldb,
                       float* c, int ldc, int ncols, __m256i mask) {
  __m256 acc[MR];
  for (int r = 0; r < MR; ++r)
    acc[r] = _mm256_maskload_ps(c + static_cast<std::size_t>(r) * ldc, mask);
  for (int p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_maskload_ps(b + static_cast<std::size_t>(p) * ldb, mask);
    for (int r = 0; r < MR; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + static_cast<std::size_t>(r) * lda + p);
      acc[r] = _mm256_fmadd_ps(av, b0, acc[r]);
    }
  }
  for (int r = 0; r < MR; ++r)
    _mm256_maskstore_ps(c + static_cast<std::size_t>(r) * ldc, mask, acc[r]);
  (void)ncols;
}

using MicroFn16 = void (*)(int, const float*, int, const float*, int, float*, int);

void gemm_avx2(int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, float* c, int ldc, bool accumulate) {
  if (!accumulate)
    for (int i = 0; i < m; ++i)
      std::memset(c + static_cast<std::size_t>(i) * ldc, 0, sizeof(float) * n);
  if (m == 0 || n == 0 || k == 0) return;

  static constexpr MicroFn16 k16[6] = {micro_16<1>, micro_16<2>, micro_16<3>,
                                       micro_16<4>, micro_16<5>, micro_16<6>};
  static constexpr MicroFn16 k8[6] = {micro_8<1>, micro_8<2>, micro_8<3>,
                                      micro_8<4>, micro_8<5>, micro_8<6>};

  alignas(32) static const int kMaskBits[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                                0,  0,  0,  0,  0,  0,  0,  0};

  for (int p0 = 0; p0 < k; p0 += kKC) {
    const int kc = std::min(kKC, k - p0);
    const float* ap = a + p0;
    const float* bp = b + static_cast<std::size_t>(p0) * ldb;
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      for (int i = 0; i < m;) {
        const int mr = std::min(6, m - i);
        k16[mr - 1](kc, ap + static_cast<std::size_t>(i) * lda, lda, bp + j, ldb,
                    c + static_cast<std::size_t>(i) * ldc + j, ldc);
        i += mr;
      }
    }
    for (; j + 8 <= n; j += 8) {
      for (int i = 0; i < m;) {
        const int mr = std::min(6, m - i);
        k8[mr - 1](kc, ap + static_cast<std::size_t>(i) * lda, lda, bp + j, ldb,
                   c + static_cast<std::size_t>(i) * ldc + j, ldc);
        i += mr;
      }
    }
    if (j < n) {
      const int tail = n - j;
      const __m256i mask =
          _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kMaskBits + 8 - tail));
      for (int i = 0; i < m;) {
        const int mr = std::min(6, m - i);
        switch (mr) {
          case 1: micro_mask<1>(kc, ap + static_cast<std::size_t>(i) * lda, lda, bp + j, ldb, c + static_cast<std::size_t>(i) * ldc + j, ldc, tail, mask); break;
          case 2: micro_mask<2>(kc, ap + static_cast<std::size_t>(i) * lda, lda, bp + j, ldb, c + static_cast<std::size_t>(i) * ldc + j, ldc, tail, mask); break;
          case 3: micro_mask<3>(kc, ap + static_cast<std::size_t>(i) * lda, lda, bp + j, ldb, c + static_cast<std::size_t>(i) * ldc + j, ldc, tail, mask); break;
          case 4: micro_mask<4>(kc, ap + static_cast<std::size_t>(i) * lda, lda, bp + j, ldb, c + static_cast<std::size_t>(i) * ldc + j, ldc, tail, mask); break;
          case 5: micro_mask<5>(kc, ap + static_cast<std::size_t>(i) * lda, lda, bp + j, ldb, c + static_cast<std::size_t>(i) * ldc + j, ldc, tail, mask); break;
          default: micro_mask<6>(kc, ap + static_cast<std::size_t>(i) * lda, lda, bp + j, ldb, c + static_cast<std::size_t>(i) * ldc + j, ldc, tail, mask); break;
        }
        i += mr;
      }
    }
  }
}

void vadd_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}
void vsub_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}
void vmul_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}
void vscale_avx2(float s, const float* a, float* out, std::size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(vs, _mm256_loadu_ps(a + i)));
  for (; i < n; ++i) out[i] = s * a[i];
}
void vaxpy_avx2(float s, const float* a, float* inout, std::size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    // mul+add (not fma) so results match the scalar variant bitwise
    const __m256 prod = _mm256_mul_ps(vs, _mm256_loadu_ps(a + i));
    _mm256_storeu_ps(inout + i, _mm256_add_ps(_mm256_loadu_ps(inout + i), prod));
  }
  for (; i < n; ++i) inout[i] += s * a[i];
}
void relu_avx2(const float* a, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_max_ps(zero, _mm256_loadu_ps(a + i)));
  for (; i < n; ++i) out[i] = a[i] > 0.0f ? a[i] : 0.0f;
}
void relu_bwd_avx2(const float* x, const float* g, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 keep = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(out + i, _mm256_and_ps(keep, _mm256_loadu_ps(g + i)));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

inline double hsum4(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double reduce_sum_avx2(const float* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(a + i);
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  double acc = hsum4(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i];
  return acc;
}
double reduce_sumsq_avx2(const float* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(a + i);
    const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
    const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
    acc0 = _mm256_fmadd_pd(lo, lo, acc0);
    acc1 = _mm256_fmadd_pd(hi, hi, acc1);
  }
  double acc = hsum4(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += static_cast<double>(a[i]) * a[i];
  return acc;
}

double sad2d_avx2(const float* a, std::size_t stride_a, const float* b,
                  std::size_t stride_b, int rows, int cols) {
  const __m256 signmask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7FFFFFFF));
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  double tail = 0.0;
  for (int r = 0; r < rows; ++r) {
    const float* pa = a + r * stride_a;
    const float* pb = b + r * stride_b;
    int c = 0;
    for (; c + 8 <= cols; c += 8) {
      const __m256 d = _mm256_and_ps(
          signmask, _mm256_sub_ps(_mm256_loadu_ps(pa + c), _mm256_loadu_ps(pb + c)));
      acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(d)));
      acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(d, 1)));
    }
    for (; c < cols; ++c) tail += std::fabs(pa[c] - pb[c]);
  }
  return hsum4(_mm256_add_pd(acc0, acc1)) + tail;
}

}  // namespace

const Table* avx2_table_impl() {
  static const Table t = {
      "avx2",        gemm_avx2,   vadd_avx2,        vsub_avx2,
      vmul_avx2,     vscale_avx2, vaxpy_avx2,       relu_avx2,
      relu_bwd_avx2, reduce_sum_avx2, reduce_sumsq_avx2, sad2d_avx2,
  };
  return &t;
}

}  // namespace pmvc::kern

#endif  // PMVC_BUILD_AVX2
