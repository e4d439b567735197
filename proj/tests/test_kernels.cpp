// Dispatched kernel table: scalar variant against independent oracles, SIMD
// variants against the scalar reference.
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

#include "pmvc/kernels.hpp"
#include "pmvc/rng.hpp"

using namespace pmvc;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng, float lo = -2.0f,
                              float hi = 2.0f) {
  std::vector<float> v(n);
  for (auto& x : v)
    x = lo + static_cast<float>(rng.uniform()) * (hi - lo);
  return v;
}

// Row-major naive matmul oracle with leading dimensions, double accumulation.
void naive_gemm(int m, int n, int k, const float* a, int lda, const float* b,
                int ldb, float* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = accumulate ? c[i * ldc + j] : 0.0;
      for (int p = 0; p < k; ++p)
        s += static_cast<double>(a[i * lda + p]) *
             static_cast<double>(b[p * ldb + j]);
      c[i * ldc + j] = static_cast<float>(s);
    }
}

}  // namespace

TEST_CASE("scalar gemm matches a naive triple loop") {
  Rng rng(11);
  const auto& t = kern::scalar_table();
  for (auto [m, n, k] : {std::tuple{1, 1, 1}, std::tuple{3, 5, 7},
                         std::tuple{16, 16, 16}, std::tuple{13, 29, 4},
                         std::tuple{32, 9, 33}}) {
    for (bool acc : {false, true}) {
      const int lda = k + 2, ldb = n + 1, ldc = n + 3;  // padded strides
      auto a = random_vec(static_cast<std::size_t>(m) * lda, rng);
      auto b = random_vec(static_cast<std::size_t>(k) * ldb, rng);
      auto c0 = random_vec(static_cast<std::size_t>(m) * ldc, rng);
      auto c1 = c0;
      t.gemm(m, n, k, a.data(), lda, b.data(), ldb, c0.data(), ldc, acc);
      naive_gemm(m, n, k, a.data(), lda, b.data(), ldb, c1.data(), ldc, acc);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const float got = c0[static_cast<std::size_t>(i) * ldc + j];
          const float want = c1[static_cast<std::size_t>(i) * ldc + j];
          CHECK(std::abs(got - want) <=
                1e-4f * (1.0f + std::abs(want)));
        }
    }
  }
}

TEST_CASE("scalar elementwise kernels compute the stated formulas") {
  Rng rng(12);
  const auto& t = kern::scalar_table();
  const std::size_t n = 1037;  // odd length exercises any tail handling
  auto a = random_vec(n, rng);
  auto b = random_vec(n, rng);
  std::vector<float> out(n);

  t.vadd(a.data(), b.data(), out.data(), n);
  for (std::size_t i = 0; i < n; ++i) CHECK(out[i] == a[i] + b[i]);
  t.vsub(a.data(), b.data(), out.data(), n);
  for (std::size_t i = 0; i < n; ++i) CHECK(out[i] == a[i] - b[i]);
  t.vmul(a.data(), b.data(), out.data(), n);
  for (std::size_t i = 0; i < n; ++i) CHECK(out[i] == a[i] * b[i]);
  t.vscale(0.75f, a.data(), out.data(), n);
  for (std::size_t i = 0; i < n; ++i) CHECK(out[i] == 0.75f * a[i]);

  auto inout = b;
  t.vaxpy(-1.25f, a.data(), inout.data(), n);
  for (std::size_t i = 0; i < n; ++i) CHECK(inout[i] == b[i] + -1.25f * a[i]);

  t.relu(a.data(), out.data(), n);
  for (std::size_t i = 0; i < n; ++i)
    CHECK(out[i] == (a[i] > 0.0f ? a[i] : 0.0f));

  t.relu_bwd(a.data(), b.data(), out.data(), n);
  for (std::size_t i = 0; i < n; ++i)
    CHECK(out[i] == (a[i] > 0.0f ? b[i] : 0.0f));
}

TEST_CASE("scalar reductions accumulate in double") {
  Rng rng(13);
  const auto& t = kern::scalar_table();
  const std::size_t n = 2049;
  auto a = random_vec(n, rng);
  double sum = 0.0, sumsq = 0.0;
  for (float v : a) {
    sum += static_cast<double>(v);
    sumsq += static_cast<double>(v) * static_cast<double>(v);
  }
  CHECK(t.reduce_sum(a.data(), n) == doctest::Approx(sum).epsilon(1e-12));
  CHECK(t.reduce_sumsq(a.data(), n) == doctest::Approx(sumsq).epsilon(1e-12));
}

TEST_CASE("sad2d is exact on 8-bit-derived samples") {
  Rng rng(14);
  const auto& t = kern::scalar_table();
  const int rows = 17, cols = 23;
  const std::size_t stride_a = 31, stride_b = 29;
  std::vector<float> a(rows * stride_a), b(rows * stride_b);
  auto byte_sample = [&](Rng& r) {
    return static_cast<float>(r.uniform_int(0, 255)) / 127.5f - 1.0f;
  };
  for (auto& v : a) v = byte_sample(rng);
  for (auto& v : b) v = byte_sample(rng);
  double want = 0.0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      want += static_cast<double>(
          std::abs(a[r * stride_a + c] - b[r * stride_b + c]));
  const double got = t.sad2d(a.data(), stride_a, b.data(), stride_b, rows, cols);
  // Differences are computed in float; their doubles sum exactly at this size,
  // so the total is order-independent and bitwise reproducible.
  CHECK(got == want);
}

TEST_CASE("transpose moves src[r][c] to dst[c][r]") {
  Rng rng(15);
  const int rows = 7, cols = 13;
  auto src = random_vec(static_cast<std::size_t>(rows) * cols, rng);
  std::vector<float> dst(src.size());
  kern::transpose(rows, cols, src.data(), dst.data());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      CHECK(dst[static_cast<std::size_t>(c) * rows + r] ==
            src[static_cast<std::size_t>(r) * cols + c]);
}

TEST_CASE("simd variant agrees with the scalar reference") {
  const kern::Table* simd = kern::avx2_table();
  if (simd == nullptr) {
    MESSAGE("no SIMD variant available on this build/CPU; scalar only");
    return;
  }
  const auto& ref = kern::scalar_table();
  Rng rng(16);
  const std::size_t n = 1023;
  auto a = random_vec(n, rng);
  auto b = random_vec(n, rng);
  std::vector<float> o1(n), o2(n);

  SUBCASE("elementwise ops are bitwise identical") {
    ref.vadd(a.data(), b.data(), o1.data(), n);
    simd->vadd(a.data(), b.data(), o2.data(), n);
    CHECK(o1 == o2);
    ref.vsub(a.data(), b.data(), o1.data(), n);
    simd->vsub(a.data(), b.data(), o2.data(), n);
    CHECK(o1 == o2);
    ref.vmul(a.data(), b.data(), o1.data(), n);
    simd->vmul(a.data(), b.data(), o2.data(), n);
    CHECK(o1 == o2);
    ref.vscale(1.5f, a.data(), o1.data(), n);
    simd->vscale(1.5f, a.data(), o2.data(), n);
    CHECK(o1 == o2);
    auto i1 = b, i2 = b;
    ref.vaxpy(0.5f, a.data(), i1.data(), n);
    simd->vaxpy(0.5f, a.data(), i2.data(), n);
    CHECK(i1 == i2);
    ref.relu(a.data(), o1.data(), n);
    simd->relu(a.data(), o2.data(), n);
    CHECK(o1 == o2);
    ref.relu_bwd(a.data(), b.data(), o1.data(), n);
    simd->relu_bwd(a.data(), b.data(), o2.data(), n);
    CHECK(o1 == o2);
  }

  SUBCASE("gemm agrees to small relative error") {
    const int m = 31, nn = 17, k = 53;
    auto wa = random_vec(static_cast<std::size_t>(m) * k, rng);
    auto wb = random_vec(static_cast<std::size_t>(k) * nn, rng);
    std::vector<float> c1(static_cast<std::size_t>(m) * nn, 0.0f), c2 = c1;
    ref.gemm(m, nn, k, wa.data(), k, wb.data(), nn, c1.data(), nn, false);
    simd->gemm(m, nn, k, wa.data(), k, wb.data(), nn, c2.data(), nn, false);
    for (std::size_t i = 0; i < c1.size(); ++i)
      CHECK(std::abs(c1[i] - c2[i]) <= 1e-4f * (1.0f + std::abs(c1[i])));
  }

  SUBCASE("sad2d is exactly equal on 8-bit-derived samples") {
    const int rows = 16, cols = 16;
    std::vector<float> sa(rows * cols), sb(rows * cols);
    for (auto& v : sa)
      v = static_cast<float>(rng.uniform_int(0, 255)) / 127.5f - 1.0f;
    for (auto& v : sb)
      v = static_cast<float>(rng.uniform_int(0, 255)) / 127.5f - 1.0f;
    CHECK(ref.sad2d(sa.data(), cols, sb.data(), cols, rows, cols) ==
          simd->sad2d(sa.data(), cols, sb.data(), cols, rows, cols));
  }

  SUBCASE("reductions agree to tight relative error") {
    CHECK(ref.reduce_sum(a.data(), n) ==
          doctest::Approx(simd->reduce_sum(a.data(), n)).epsilon(1e-12));
    CHECK(ref.reduce_sumsq(a.data(), n) ==
          doctest::Approx(simd->reduce_sumsq(a.data(), n)).epsilon(1e-12));
  }
}

TEST_CASE("active table can be pinned by name") {
  const std::string before = kern::active().name;
  kern::set_active("scalar");
  CHECK(std::string(kern::active().name) == "scalar");
  kern::set_active(before);  // restore for the remaining tests
  CHECK(std::string(kern::active().name) == before);
}
