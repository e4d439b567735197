// Coding-mode decisions (skip threshold, progressive stage count) and the
// boundary smoothing filter: threshold semantics, coded-block gating, and the
// smoothing identity at block seams.
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pmvc/deblock.hpp"
#include "pmvc/error.hpp"
#include "pmvc/frame.hpp"
#include "pmvc/modes.hpp"
#include "pmvc/residual.hpp"
#include "pmvc/rng.hpp"
#include "pmvc/tensor.hpp"

using namespace pmvc;

namespace {

Tensor random_block(Rng& rng, float span = 1.0f) {
  Tensor t({32, 32, 3});
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = (static_cast<float>(rng.uniform()) * 2.0f - 1.0f) * span;
  return t;
}

}  // namespace

TEST_CASE("threshold conversion squares the sample scale") {
  CHECK(mse8_to_normalized(0.0) == 0.0);
  const double unit = 2.0 / 255.0;
  CHECK(mse8_to_normalized(100.0) == doctest::Approx(100.0 * unit * unit));
}

TEST_CASE("skip comparison is strict, so zero threshold never skips") {
  Rng rng(121);
  Tensor a = random_block(rng);
  CHECK_FALSE(decide_skip(a, a, 0.0));      // MSE 0 is not < 0
  CHECK(decide_skip(a, a, 1e-9));           // but any positive margin skips
  Tensor b = random_block(rng);
  CHECK_FALSE(decide_skip(a, b, 1.0));      // unrelated blocks never skip
}

TEST_CASE("the skip threshold is calibrated in 8-bit MSE units") {
  // Blocks differing by exactly 10 byte levels have an 8-bit MSE of 100.
  Tensor prev({32, 32, 3}), cur({32, 32, 3});
  for (std::size_t i = 0; i < prev.size(); ++i) {
    prev.data()[i] = sample_from_byte(100);
    cur.data()[i] = sample_from_byte(110);
  }
  CHECK(decide_skip(cur, prev, 101.0));
  CHECK_FALSE(decide_skip(cur, prev, 99.0));
}

TEST_CASE("stage selection respects the budget and both threshold extremes") {
  Rng rng(122), init(123);
  ModelState m;
  register_residual(m, ResidualArch::desk(), init);
  const ResidualArch arch = ResidualArch::desk();
  Tensor original = random_block(rng);
  Tensor prediction({32, 32, 3});  // zero prediction: residual = original

  SUBCASE("an unreachable threshold exhausts every stage") {
    BlockEncoder enc(m, arch, original);
    const int n = decide_stages(enc, original, prediction, 0.0);
    CHECK(n == arch.stages);
    CHECK(enc.stages_done() == n);
  }
  SUBCASE("a huge threshold settles for the mandatory first stage") {
    BlockEncoder enc(m, arch, original);
    const int n = decide_stages(enc, original, prediction, 1e9);
    CHECK(n == 1);
    CHECK(enc.stages_done() == 1);
  }
  SUBCASE("a looser threshold never needs more stages") {
    BlockEncoder e1(m, arch, original);
    BlockEncoder e2(m, arch, original);
    const int tight = decide_stages(e1, original, prediction, 50.0);
    const int loose = decide_stages(e2, original, prediction, 400.0);
    CHECK(loose <= tight);
    CHECK(tight >= 1);
    CHECK(tight <= arch.stages);
  }
}

TEST_CASE("small seams at coded boundaries are averaged away") {
  // Two horizontally adjacent 32-blocks, left 0.20 / right 0.25: the jump is
  // under beta = 12 * 2 / 255 ~ 0.094, so both boundary columns become the
  // four-sample average 0.225.
  Tensor f({32, 64, 3});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) f.at(y, x, c) = x < 32 ? 0.20f : 0.25f;

  const float beta = 12.0f * 2.0f / 255.0f;
  std::vector<std::uint8_t> coded = {1, 1};
  deblock_frame(f, coded, 32, beta);
  for (int y = 0; y < 32; ++y)
    for (int c = 0; c < 3; ++c) {
      CHECK(f.at(y, 31, c) == doctest::Approx(0.225f));
      CHECK(f.at(y, 32, c) == doctest::Approx(0.225f));
      // second ring untouched
      CHECK(f.at(y, 30, c) == 0.20f);
      CHECK(f.at(y, 33, c) == 0.25f);
    }
}

TEST_CASE("strong edges survive the filter") {
  Tensor f({32, 64, 3});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) f.at(y, x, c) = x < 32 ? -0.5f : 0.5f;
  Tensor before = f.clone();
  std::vector<std::uint8_t> coded = {1, 1};
  deblock_frame(f, coded, 32, 12.0f * 2.0f / 255.0f);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(f.data()[i] == before.data()[i]);
}

TEST_CASE("boundaries between two uncoded blocks are left alone") {
  Tensor f({32, 64, 3});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) f.at(y, x, c) = x < 32 ? 0.20f : 0.25f;
  Tensor before = f.clone();

  std::vector<std::uint8_t> coded = {0, 0};
  deblock_frame(f, coded, 32, 12.0f * 2.0f / 255.0f);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(f.data()[i] == before.data()[i]);

  // One coded side is enough to turn the filter on.
  coded = {0, 1};
  deblock_frame(f, coded, 32, 12.0f * 2.0f / 255.0f);
  bool changed = false;
  for (std::size_t i = 0; i < f.size(); ++i)
    changed = changed || f.data()[i] != before.data()[i];
  CHECK(changed);
}

TEST_CASE("horizontal boundaries are filtered in the second pass") {
  Tensor f({64, 32, 3});
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) f.at(y, x, c) = y < 32 ? 0.20f : 0.25f;
  std::vector<std::uint8_t> coded = {1, 1};
  deblock_frame(f, coded, 32, 12.0f * 2.0f / 255.0f);
  for (int x = 0; x < 32; ++x)
    for (int c = 0; c < 3; ++c) {
      CHECK(f.at(31, x, c) == doctest::Approx(0.225f));
      CHECK(f.at(32, x, c) == doctest::Approx(0.225f));
      CHECK(f.at(30, x, c) == 0.20f);
      CHECK(f.at(33, x, c) == 0.25f);
    }
}

TEST_CASE("zero beta disables smoothing entirely") {
  Rng rng(124);
  Tensor f({32, 64, 3});
  for (std::size_t i = 0; i < f.size(); ++i)
    f.data()[i] = static_cast<float>(rng.uniform()) - 0.5f;
  Tensor before = f.clone();
  std::vector<std::uint8_t> coded = {1, 1};
  deblock_frame(f, coded, 32, 0.0f);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(f.data()[i] == before.data()[i]);
}

TEST_CASE("filtering a noisy frame reduces seam energy") {
  Rng rng(125);
  Tensor f({64, 64, 3});
  // Gentle per-block DC offsets over a smooth ramp: a typical blocky artifact.
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c)
        f.at(y, x, c) = 0.002f * static_cast<float>(x + y) +
                        ((y < 32) == (x < 32) ? 0.02f : -0.02f);

  auto seam_energy = [](const Tensor& t) {
    double e = 0.0;
    for (int y = 0; y < 64; ++y)
      for (int c = 0; c < 3; ++c) {
        const double d = t.at(y, 32, c) - t.at(y, 31, c);
        e += d * d;
      }
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) {
        const double d = t.at(32, x, c) - t.at(31, x, c);
        e += d * d;
      }
    return e;
  };

  const double before = seam_energy(f);
  std::vector<std::uint8_t> coded = {1, 1, 1, 1};
  deblock_frame(f, coded, 32, 12.0f * 2.0f / 255.0f);
  CHECK(seam_energy(f) < 0.5 * before);
}

TEST_CASE("a wrong mask size is rejected") {
  Tensor f({32, 64, 3});
  std::vector<std::uint8_t> coded = {1};  // needs 2 entries
  CHECK_THROWS_AS(deblock_frame(f, coded, 32, 0.1f), Error);
}
