// Quality metrics against closed-form oracles, and the rate-distortion delta
// metrics against curves whose answer is known analytically.
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pmvc/bd.hpp"
#include "pmvc/error.hpp"
#include "pmvc/frame.hpp"
#include "pmvc/metrics.hpp"
#include "pmvc/rng.hpp"
#include "pmvc/tensor.hpp"

using namespace pmvc;

namespace {

Tensor byte_frame(int h, int w, Rng& rng) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
  for (auto& v : rgb) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return frame_from_rgb(rgb.data(), h, w);
}

// Straight re-statement of the formula over exported bytes, double throughout.
double psnr_oracle(const Tensor& a, const Tensor& b) {
  const auto ba = frame_to_rgb(a), bb = frame_to_rgb(b);
  double sse = 0.0;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    const double d = static_cast<double>(ba[i]) - static_cast<double>(bb[i]);
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 * ba.size() / sse);
}

Tensor add_noise(const Tensor& src, float amp, Rng& rng) {
  Tensor out = src.clone();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] += amp * (2.0f * static_cast<float>(rng.uniform()) - 1.0f);
    out.data()[i] = std::max(-1.0f, std::min(1.0f, out.data()[i]));
  }
  return out;
}

std::vector<RdPoint> base_curve() {
  return {{0.2, 30.0, 0.90}, {0.4, 33.0, 0.94}, {0.8, 36.0, 0.97},
          {1.6, 39.0, 0.99}};
}

std::vector<RdPoint> scaled_rate(const std::vector<RdPoint>& c, double factor) {
  std::vector<RdPoint> out = c;
  for (auto& p : out) p.bpp *= factor;
  return out;
}

std::vector<RdPoint> shifted_quality(const std::vector<RdPoint>& c, double db) {
  std::vector<RdPoint> out = c;
  for (auto& p : out) p.psnr_db += db;
  return out;
}

}  // namespace

TEST_CASE("signal-to-noise matches the closed form to 1e-9") {
  Rng rng(141);
  Tensor a = byte_frame(48, 64, rng);
  Tensor b = byte_frame(48, 64, rng);
  CHECK(psnr(a, b) == doctest::Approx(psnr_oracle(a, b)).epsilon(1e-9));
  CHECK(psnr(a, b) == psnr(b, a));
}

TEST_CASE("a uniform 16-level offset scores its textbook value") {
  Tensor a({32, 32, 3}), b({32, 32, 3});
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.data()[i] = sample_from_byte(100);
    b.data()[i] = sample_from_byte(116);
  }
  // MSE = 16^2 = 256 in byte units
  const double want = 10.0 * std::log10(255.0 * 255.0 / 256.0);
  CHECK(psnr(a, b) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("identical frames hit the infinity sentinel, capped per sequence") {
  Rng rng(142);
  Tensor a = byte_frame(64, 96, rng);
  CHECK(std::isinf(psnr(a, a)));

  Video v;
  v.width = 96;
  v.height = 64;
  v.frames = {a, a};
  const SequenceQuality q = sequence_quality(v, v);
  CHECK(q.psnr_db == kPsnrCap);
  CHECK(q.msssim == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("structural similarity is exactly one on identical frames") {
  Rng rng(143);
  for (auto [h, w] : {std::pair{64, 96}, std::pair{44, 44},
                      std::pair{192, 256}}) {
    Tensor a = byte_frame(h, w, rng);
    CHECK(ms_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("an inverted frame scores close to zero similarity") {
  Rng rng(144);
  Tensor a = byte_frame(64, 96, rng);
  Tensor inv = a.clone();
  for (std::size_t i = 0; i < inv.size(); ++i) inv.data()[i] = -inv.data()[i];
  CHECK(ms_ssim(a, inv) < 0.3);
}

TEST_CASE("similarity decays monotonically with added noise") {
  Rng rng(145);
  Tensor a = byte_frame(64, 96, rng);
  const double s1 = ms_ssim(a, add_noise(a, 0.05f, rng));
  const double s2 = ms_ssim(a, add_noise(a, 0.25f, rng));
  const double s3 = ms_ssim(a, add_noise(a, 0.8f, rng));
  CHECK(s1 > s2);
  CHECK(s2 > s3);
  CHECK(s1 > 0.9);
}

TEST_CASE("similarity rejects frames that are too small or mismatched") {
  Rng rng(146);
  Tensor small = byte_frame(32, 32, rng);
  CHECK_THROWS_AS(ms_ssim(small, small), Error);
  Tensor a = byte_frame(64, 96, rng), b = byte_frame(64, 64, rng);
  CHECK_THROWS_AS(ms_ssim(a, b), Error);
}

TEST_CASE("rate-distortion deltas vanish between identical curves") {
  const auto c = base_curve();
  CHECK(bd_rate(c, c) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(bd_psnr(c, c) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("doubling every rate costs exactly one hundred percent") {
  const auto anchor = base_curve();
  const auto test = scaled_rate(anchor, 2.0);
  CHECK(bd_rate(anchor, test) == doctest::Approx(100.0).epsilon(1e-3));
  // And halving saves 50 percent.
  CHECK(bd_rate(anchor, scaled_rate(anchor, 0.5)) ==
        doctest::Approx(-50.0).epsilon(1e-3));
  // Rates unchanged: no quality delta either.
  CHECK(bd_psnr(anchor, anchor) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("a uniform one-decibel lift is reported exactly") {
  const auto anchor = base_curve();
  const auto test = shifted_quality(anchor, 1.0);
  CHECK(bd_psnr(anchor, test) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(bd_psnr(anchor, shifted_quality(anchor, -0.5)) ==
        doctest::Approx(-0.5).epsilon(1e-4));
}

TEST_CASE("swapping anchor and test inverts the rate ratio") {
  const auto a = base_curve();
  auto b = scaled_rate(shifted_quality(base_curve(), 0.7), 0.8);
  const double ab = bd_rate(a, b), ba = bd_rate(b, a);
  CHECK((1.0 + ab / 100.0) * (1.0 + ba / 100.0) ==
        doctest::Approx(1.0).epsilon(1e-4));
  CHECK(bd_psnr(a, b) == doctest::Approx(-bd_psnr(b, a)).epsilon(1e-4));
}

TEST_CASE("curves with no overlap on the integration axis are rejected") {
  const auto a = base_curve();
  // The rate delta integrates over quality: disjoint quality ranges fail.
  CHECK_THROWS_AS(bd_rate(a, shifted_quality(base_curve(), 50.0)), Error);
  // The quality delta integrates over log-rate: disjoint rate ranges fail.
  CHECK_THROWS_AS(bd_psnr(a, scaled_rate(base_curve(), 100.0)), Error);
}

TEST_CASE("degenerate curves are rejected") {
  SUBCASE("too few points") {
    std::vector<RdPoint> three = {{0.2, 30.0, 0.9}, {0.4, 33.0, 0.94},
                                  {0.8, 36.0, 0.97}};
    CHECK_THROWS_AS(bd_rate(three, three), Error);
  }
  SUBCASE("coincident quality values") {
    std::vector<RdPoint> flat = {{0.2, 30.0, 0.9}, {0.4, 30.0, 0.9},
                                 {0.8, 30.0, 0.9}, {1.6, 30.0, 0.9}};
    CHECK_THROWS_AS(bd_rate(flat, flat), Error);
  }
  SUBCASE("non-positive rate") {
    auto bad = base_curve();
    bad[0].bpp = 0.0;
    CHECK_THROWS_AS(bd_rate(bad, bad), Error);
  }
}

TEST_CASE("sequence metrics average over frames") {
  Rng rng(147);
  Tensor a = byte_frame(64, 96, rng);
  Tensor b = byte_frame(64, 96, rng);
  Video orig, dec;
  orig.width = dec.width = 96;
  orig.height = dec.height = 64;
  orig.frames = {a, a};
  dec.frames = {a, b};  // one perfect frame, one noisy frame
  const SequenceQuality q = sequence_quality(orig, dec);
  const double want_psnr = (kPsnrCap + psnr(a, b)) / 2.0;
  const double want_ssim = (1.0 + ms_ssim(a, b)) / 2.0;
  CHECK(q.psnr_db == doctest::Approx(want_psnr).epsilon(1e-9));
  CHECK(q.msssim == doctest::Approx(want_ssim).epsilon(1e-9));
}
