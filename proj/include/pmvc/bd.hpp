#pragma once

#include <vector>

namespace pmvc {

// One operating point of a rate-distortion curve.
struct RdPoint {
  double bpp = 0.0;      // bits per pixel, > 0
  double psnr_db = 0.0;  // quality in dB
  double msssim = 0.0;   // carried along; not used by the delta metrics
};

// Bjontegaard deltas between two rate-distortion curves of at least four
// points each. A cubic polynomial links quality and log10(rate); both fits are
// averaged over the overlapping interval by trapezoid integration.
//
// bd_rate: average rate change of `test` against `anchor` at equal quality, in
// percent — negative means the test curve saves bits.
double bd_rate(const std::vector<RdPoint>& anchor,
               const std::vector<RdPoint>& test);

// bd_psnr: average quality change at equal rate, in dB — positive means the
// test curve is better.
double bd_psnr(const std::vector<RdPoint>& anchor,
               const std::vector<RdPoint>& test);

}  // namespace pmvc
