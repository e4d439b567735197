#pragma once

#include "pmvc/frame.hpp"
#include "pmvc/tensor.hpp"

namespace pmvc {

// Quality metrics, computed on the 8-bit exported form of each frame (the
// usual codec-comparison convention), not on the internal normalized floats.

// 10*log10(255^2 / MSE) over all RGB samples. Identical frames return the
// +infinity sentinel.
double psnr(const Tensor& a, const Tensor& b);

// Multi-scale structural similarity: Gaussian window 11 / sigma 1.5, scale
// weights (0.0448, 0.2856, 0.3001, 0.2363, 0.1333), computed per channel and
// averaged. Frames whose smaller dimension is below 176 use the first three
// scales with renormalized weights so every scale keeps a valid window;
// the smaller dimension must be at least 44.
double ms_ssim(const Tensor& a, const Tensor& b);

// Per-frame metrics averaged over a sequence. PSNR's +infinity sentinel is
// capped at 99 dB before averaging.
struct SequenceQuality {
  double psnr_db = 0.0;
  double msssim = 0.0;
};
SequenceQuality sequence_quality(const Video& original, const Video& decoded);

inline constexpr double kPsnrCap = 99.0;

}  // namespace pmvc
