#pragma once

#include <cstdint>
#include <vector>

#include "pmvc/tensor.hpp"

namespace pmvc {

// Boundary smoothing applied after each frame is reconstructed.  Only
// boundaries touching at least one block that was actually coded this frame
// are filtered; fully skipped regions are left untouched so static content
// stays bit-identical across frames.
struct DeblockConfig {
  bool enabled = true;
  // When true the filtered frame also replaces the reference used for motion
  // and prediction; when false filtering is display-only.
  bool in_loop = true;
  // Threshold in 8-bit units; a boundary is smoothed only when the two
  // samples facing each other differ by less than this.
  std::uint8_t beta8 = 12;

  float beta_normalized() const { return static_cast<float>(beta8) * 2.0f / 255.0f; }
};

// Filters the frame in place.  `coded` holds one flag per block in raster
// order (1 = the block was coded this frame).  Vertical boundaries are
// processed first, then horizontal ones, each sequentially in place.
void deblock_frame(Tensor& frame, const std::vector<std::uint8_t>& coded,
                   int block_size, float beta);

}  // namespace pmvc
