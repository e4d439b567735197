#pragma once

#include <cstdint>
#include <vector>

#include "pmvc/tensor.hpp"

namespace pmvc {

// Integer motion vectors, one per 4x4 block. vx/vy are displacements from the
// older reference to the newer one: content at (x, y) in ref_curr matches
// ref_prev at (x - vx, y - vy).
struct MotionField {
  int blocks_x = 0;
  int blocks_y = 0;
  std::vector<std::int8_t> vx;
  std::vector<std::int8_t> vy;
};

// Full search over [-range, range]^2 with 4x4 blocks and SAD over all three
// channels. Candidates whose source block would leave the frame are excluded
// (the window is clamped); (0, 0) is always valid. Ties break by smallest
// |vx| + |vy|, then by candidate scan order (vy ascending, then vx ascending).
MotionField estimate_motion(const Tensor& ref_prev, const Tensor& ref_curr,
                            int range = 8);

// Extrapolates ref_curr one step forward: each 4x4 output block is copied from
// ref_curr at (x - vx, y - vy) using the co-located vector, with source
// coordinates clamped per pixel. Every output pixel is written exactly once.
Tensor extend_motion(const Tensor& ref_curr, const MotionField& field);

}  // namespace pmvc
