#pragma once

#include "pmvc/residual.hpp"
#include "pmvc/tensor.hpp"

namespace pmvc {

// Distortion thresholds driving the progressive coding decisions, expressed as
// MSE in 8-bit units squared (config-facing convention; converted to the
// normalized sample domain internally).
struct Thresholds {
  double tau_spatial = 100.0;   // stop adding stages once block MSE falls below
  double tau_temporal = 3.0;    // copy the co-located block when change is below
};

double mse8_to_normalized(double mse8);

// Skip decision: compares the original current block against the original
// co-located block of the previous frame. Strictly-below comparison, so a zero
// threshold never skips.
bool decide_skip(const Tensor& cur_block, const Tensor& prev_block,
                 double tau_temporal);

// Steps the encoder until MSE(original, prediction + synthesized sum) drops
// below tau_spatial or the stage budget is exhausted. At least one stage is
// always coded; the encoder is left holding exactly the returned stages.
int decide_stages(BlockEncoder& enc, const Tensor& original,
                  const Tensor& prediction, double tau_spatial);

}  // namespace pmvc
