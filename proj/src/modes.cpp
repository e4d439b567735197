#include "pmvc/modes.hpp"

#include "pmvc/error.hpp"
#include "pmvc/kernels.hpp"

namespace pmvc {

double mse8_to_normalized(double mse8) {
  const double unit = 2.0 / 255.0;
  return mse8 * unit * unit;
}

bool decide_skip(const Tensor& cur_block, const Tensor& prev_block,
                 double tau_temporal) {
  return nn::mse_value(cur_block, prev_block) < mse8_to_normalized(tau_temporal);
}

int decide_stages(BlockEncoder& enc, const Tensor& original,
                  const Tensor& prediction, double tau_spatial) {
  require(original.same_shape(prediction), ErrorKind::kDimension,
          "original and prediction must match");
  const double tau = mse8_to_normalized(tau_spatial);
  Tensor approx(original.shape());
  while (enc.stages_done() < enc.max_stages()) {
    enc.step();
    kern::active().vadd(prediction.data(), enc.reconstruction().data(),
                        approx.data(), approx.size());
    if (nn::mse_value(original, approx) < tau) break;
  }
  return enc.stages_done();
}

}  // namespace pmvc
