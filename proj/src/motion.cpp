#include "pmvc/motion.hpp"

#include <algorithm>
#include <cstdlib>

#include "pmvc/error.hpp"
#include "pmvc/kernels.hpp"

namespace pmvc {

namespace {
constexpr int kBlock = 4;
}

MotionField estimate_motion(const Tensor& ref_prev, const Tensor& ref_curr,
                            int range) {
  require(ref_prev.rank() == 3 && ref_prev.same_shape(ref_curr),
          ErrorKind::kDimension, "motion references must match in shape");
  const int h = ref_curr.dim(0), w = ref_curr.dim(1), c = ref_curr.dim(2);
  require(h % kBlock == 0 && w % kBlock == 0, ErrorKind::kDimension,
          "frame dimensions must be multiples of 4");
  require(range >= 1, ErrorKind::kContract, "search range must be positive");

  MotionField f;
  f.blocks_x = w / kBlock;
  f.blocks_y = h / kBlock;
  f.vx.assign(static_cast<std::size_t>(f.blocks_x) * f.blocks_y, 0);
  f.vy.assign(static_cast<std::size_t>(f.blocks_x) * f.blocks_y, 0);

  const kern::Table& K = kern::active();
  const std::size_t stride = static_cast<std::size_t>(w) * c;
  for (int by = 0; by < f.blocks_y; ++by) {
    const int y = by * kBlock;
    for (int bx = 0; bx < f.blocks_x; ++bx) {
      const int x = bx * kBlock;
      const float* cur =
          ref_curr.data() + static_cast<std::size_t>(y) * stride + x * c;
      double best_sad = 0.0;
      int best_cost = 0, best_vx = 0, best_vy = 0;
      bool have = false;
      for (int vy = -range; vy <= range; ++vy) {
        const int sy = y - vy;
        if (sy < 0 || sy + kBlock > h) continue;
        for (int vx = -range; vx <= range; ++vx) {
          const int sx = x - vx;
          if (sx < 0 || sx + kBlock > w) continue;
          const float* src =
              ref_prev.data() + static_cast<std::size_t>(sy) * stride + sx * c;
          const double sad = K.sad2d(cur, stride, src, stride, kBlock,
                                     static_cast<std::size_t>(kBlock) * c);
          const int cost = std::abs(vx) + std::abs(vy);
          if (!have || sad < best_sad ||
              (sad == best_sad && cost < best_cost)) {
            have = true;
            best_sad = sad;
            best_cost = cost;
            best_vx = vx;
            best_vy = vy;
          }
        }
      }
      const std::size_t idx = static_cast<std::size_t>(by) * f.blocks_x + bx;
      f.vx[idx] = static_cast<std::int8_t>(best_vx);
      f.vy[idx] = static_cast<std::int8_t>(best_vy);
    }
  }
  return f;
}

Tensor extend_motion(const Tensor& ref_curr, const MotionField& field) {
  require(ref_curr.rank() == 3, ErrorKind::kDimension,
          "extend_motion expects a frame");
  const int h = ref_curr.dim(0), w = ref_curr.dim(1), c = ref_curr.dim(2);
  require(field.blocks_x * kBlock == w && field.blocks_y * kBlock == h,
          ErrorKind::kDimension, "motion field does not cover the frame");

  Tensor out({h, w, c});
  for (int by = 0; by < field.blocks_y; ++by)
    for (int bx = 0; bx < field.blocks_x; ++bx) {
      const std::size_t idx = static_cast<std::size_t>(by) * field.blocks_x + bx;
      const int vx = field.vx[idx], vy = field.vy[idx];
      for (int dy = 0; dy < kBlock; ++dy) {
        const int y = by * kBlock + dy;
        const int sy = std::clamp(y - vy, 0, h - 1);
        for (int dx = 0; dx < kBlock; ++dx) {
          const int x = bx * kBlock + dx;
          const int sx = std::clamp(x - vx, 0, w - 1);
          const float* src =
              ref_curr.data() + (static_cast<std::size_t>(sy) * w + sx) * c;
          float* dst = out.data() + (static_cast<std::size_t>(y) * w + x) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
        }
      }
    }
  return out;
}

}  // namespace pmvc
