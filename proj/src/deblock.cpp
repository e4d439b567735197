#include "pmvc/deblock.hpp"

#include <cmath>

#include "pmvc/error.hpp"

namespace pmvc {

namespace {

inline void smooth_pair(float* p1, float* p0, float* q0, float* q1, float beta) {
  if (std::fabs(*p0 - *q0) < beta) {
    const float avg = (*p1 + *p0 + *q0 + *q1) * 0.25f;
    *p0 = avg;
    *q0 = avg;
  }
}

}  // namespace

void deblock_frame(Tensor& frame, const std::vector<std::uint8_t>& coded,
                   int block_size, float beta) {
  require(frame.rank() == 3, ErrorKind::kDimension, "deblock expects H x W x C");
  const int h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
  require(block_size >= 2 && h % block_size == 0 && w % block_size == 0,
          ErrorKind::kDimension, "frame size must be a block multiple");
  const int bx_count = w / block_size, by_count = h / block_size;
  require(static_cast<int>(coded.size()) == bx_count * by_count,
          ErrorKind::kDimension, "coded mask size mismatch");

  const auto active = [&](int by, int bx) {
    return coded[static_cast<std::size_t>(by) * bx_count + bx] != 0;
  };

  // Vertical boundaries (between horizontally adjacent blocks).
  for (int bx = 1; bx < bx_count; ++bx) {
    const int x = bx * block_size;
    for (int y = 0; y < h; ++y) {
      const int by = y / block_size;
      if (!active(by, bx - 1) && !active(by, bx)) continue;
      float* row = frame.data() + (static_cast<std::size_t>(y) * w + x) * c;
      for (int ch = 0; ch < c; ++ch)
        smooth_pair(row - 2 * c + ch, row - c + ch, row + ch, row + c + ch, beta);
    }
  }

  // Horizontal boundaries (between vertically adjacent blocks).
  const std::size_t stride = static_cast<std::size_t>(w) * c;
  for (int by = 1; by < by_count; ++by) {
    const int y = by * block_size;
    for (int x = 0; x < w; ++x) {
      const int bx = x / block_size;
      if (!active(by - 1, bx) && !active(by, bx)) continue;
      float* q0 = frame.data() + (static_cast<std::size_t>(y) * w + x) * c;
      for (int ch = 0; ch < c; ++ch)
        smooth_pair(q0 - 2 * stride + ch, q0 - stride + ch, q0 + ch,
                    q0 + stride + ch, beta);
    }
  }
}

}  // namespace pmvc
