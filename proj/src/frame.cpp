#include "pmvc/frame.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pmvc/error.hpp"

namespace pmvc {

std::uint8_t byte_from_sample(float v) {
  const float scaled = (std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f;
  const long r = std::lround(scaled);  // half away from zero
  return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

Tensor frame_from_rgb(const std::uint8_t* rgb, int height, int width) {
  Tensor f({height, width, 3});
  const std::size_t n = f.size();
  for (std::size_t i = 0; i < n; ++i) f.data()[i] = sample_from_byte(rgb[i]);
  return f;
}

std::vector<std::uint8_t> frame_to_rgb(const Tensor& frame) {
  require(frame.rank() == 3 && frame.dim(2) == 3, ErrorKind::kDimension,
          "expected an RGB frame tensor");
  std::vector<std::uint8_t> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i)
    out[i] = byte_from_sample(frame.data()[i]);
  return out;
}

Tensor extract_block(const Tensor& frame, int by, int bx, int size) {
  const int y0 = by * size, x0 = bx * size;
  require(frame.rank() == 3 && y0 + size <= frame.dim(0) &&
              x0 + size <= frame.dim(1),
          ErrorKind::kDimension, "block outside frame");
  const int w = frame.dim(1), c = frame.dim(2);
  Tensor b({size, size, c});
  for (int y = 0; y < size; ++y)
    std::memcpy(b.data() + static_cast<std::size_t>(y) * size * c,
                frame.data() + ((static_cast<std::size_t>(y0 + y) * w) + x0) * c,
                static_cast<std::size_t>(size) * c * sizeof(float));
  return b;
}

void paste_block(Tensor& frame, const Tensor& block, int by, int bx) {
  const int size = block.dim(0);
  const int y0 = by * size, x0 = bx * size;
  require(block.rank() == 3 && block.dim(1) == size &&
              block.dim(2) == frame.dim(2) && y0 + size <= frame.dim(0) &&
              x0 + size <= frame.dim(1),
          ErrorKind::kDimension, "block outside frame");
  const int w = frame.dim(1), c = frame.dim(2);
  for (int y = 0; y < size; ++y)
    std::memcpy(frame.data() + ((static_cast<std::size_t>(y0 + y) * w) + x0) * c,
                block.data() + static_cast<std::size_t>(y) * size * c,
                static_cast<std::size_t>(size) * c * sizeof(float));
}

}  // namespace pmvc
