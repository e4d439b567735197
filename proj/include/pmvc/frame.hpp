#pragma once

#include <cstdint>
#include <vector>

#include "pmvc/tensor.hpp"

namespace pmvc {

// Coding block edge length in pixels; frame dimensions are multiples of it.
inline constexpr int kBlockSize = 32;

// Frames are rank-3 tensors {height, width, 3} with samples in [-1, 1],
// channel-interleaved in memory. 8-bit conversion: v/127.5 - 1 on import,
// clamp + round half away from zero on export.

inline float sample_from_byte(std::uint8_t v) {
  return static_cast<float>(v) / 127.5f - 1.0f;
}

std::uint8_t byte_from_sample(float v);

// Interleaved RGB bytes (row-major, 3 bytes per pixel) <-> frame tensor.
Tensor frame_from_rgb(const std::uint8_t* rgb, int height, int width);
std::vector<std::uint8_t> frame_to_rgb(const Tensor& frame);

// Block access; block origin is (by * size, bx * size).
Tensor extract_block(const Tensor& frame, int by, int bx, int size);
void paste_block(Tensor& frame, const Tensor& block, int by, int bx);

struct Video {
  int width = 0;
  int height = 0;
  std::vector<Tensor> frames;
};

}  // namespace pmvc
