#pragma once

#include <cstdint>
#include <vector>

namespace pmvc {

// Adaptive binary model: symbol counts starting at (1,1), halved (rounding up)
// once the total reaches 2^16 so the estimate keeps tracking.
struct BitModel {
  std::uint32_t c0 = 1;
  std::uint32_t c1 = 1;

  void update(int bit) {
    (bit ? c1 : c0) += 1;
    if (c0 + c1 >= (1u << 16)) {
      c0 = (c0 + 1) >> 1;
      c1 = (c1 + 1) >> 1;
    }
  }
};

// Binary range coder (carry-cached byte renormalization, range kept >= 2^24).
// The encoder emits one leading zero byte; finish() steers the final interval
// to a value with maximal trailing zeros and trims those bytes, and the
// decoder zero-extends past the end of the buffer to match.
class RangeEncoder {
 public:
  void encode(BitModel& m, int bit);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::vector<std::uint8_t> out_;
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
};

class RangeDecoder {
 public:
  RangeDecoder(const std::uint8_t* data, std::size_t size);
  int decode(BitModel& m);

 private:
  std::uint8_t next_byte() { return pos_ < size_ ? data_[pos_++] : 0; }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

}  // namespace pmvc
