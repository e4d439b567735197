#include "pmvc/arith.hpp"

#include <algorithm>

namespace pmvc {

namespace {
constexpr std::uint32_t kTopBound = 1u << 24;

std::uint32_t split_point(std::uint32_t range, const BitModel& m) {
  const std::uint64_t s =
      static_cast<std::uint64_t>(range) * m.c0 / (m.c0 + m.c1);
  return static_cast<std::uint32_t>(
      std::clamp<std::uint64_t>(s, 1, range - 1));
}
}  // namespace

void RangeEncoder::encode(BitModel& m, int bit) {
  const std::uint32_t split = split_point(range_, m);
  if (bit) {
    low_ += split;
    range_ -= split;
  } else {
    range_ = split;
  }
  m.update(bit);
  while (range_ < kTopBound) {
    shift_low();
    range_ <<= 8;
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_ >> 32) != 0 ||
      static_cast<std::uint32_t>(low_) < 0xFF000000u) {
    const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    while (cache_size_ != 0) {
      out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
      cache_ = 0xFF;
      --cache_size_;
    }
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  // Any value in [low, low + range) decodes identically; pick the one with the
  // most trailing zero bits so the trailing bytes can be dropped.
  const std::uint64_t lo = low_, hi = low_ + range_;
  std::uint64_t best = lo;
  for (int k = 1; k < 40; ++k) {
    const std::uint64_t mask = (1ull << k) - 1;
    const std::uint64_t aligned = (lo + mask) & ~mask;
    if (aligned < hi)
      best = aligned;
    else
      break;
  }
  low_ = best;
  for (int i = 0; i < 5; ++i) shift_low();
  while (!out_.empty() && out_.back() == 0) out_.pop_back();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t size)
    : data_(data), size_(size) {
  next_byte();  // the encoder's leading zero byte
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

int RangeDecoder::decode(BitModel& m) {
  const std::uint32_t split = split_point(range_, m);
  int bit;
  if (code_ >= split) {
    bit = 1;
    code_ -= split;
    range_ -= split;
  } else {
    bit = 0;
    range_ = split;
  }
  m.update(bit);
  while (range_ < kTopBound) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return bit;
}

}  // namespace pmvc
