#pragma once

#include <cstdint>
#include <vector>

#include "pmvc/tensor.hpp"

namespace pmvc {

// MSB-first bit packing helpers.
class BitWriter {
 public:
  void put_bit(int bit);
  void put_bits(std::uint32_t value, int count);  // most significant bit first
  void align_byte();
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::uint64_t bit_count() const { return bit_count_; }

 private:
  std::vector<std::uint8_t> bytes_;
  int fill_ = 0;  // bits used in the last byte
  std::uint64_t bit_count_ = 0;
};

class BitReader {
 public:
  BitReader(const std::uint8_t* data, std::size_t size)
      : data_(data), size_(size) {}
  int get_bit();
  std::uint32_t get_bits(int count);
  void align_byte();
  std::size_t byte_pos() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  int used_ = 0;  // bits consumed from the current byte
};

// Everything the decoder needs, minus the checkpoint. Integers little-endian.
struct StreamHeader {
  std::uint16_t version = 1;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint32_t frame_count = 0;
  std::uint8_t block_size = 32;
  std::uint8_t stages = 8;    // S
  std::uint8_t down = 8;      // D
  std::uint16_t code_ch = 32; // C
  std::uint64_t model_hash = 0;
  bool deblock_enabled = true;
  bool deblock_in_loop = true;
  std::uint8_t deblock_beta = 12;  // threshold in 8-bit units
  std::uint8_t motion_range = 8;

  int blocks_x() const { return width / block_size; }
  int blocks_y() const { return height / block_size; }
  int blocks() const { return blocks_x() * blocks_y(); }
  int code_edge() const { return block_size / down; }
};

struct FrameRecord {
  std::uint32_t index = 0;
  // One flag per skip-eligible block in raster order (frames 0 and 1 have
  // none; every block of later frames is eligible). 1 = skip.
  std::vector<std::uint8_t> skip;
  // Stage count in [1, S] for each coded (non-skipped) block, raster order.
  std::vector<std::uint8_t> stage_counts;
  // Stage codes per coded block, same order; tensors over {-1, +1}.
  std::vector<std::vector<Tensor>> codes;
};

struct StreamDocument {
  StreamHeader header;
  std::vector<FrameRecord> frames;
};

struct BitAccounting {
  std::uint64_t header_bits = 0;  // sequence header + per-frame headers
  std::uint64_t flag_bits = 0;
  std::uint64_t stage_count_bits = 0;
  std::uint64_t code_bits = 0;
  std::uint64_t padding_bits = 0;
  std::uint64_t total_bits() const {
    return header_bits + flag_bits + stage_count_bits + code_bits + padding_bits;
  }
  double bpp(const StreamHeader& h) const;
};

// Number of skip-eligible blocks of the frame at `index` (0-based).
int eligible_blocks(const StreamHeader& h, std::uint32_t index);

std::vector<std::uint8_t> serialize_stream(const StreamDocument& doc);
StreamDocument parse_stream(const std::vector<std::uint8_t>& bytes);
// Recomputes the exact serialized layout cost without serializing the codes;
// flag_bits requires re-running the flag coder, so the document is needed.
BitAccounting account_stream(const StreamDocument& doc);

}  // namespace pmvc
