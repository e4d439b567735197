#include "pmvc/bitstream.hpp"

#include <cstring>

#include "pmvc/arith.hpp"
#include "pmvc/error.hpp"

namespace pmvc {

void BitWriter::put_bit(int bit) {
  if (fill_ == 0) bytes_.push_back(0);
  if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> fill_);
  fill_ = (fill_ + 1) & 7;
  ++bit_count_;
}

void BitWriter::put_bits(std::uint32_t value, int count) {
  for (int i = count - 1; i >= 0; --i) put_bit((value >> i) & 1u);
}

void BitWriter::align_byte() {
  while (fill_ != 0) put_bit(0);
}

int BitReader::get_bit() {
  require(pos_ < size_, ErrorKind::kFormat, "bitstream truncated");
  const int bit = (data_[pos_] >> (7 - used_)) & 1;
  if (++used_ == 8) {
    used_ = 0;
    ++pos_;
  }
  return bit;
}

std::uint32_t BitReader::get_bits(int count) {
  std::uint32_t v = 0;
  for (int i = 0; i < count; ++i) v = (v << 1) | static_cast<std::uint32_t>(get_bit());
  return v;
}

void BitReader::align_byte() {
  if (used_ != 0) {
    used_ = 0;
    ++pos_;
  }
}

double BitAccounting::bpp(const StreamHeader& h) const {
  const double pixels = static_cast<double>(h.width) * h.height * h.frame_count;
  return pixels > 0 ? static_cast<double>(total_bits()) / pixels : 0.0;
}

int eligible_blocks(const StreamHeader& h, std::uint32_t index) {
  return index >= 2 ? h.blocks() : 0;
}

namespace {

constexpr char kMagic[4] = {'P', 'M', 'V', 'C'};
constexpr std::uint8_t kFrameSync = 0xFA;
constexpr std::size_t kSequenceHeaderBytes = 30;
constexpr std::size_t kFrameHeaderBytes = 9;  // sync + index + flag length

void put_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& v, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) v.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}

struct ByteCursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    require(pos + n <= size, ErrorKind::kFormat, "bitstream truncated");
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t x = static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
    pos += 2;
    return x;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 3; i >= 0; --i) x = (x << 8) | data[pos + static_cast<std::size_t>(i)];
    pos += 4;
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 7; i >= 0; --i) x = (x << 8) | data[pos + static_cast<std::size_t>(i)];
    pos += 8;
    return x;
  }
};

void validate_frame(const StreamHeader& h, const FrameRecord& f,
                    std::uint32_t expected_index) {
  require(f.index == expected_index, ErrorKind::kContract,
          "frame records must be consecutive");
  const int eligible = eligible_blocks(h, f.index);
  require(static_cast<int>(f.skip.size()) == eligible, ErrorKind::kContract,
          "skip flag count does not match eligible blocks");
  int skipped = 0;
  for (std::uint8_t s : f.skip) skipped += s ? 1 : 0;
  const int coded = h.blocks() - skipped;
  require(static_cast<int>(f.stage_counts.size()) == coded &&
              static_cast<int>(f.codes.size()) == coded,
          ErrorKind::kContract, "coded block count mismatch");
  const int edge = h.code_edge();
  for (int k = 0; k < coded; ++k) {
    const int n = f.stage_counts[static_cast<std::size_t>(k)];
    require(n >= 1 && n <= h.stages, ErrorKind::kContract,
            "stage count out of range");
    require(static_cast<int>(f.codes[static_cast<std::size_t>(k)].size()) == n,
            ErrorKind::kContract, "code list does not match stage count");
    for (const Tensor& c : f.codes[static_cast<std::size_t>(k)])
      require(c.rank() == 3 && c.dim(0) == edge && c.dim(1) == edge &&
                  c.dim(2) == h.code_ch,
              ErrorKind::kContract, "code tensor has wrong shape");
  }
}

std::vector<std::uint8_t> encode_flags(const FrameRecord& f) {
  if (f.skip.empty()) return {};
  RangeEncoder enc;
  BitModel model;
  for (std::uint8_t s : f.skip) enc.encode(model, s ? 1 : 0);
  return enc.finish();
}

}  // namespace

std::vector<std::uint8_t> serialize_stream(const StreamDocument& doc) {
  const StreamHeader& h = doc.header;
  require(h.block_size > 0 && h.down > 0 && h.block_size % h.down == 0,
          ErrorKind::kContract, "block size must be divisible by the code factor");
  require(h.width % h.block_size == 0 && h.height % h.block_size == 0,
          ErrorKind::kContract, "frame size must be a block multiple");
  require(h.stages >= 1 && h.stages <= 8, ErrorKind::kContract,
          "stage budget must fit the 3-bit field");
  require(doc.frames.size() == h.frame_count, ErrorKind::kContract,
          "frame record count does not match header");

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, h.version);
  put_u16(out, h.width);
  put_u16(out, h.height);
  put_u32(out, h.frame_count);
  out.push_back(h.block_size);
  out.push_back(h.stages);
  out.push_back(h.down);
  put_u16(out, h.code_ch);
  put_u64(out, h.model_hash);
  out.push_back(static_cast<std::uint8_t>((h.deblock_enabled ? 1 : 0) |
                                          (h.deblock_in_loop ? 2 : 0)));
  out.push_back(h.deblock_beta);
  out.push_back(h.motion_range);
  require(out.size() == kSequenceHeaderBytes, ErrorKind::kContract,
          "sequence header layout drifted");

  for (std::size_t i = 0; i < doc.frames.size(); ++i) {
    const FrameRecord& f = doc.frames[i];
    validate_frame(h, f, static_cast<std::uint32_t>(i));

    out.push_back(kFrameSync);
    put_u32(out, f.index);
    const auto flags = encode_flags(f);
    put_u32(out, static_cast<std::uint32_t>(flags.size()));
    out.insert(out.end(), flags.begin(), flags.end());

    BitWriter stage_bits;
    for (std::uint8_t n : f.stage_counts)
      stage_bits.put_bits(static_cast<std::uint32_t>(n - 1), 3);
    stage_bits.align_byte();
    out.insert(out.end(), stage_bits.bytes().begin(), stage_bits.bytes().end());

    BitWriter code_bits;
    for (const auto& block : f.codes)
      for (const Tensor& code : block)
        for (std::size_t e = 0; e < code.size(); ++e)
          code_bits.put_bit(code.data()[e] > 0.0f ? 1 : 0);
    code_bits.align_byte();
    out.insert(out.end(), code_bits.bytes().begin(), code_bits.bytes().end());
  }
  return out;
}

StreamDocument parse_stream(const std::vector<std::uint8_t>& bytes) {
  ByteCursor cur{bytes.data(), bytes.size()};
  cur.need(4);
  require(std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::kFormat,
          "not a coded video stream (bad magic)");
  cur.pos = 4;

  StreamDocument doc;
  StreamHeader& h = doc.header;
  h.version = cur.u16();
  require(h.version == 1, ErrorKind::kFormat, "unsupported stream version");
  h.width = cur.u16();
  h.height = cur.u16();
  h.frame_count = cur.u32();
  h.block_size = cur.u8();
  h.stages = cur.u8();
  h.down = cur.u8();
  h.code_ch = cur.u16();
  h.model_hash = cur.u64();
  const std::uint8_t coding_flags = cur.u8();
  h.deblock_enabled = (coding_flags & 1) != 0;
  h.deblock_in_loop = (coding_flags & 2) != 0;
  h.deblock_beta = cur.u8();
  h.motion_range = cur.u8();
  require(h.block_size > 0 && h.down > 0 && h.block_size % h.down == 0 &&
              h.width % h.block_size == 0 && h.height % h.block_size == 0 &&
              h.stages >= 1 && h.stages <= 8 && h.code_ch >= 1,
          ErrorKind::kFormat, "malformed sequence header");

  const int edge = h.code_edge();
  for (std::uint32_t i = 0; i < h.frame_count; ++i) {
    require(cur.u8() == kFrameSync, ErrorKind::kFormat, "missing frame sync");
    FrameRecord f;
    f.index = cur.u32();
    require(f.index == i, ErrorKind::kFormat, "frame index out of order");

    const std::uint32_t flag_len = cur.u32();
    cur.need(flag_len);
    const int eligible = eligible_blocks(h, f.index);
    if (eligible > 0) {
      RangeDecoder dec(bytes.data() + cur.pos, flag_len);
      BitModel model;
      f.skip.resize(static_cast<std::size_t>(eligible));
      for (int b = 0; b < eligible; ++b)
        f.skip[static_cast<std::size_t>(b)] =
            static_cast<std::uint8_t>(dec.decode(model));
    }
    cur.pos += flag_len;

    int skipped = 0;
    for (std::uint8_t s : f.skip) skipped += s ? 1 : 0;
    const int coded = h.blocks() - skipped;

    {
      const std::size_t stage_bytes = (static_cast<std::size_t>(coded) * 3 + 7) / 8;
      cur.need(stage_bytes);
      BitReader br(bytes.data() + cur.pos, stage_bytes);
      for (int k = 0; k < coded; ++k) {
        const int n = static_cast<int>(br.get_bits(3)) + 1;
        require(n <= h.stages, ErrorKind::kFormat,
                "stage count exceeds the stream's stage budget");
        f.stage_counts.push_back(static_cast<std::uint8_t>(n));
      }
      cur.pos += stage_bytes;
    }

    {
      std::uint64_t total_code_bits = 0;
      for (std::uint8_t n : f.stage_counts)
        total_code_bits += static_cast<std::uint64_t>(n) * edge * edge * h.code_ch;
      const std::size_t code_bytes =
          static_cast<std::size_t>((total_code_bits + 7) / 8);
      cur.need(code_bytes);
      BitReader br(bytes.data() + cur.pos, code_bytes);
      for (std::uint8_t n : f.stage_counts) {
        std::vector<Tensor> block;
        for (int s = 0; s < n; ++s) {
          Tensor code({edge, edge, h.code_ch});
          for (std::size_t e = 0; e < code.size(); ++e)
            code.data()[e] = br.get_bit() ? 1.0f : -1.0f;
          block.push_back(std::move(code));
        }
        f.codes.push_back(std::move(block));
      }
      cur.pos += code_bytes;
    }
    doc.frames.push_back(std::move(f));
  }
  require(cur.pos == bytes.size(), ErrorKind::kFormat,
          "trailing bytes after the last frame");
  return doc;
}

BitAccounting account_stream(const StreamDocument& doc) {
  const StreamHeader& h = doc.header;
  BitAccounting acc;
  acc.header_bits = 8 * kSequenceHeaderBytes;
  const int edge = h.code_edge();
  for (const FrameRecord& f : doc.frames) {
    acc.header_bits += 8 * kFrameHeaderBytes;
    acc.flag_bits += 8 * encode_flags(f).size();
    const std::uint64_t stage_bits = 3ull * f.stage_counts.size();
    acc.stage_count_bits += stage_bits;
    acc.padding_bits += (8 - stage_bits % 8) % 8;
    std::uint64_t code_bits = 0;
    for (std::uint8_t n : f.stage_counts)
      code_bits += static_cast<std::uint64_t>(n) * edge * edge * h.code_ch;
    acc.code_bits += code_bits;
    acc.padding_bits += (8 - code_bits % 8) % 8;
  }
  return acc;
}

}  // namespace pmvc
