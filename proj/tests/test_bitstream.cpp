// Container layer: bit packing primitives, skip-flag eligibility, byte-exact
// round-trips of hand-built documents, the accounting identity against real
// serialized sizes, and the rejection of malformed streams.
#include <doctest.h>

#include <cstdint>
#include <vector>

#include "pmvc/bitstream.hpp"
#include "pmvc/error.hpp"
#include "pmvc/rng.hpp"
#include "pmvc/tensor.hpp"

using namespace pmvc;

namespace {

Tensor random_code(int edge, int ch, Rng& rng) {
  Tensor t({edge, edge, ch});
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = rng.bernoulli(0.5) ? 1.0f : -1.0f;
  return t;
}

StreamHeader small_header() {
  StreamHeader h;
  h.width = 96;
  h.height = 64;
  h.frame_count = 0;
  h.stages = 8;
  h.down = 8;
  h.code_ch = 32;
  h.model_hash = 0x0123456789ABCDEFull;
  h.deblock_beta = 12;
  h.motion_range = 8;
  return h;
}

// A 3-frame document with handcrafted skip patterns and stage counts.
StreamDocument small_document(Rng& rng) {
  StreamDocument doc;
  doc.header = small_header();
  doc.header.frame_count = 3;
  const int blocks = doc.header.blocks();      // 3 x 2 = 6
  const int edge = doc.header.code_edge();     // 4
  REQUIRE(blocks == 6);

  for (std::uint32_t i = 0; i < 3; ++i) {
    FrameRecord rec;
    rec.index = i;
    const int eligible = eligible_blocks(doc.header, i);
    int coded = blocks;
    if (eligible > 0) {
      // skip blocks 1 and 4 on the third frame
      rec.skip.assign(static_cast<std::size_t>(eligible), 0);
      rec.skip[1] = 1;
      rec.skip[4] = 1;
      coded = blocks - 2;
    }
    for (int b = 0; b < coded; ++b) {
      const int stages = 1 + (b * 3 + static_cast<int>(i)) % doc.header.stages;
      rec.stage_counts.push_back(static_cast<std::uint8_t>(stages));
      std::vector<Tensor> codes;
      for (int s = 0; s < stages; ++s)
        codes.push_back(random_code(edge, doc.header.code_ch, rng));
      rec.codes.push_back(std::move(codes));
    }
    doc.frames.push_back(std::move(rec));
  }
  return doc;
}

void expect_kind(const std::vector<std::uint8_t>& bytes, ErrorKind kind) {
  try {
    parse_stream(bytes);
    FAIL("parse accepted a malformed stream");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_CASE("bit writer and reader invert each other, MSB first") {
  BitWriter w;
  w.put_bit(1);
  w.put_bits(0b1011, 4);
  w.put_bits(0x3FF, 10);
  w.align_byte();
  w.put_bits(0xAB, 8);
  // 15 payload bits, padded to 16 by the alignment, plus the final 8: the
  // counter tracks emitted bits including padding so it mirrors bytes().
  CHECK(w.bit_count() == 24);
  CHECK(w.bytes().size() == 3);

  BitReader r(w.bytes().data(), w.bytes().size());
  CHECK(r.get_bit() == 1);
  CHECK(r.get_bits(4) == 0b1011);
  CHECK(r.get_bits(10) == 0x3FF);
  r.align_byte();
  CHECK(r.get_bits(8) == 0xAB);
}

TEST_CASE("reading past the end reports a truncated stream") {
  BitWriter w;
  w.put_bits(0xFF, 8);
  BitReader r(w.bytes().data(), w.bytes().size());
  r.get_bits(8);
  CHECK_THROWS_AS(r.get_bit(), Error);
}

TEST_CASE("only frames with two references have skip-eligible blocks") {
  const StreamHeader h = small_header();
  CHECK(eligible_blocks(h, 0) == 0);
  CHECK(eligible_blocks(h, 1) == 0);
  CHECK(eligible_blocks(h, 2) == h.blocks());
  CHECK(eligible_blocks(h, 9) == h.blocks());
}

TEST_CASE("a handcrafted document round-trips field for field") {
  Rng rng(111);
  const StreamDocument doc = small_document(rng);
  const auto bytes = serialize_stream(doc);
  const StreamDocument back = parse_stream(bytes);

  CHECK(back.header.version == doc.header.version);
  CHECK(back.header.width == doc.header.width);
  CHECK(back.header.height == doc.header.height);
  CHECK(back.header.frame_count == doc.header.frame_count);
  CHECK(back.header.block_size == doc.header.block_size);
  CHECK(back.header.stages == doc.header.stages);
  CHECK(back.header.down == doc.header.down);
  CHECK(back.header.code_ch == doc.header.code_ch);
  CHECK(back.header.model_hash == doc.header.model_hash);
  CHECK(back.header.deblock_enabled == doc.header.deblock_enabled);
  CHECK(back.header.deblock_in_loop == doc.header.deblock_in_loop);
  CHECK(back.header.deblock_beta == doc.header.deblock_beta);
  CHECK(back.header.motion_range == doc.header.motion_range);

  REQUIRE(back.frames.size() == doc.frames.size());
  for (std::size_t f = 0; f < doc.frames.size(); ++f) {
    const FrameRecord& a = doc.frames[f];
    const FrameRecord& b = back.frames[f];
    CHECK(b.index == a.index);
    CHECK(b.skip == a.skip);
    CHECK(b.stage_counts == a.stage_counts);
    REQUIRE(b.codes.size() == a.codes.size());
    for (std::size_t blk = 0; blk < a.codes.size(); ++blk) {
      REQUIRE(b.codes[blk].size() == a.codes[blk].size());
      for (std::size_t s = 0; s < a.codes[blk].size(); ++s) {
        const Tensor& ta = a.codes[blk][s];
        const Tensor& tb = b.codes[blk][s];
        REQUIRE(tb.same_shape(ta));
        for (std::size_t i = 0; i < ta.size(); ++i)
          CHECK(tb.data()[i] == ta.data()[i]);
      }
    }
  }
}

TEST_CASE("a document with no frames still round-trips") {
  StreamDocument doc;
  doc.header = small_header();
  const auto bytes = serialize_stream(doc);
  CHECK(bytes.size() == 30);  // bare sequence header
  const StreamDocument back = parse_stream(bytes);
  CHECK(back.frames.empty());
  CHECK(back.header.width == doc.header.width);
}

TEST_CASE("accounting matches the serialized size bit for bit") {
  Rng rng(112);
  const StreamDocument doc = small_document(rng);
  const auto bytes = serialize_stream(doc);
  const BitAccounting acc = account_stream(doc);
  CHECK(acc.total_bits() == 8u * bytes.size());

  // Components are individually sane: 30 header bytes plus 9 per frame.
  CHECK(acc.header_bits == 8u * (30 + 9 * doc.frames.size()));
  std::uint64_t stage_bits = 0, code_bits = 0;
  for (const FrameRecord& f : doc.frames) {
    stage_bits += 3 * f.stage_counts.size();
    for (const auto& blk : f.codes)
      for (const Tensor& c : blk) code_bits += c.size();
  }
  CHECK(acc.stage_count_bits == stage_bits);
  CHECK(acc.code_bits == code_bits);
  CHECK(acc.bpp(doc.header) ==
        doctest::Approx(static_cast<double>(acc.total_bits()) /
                        (3.0 * 96.0 * 64.0)));
}

TEST_CASE("accounting holds when every block is skipped") {
  StreamDocument doc;
  doc.header = small_header();
  doc.header.frame_count = 3;
  for (std::uint32_t i = 0; i < 3; ++i) {
    FrameRecord rec;
    rec.index = i;
    const int eligible = eligible_blocks(doc.header, i);
    if (eligible > 0) {
      rec.skip.assign(static_cast<std::size_t>(eligible), 1);
    } else {
      Rng rng(113 + i);
      for (int b = 0; b < doc.header.blocks(); ++b) {
        rec.stage_counts.push_back(1);
        rec.codes.push_back(
            {random_code(doc.header.code_edge(), doc.header.code_ch, rng)});
      }
    }
    doc.frames.push_back(std::move(rec));
  }
  const auto bytes = serialize_stream(doc);
  const BitAccounting acc = account_stream(doc);
  CHECK(acc.total_bits() == 8u * bytes.size());
  const StreamDocument back = parse_stream(bytes);
  CHECK(back.frames[2].codes.empty());  // all-skip frame carries no payload
  CHECK(back.frames[2].stage_counts.empty());
}

TEST_CASE("malformed streams are rejected with the format error") {
  Rng rng(114);
  const StreamDocument doc = small_document(rng);
  auto good = serialize_stream(doc);

  SUBCASE("wrong magic") {
    auto bad = good;
    bad[0] = 'X';
    expect_kind(bad, ErrorKind::kFormat);
  }
  SUBCASE("unknown version") {
    auto bad = good;
    bad[4] = 9;  // version low byte
    expect_kind(bad, ErrorKind::kFormat);
  }
  SUBCASE("truncated header") {
    expect_kind({good.begin(), good.begin() + 12}, ErrorKind::kFormat);
  }
  SUBCASE("truncated mid-frame") {
    expect_kind({good.begin(), good.begin() + 40}, ErrorKind::kFormat);
    expect_kind({good.begin(), good.end() - 3}, ErrorKind::kFormat);
  }
  SUBCASE("trailing garbage") {
    auto bad = good;
    bad.push_back(0);
    expect_kind(bad, ErrorKind::kFormat);
  }
  SUBCASE("corrupted frame sync byte") {
    auto bad = good;
    bad[30] = 0x00;  // first frame's sync marker
    expect_kind(bad, ErrorKind::kFormat);
  }
  SUBCASE("empty input") { expect_kind({}, ErrorKind::kFormat); }
}

TEST_CASE("serialization validates the document against the header") {
  Rng rng(115);

  SUBCASE("skip vector must match eligibility") {
    StreamDocument doc = small_document(rng);
    doc.frames[2].skip.pop_back();
    CHECK_THROWS_AS(serialize_stream(doc), Error);
  }
  SUBCASE("stage counts must stay in range") {
    StreamDocument doc = small_document(rng);
    doc.frames[0].stage_counts[0] = 9;  // > S
    CHECK_THROWS_AS(serialize_stream(doc), Error);
  }
  SUBCASE("zero stages is not representable") {
    StreamDocument doc = small_document(rng);
    doc.frames[0].stage_counts[0] = 0;
    CHECK_THROWS_AS(serialize_stream(doc), Error);
  }
  SUBCASE("code tensors must match the declared stage counts") {
    StreamDocument doc = small_document(rng);
    doc.frames[0].codes[0].pop_back();
    CHECK_THROWS_AS(serialize_stream(doc), Error);
  }
  SUBCASE("frame count must match the header") {
    StreamDocument doc = small_document(rng);
    doc.frames.pop_back();
    CHECK_THROWS_AS(serialize_stream(doc), Error);
  }
}
