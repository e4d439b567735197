// End-to-end codec: the decoder must land bit-for-bit on the encoder's own
// reconstruction after a full serialize/parse cycle, static content must cost
// nothing beyond headers and flags, and streams must be bound to their model.
#include <doctest.h>

#include <cstdint>
#include <vector>

#include "pmvc/bitstream.hpp"
#include "pmvc/error.hpp"
#include "pmvc/frame.hpp"
#include "pmvc/model.hpp"
#include "pmvc/pipeline.hpp"
#include "pmvc/predictor.hpp"
#include "pmvc/residual.hpp"
#include "pmvc/rng.hpp"
#include "pmvc/synth.hpp"

using namespace pmvc;

namespace {

ModelState desk_model(PredictionMode mode, unsigned seed = 131) {
  Rng rng(seed);
  ModelState m;
  register_predictor(m, PredictorArch::desk(), mode, rng);
  register_residual(m, ResidualArch::desk(), rng);
  return m;
}

Video moving_clip(int frames = 5) {
  return make_sequence(96, 64, frames, MotionKind::kTranslate,
                       TextureKind::kChecker, Rng(132));
}

Video static_clip(int frames = 5) {
  return make_sequence(96, 64, frames, MotionKind::kStatic,
                       TextureKind::kBlobs, Rng(133));
}

bool videos_bitwise_equal(const Video& a, const Video& b) {
  if (a.frames.size() != b.frames.size()) return false;
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    if (!a.frames[i].same_shape(b.frames[i])) return false;
    for (std::size_t j = 0; j < a.frames[i].size(); ++j)
      if (a.frames[i].data()[j] != b.frames[i].data()[j]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("decode reproduces the encoder reconstruction bit for bit") {
  ModelState m = desk_model(PredictionMode::kPMCNN);
  const Video clip = moving_clip();

  CodecConfig cfg;
  SUBCASE("default in-loop filtering") {}
  SUBCASE("display-only filtering") { cfg.deblock.in_loop = false; }
  SUBCASE("filter disabled") { cfg.deblock.enabled = false; }

  Codec codec(m, cfg);
  EncodeResult enc = codec.encode(clip);
  REQUIRE(enc.recon.frames.size() == clip.frames.size());

  const auto bytes = serialize_stream(enc.doc);
  CHECK(account_stream(enc.doc).total_bits() == 8u * bytes.size());

  const Video dec = codec.decode(parse_stream(bytes));
  CHECK(videos_bitwise_equal(dec, enc.recon));
}

TEST_CASE("every prediction mode keeps the mirror property") {
  const Video clip = moving_clip(4);
  for (PredictionMode mode :
       {PredictionMode::kTemporalPred, PredictionMode::kSpatialPred,
        PredictionMode::kNoPred}) {
    ModelState m = desk_model(mode);
    Codec codec(m);
    EncodeResult enc = codec.encode(clip);
    const Video dec = codec.decode(parse_stream(serialize_stream(enc.doc)));
    CHECK(videos_bitwise_equal(dec, enc.recon));
  }
}

TEST_CASE("a static clip is all skips and zero payload past the references") {
  ModelState m = desk_model(PredictionMode::kPMCNN);
  Codec codec(m);
  const Video clip = static_clip();
  EncodeResult enc = codec.encode(clip);

  for (std::size_t i = 2; i < enc.doc.frames.size(); ++i) {
    const FrameRecord& f = enc.doc.frames[i];
    REQUIRE(f.skip.size() == static_cast<std::size_t>(enc.doc.header.blocks()));
    for (std::uint8_t s : f.skip) CHECK(s == 1);
    CHECK(f.stage_counts.empty());
    CHECK(f.codes.empty());
  }

  // All-skip frames repeat the previous reconstruction exactly: no residual
  // is coded and no seam touches a coded block, so nothing changes.
  for (std::size_t i = 2; i < enc.recon.frames.size(); ++i)
    for (std::size_t j = 0; j < enc.recon.frames[i].size(); ++j)
      CHECK(enc.recon.frames[i].data()[j] ==
            enc.recon.frames[1].data()[j]);

  const Video dec = codec.decode(parse_stream(serialize_stream(enc.doc)));
  CHECK(videos_bitwise_equal(dec, enc.recon));
}

TEST_CASE("the first two frames are never skip-eligible") {
  ModelState m = desk_model(PredictionMode::kPMCNN);
  Codec codec(m);
  EncodeResult enc = codec.encode(static_clip(3));
  CHECK(enc.doc.frames[0].skip.empty());
  CHECK(enc.doc.frames[1].skip.empty());
  CHECK(enc.doc.frames[0].codes.size() ==
        static_cast<std::size_t>(enc.doc.header.blocks()));
}

TEST_CASE("a stream decodes only with the model that produced it") {
  ModelState m = desk_model(PredictionMode::kPMCNN);
  Codec codec(m);
  EncodeResult enc = codec.encode(moving_clip(3));
  auto bytes = serialize_stream(enc.doc);

  SUBCASE("tampered hash field") {
    StreamDocument doc = parse_stream(bytes);
    doc.header.model_hash ^= 1;
    try {
      codec.decode(doc);
      FAIL("decode accepted a foreign stream");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kModelMismatch);
    }
  }
  SUBCASE("different model weights") {
    ModelState other = desk_model(PredictionMode::kPMCNN, 999);
    Codec codec2(other);
    try {
      codec2.decode(parse_stream(bytes));
      FAIL("decode accepted a foreign stream");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kModelMismatch);
    }
  }
}

TEST_CASE("the stage budget override caps every block") {
  ModelState m = desk_model(PredictionMode::kPMCNN);
  CodecConfig cfg;
  cfg.stages = 2;
  cfg.thresholds.tau_spatial = 0.0;  // force the budget to be the binding cap
  Codec codec(m, cfg);
  EncodeResult enc = codec.encode(moving_clip(3));
  CHECK(enc.doc.header.stages == 2);
  for (const FrameRecord& f : enc.doc.frames)
    for (std::uint8_t n : f.stage_counts) {
      CHECK(n >= 1);
      CHECK(n <= 2);
    }
  const Video dec = codec.decode(parse_stream(serialize_stream(enc.doc)));
  CHECK(videos_bitwise_equal(dec, enc.recon));
}

TEST_CASE("header records the filter and motion settings") {
  ModelState m = desk_model(PredictionMode::kPMCNN);
  CodecConfig cfg;
  cfg.deblock.enabled = true;
  cfg.deblock.in_loop = false;
  cfg.deblock.beta8 = 31;
  cfg.motion_range = 5;
  Codec codec(m, cfg);
  EncodeResult enc = codec.encode(moving_clip(3));
  CHECK(enc.doc.header.deblock_enabled);
  CHECK_FALSE(enc.doc.header.deblock_in_loop);
  CHECK(enc.doc.header.deblock_beta == 31);
  CHECK(enc.doc.header.motion_range == 5);
  CHECK(enc.doc.header.model_hash == m.content_hash());
}

TEST_CASE("filter placement changes the coded stream, not just the display") {
  // In-loop filtering feeds filtered references back into prediction, so the
  // two settings genuinely diverge somewhere in the reconstruction.
  ModelState m = desk_model(PredictionMode::kPMCNN);
  CodecConfig in_loop, display_only;
  display_only.deblock.in_loop = false;
  Codec a(m, in_loop), b(m, display_only);
  const Video clip = moving_clip(5);
  EncodeResult ea = a.encode(clip);
  EncodeResult eb = b.encode(clip);
  CHECK_FALSE(videos_bitwise_equal(ea.recon, eb.recon));
}

TEST_CASE("invalid inputs are rejected up front") {
  ModelState m = desk_model(PredictionMode::kPMCNN);
  Codec codec(m);

  SUBCASE("empty video") {
    Video v;
    v.width = 96;
    v.height = 64;
    CHECK_THROWS_AS(codec.encode(v), Error);
  }
  SUBCASE("dimensions not a block multiple") {
    Video v;
    v.width = 50;
    v.height = 64;
    v.frames.push_back(Tensor({64, 50, 3}));
    CHECK_THROWS_AS(codec.encode(v), Error);
  }
  SUBCASE("frame shape disagreeing with the declared size") {
    Video v;
    v.width = 96;
    v.height = 64;
    v.frames.push_back(Tensor({64, 96, 3}));
    v.frames.push_back(Tensor({32, 96, 3}));
    CHECK_THROWS_AS(codec.encode(v), Error);
  }
}

TEST_CASE("the codec reports the configuration it recovered") {
  ModelState m = desk_model(PredictionMode::kTemporalPred);
  Codec codec(m);
  CHECK(codec.prediction_mode() == PredictionMode::kTemporalPred);
  CHECK(codec.residual_arch().code_ch == ResidualArch::desk().code_ch);
  CHECK(codec.predictor_arch().enc_w1 == PredictorArch::desk().enc_w1);
}
