#include "pmvc/pipeline.hpp"

#include <utility>

#include "pmvc/error.hpp"
#include "pmvc/kernels.hpp"
#include "pmvc/motion.hpp"

namespace pmvc {

namespace {

// Reconstructed-so-far blocks of the frame being walked. Blocks are marked as
// they are pasted; in raster order every in-frame above/left neighbor a block
// prediction asks for has already been marked.
class WalkSource final : public NeighborSource {
 public:
  WalkSource(const Tensor& frame, int bx_count, int by_count)
      : frame_(frame),
        bx_count_(bx_count),
        by_count_(by_count),
        present_(static_cast<std::size_t>(bx_count) * by_count, 0) {}

  void mark(int brow, int bcol) {
    present_[static_cast<std::size_t>(brow) * bx_count_ + bcol] = 1;
  }
  bool has(int brow, int bcol) const override {
    return brow >= 0 && bcol >= 0 && brow < by_count_ && bcol < bx_count_ &&
           present_[static_cast<std::size_t>(brow) * bx_count_ + bcol] != 0;
  }
  Tensor block(int brow, int bcol) const override {
    return extract_block(frame_, brow, bcol, kBlockSize);
  }

 private:
  const Tensor& frame_;
  int bx_count_, by_count_;
  std::vector<std::uint8_t> present_;
};

}  // namespace

Codec::Codec(ModelState& m, const CodecConfig& cfg)
    : m_(m),
      cfg_(cfg),
      parch_(infer_predictor_arch(m)),
      rarch_(infer_residual_arch(m)),
      mode_(infer_prediction_mode(m)) {
  require(cfg_.motion_range >= 1 && cfg_.motion_range <= 127,
          ErrorKind::kContract, "motion search range must be in [1, 127]");
  if (cfg_.stages != 0) {
    require(cfg_.stages >= 1 && cfg_.stages <= 8, ErrorKind::kContract,
            "stage budget must be in [1, 8]");
    rarch_.stages = cfg_.stages;
  }
}

Codec::WalkResult Codec::code_frame(std::uint32_t index, const StreamHeader& h,
                                    const Tensor* ref2, const Tensor* ref1,
                                    const Tensor* original,
                                    const Tensor* original_prev,
                                    FrameRecord* out, const FrameRecord* in) {
  const int bx_count = h.blocks_x(), by_count = h.blocks_y();
  const int hpx = h.height, wpx = h.width;

  Tape t(false);
  TValue refinement;
  const bool temporal = index >= 2 && (mode_ == PredictionMode::kPMCNN ||
                                       mode_ == PredictionMode::kTemporalPred);
  if (temporal) {
    const MotionField field = estimate_motion(*ref2, *ref1, h.motion_range);
    Tensor extended = extend_motion(*ref1, field);
    refinement = frame_pass(t, m_, parch_, t.leaf(*ref2), t.leaf(*ref1),
                            t.leaf(std::move(extended)), nn::BnMode::kInfer);
  } else {
    refinement = t.leaf(Tensor({hpx, wpx, 3}));
  }

  WalkResult wr{Tensor({hpx, wpx, 3}),
                std::vector<std::uint8_t>(
                    static_cast<std::size_t>(bx_count) * by_count, 0)};
  WalkSource src(wr.recon, bx_count, by_count);

  const int eligible = eligible_blocks(h, index);
  require(in == nullptr || static_cast<int>(in->skip.size()) == eligible,
          ErrorKind::kFormat, "skip flag count does not match eligible blocks");

  std::size_t coded_i = 0;  // replay position in stage_counts / codes
  for (int brow = 0; brow < by_count; ++brow) {
    for (int bcol = 0; bcol < bx_count; ++bcol) {
      const std::size_t j = static_cast<std::size_t>(brow) * bx_count + bcol;
      bool skip = false;
      if (eligible > 0) {
        if (out != nullptr) {
          skip = decide_skip(extract_block(*original, brow, bcol, kBlockSize),
                             extract_block(*original_prev, brow, bcol, kBlockSize),
                             cfg_.thresholds.tau_temporal);
          out->skip.push_back(skip ? 1 : 0);
        } else {
          skip = in->skip[j] != 0;
        }
      }
      if (skip) {
        paste_block(wr.recon, extract_block(*ref1, brow, bcol, kBlockSize),
                    brow, bcol);
        src.mark(brow, bcol);
        continue;
      }

      Tensor pred;
      if (index < 2) {
        pred = Tensor({kBlockSize, kBlockSize, 3});
      } else {
        pred = predict_block(t, m_, parch_, mode_, refinement, src, brow, bcol,
                             nn::BnMode::kInfer)
                   .t;
      }

      Tensor synth_sum;
      if (out != nullptr) {
        const Tensor orig_blk = extract_block(*original, brow, bcol, kBlockSize);
        Tensor r1(orig_blk.shape());
        kern::active().vsub(orig_blk.data(), pred.data(), r1.data(), r1.size());
        BlockEncoder enc(m_, rarch_, r1);
        const int n =
            decide_stages(enc, orig_blk, pred, cfg_.thresholds.tau_spatial);
        out->stage_counts.push_back(static_cast<std::uint8_t>(n));
        out->codes.push_back(enc.codes());
        synth_sum = enc.reconstruction();
      } else {
        require(coded_i < in->codes.size(), ErrorKind::kFormat,
                "stream record is short of coded blocks");
        synth_sum = decode_block(m_, rarch_, in->codes[coded_i]);
        ++coded_i;
      }

      Tensor recon(pred.shape());
      kern::active().vadd(pred.data(), synth_sum.data(), recon.data(),
                          recon.size());
      paste_block(wr.recon, nn::clamp_unit(recon), brow, bcol);
      wr.coded[j] = 1;
      src.mark(brow, bcol);
    }
  }
  require(in == nullptr || coded_i == in->codes.size(), ErrorKind::kFormat,
          "stream record has extra coded blocks");
  return wr;
}

void Codec::advance_frame(const StreamHeader& h, Tensor&& recon,
                          const std::vector<std::uint8_t>& coded, Video& out,
                          Tensor& ref2, Tensor& ref1) {
  Tensor display = std::move(recon);
  Tensor memory = display;  // shares storage unless smoothing is display-only
  if (h.deblock_enabled) {
    if (!h.deblock_in_loop) memory = display.clone();
    const float beta = static_cast<float>(h.deblock_beta) * 2.0f / 255.0f;
    deblock_frame(display, coded, h.block_size, beta);
  }
  out.frames.push_back(display);
  ref2 = std::move(ref1);
  ref1 = std::move(memory);
}

EncodeResult Codec::encode(const Video& video) {
  require(!video.frames.empty(), ErrorKind::kContract,
          "cannot encode an empty sequence");
  const Tensor& f0 = video.frames.front();
  require(f0.rank() == 3 && f0.dim(2) == 3, ErrorKind::kDimension,
          "frames must be H x W x 3");
  const int hpx = f0.dim(0), wpx = f0.dim(1);
  require(video.height == hpx && video.width == wpx, ErrorKind::kDimension,
          "video dimensions do not match its frames");
  require(hpx % kBlockSize == 0 && wpx % kBlockSize == 0, ErrorKind::kDimension,
          "frame size must be a multiple of the block size");
  require(hpx <= 0xFFFF && wpx <= 0xFFFF, ErrorKind::kDimension,
          "frame size exceeds the header's 16-bit fields");
  for (const Tensor& f : video.frames)
    require(f.same_shape(f0), ErrorKind::kDimension,
            "all frames must share one size");

  StreamDocument doc;
  StreamHeader& h = doc.header;
  h.width = static_cast<std::uint16_t>(wpx);
  h.height = static_cast<std::uint16_t>(hpx);
  h.frame_count = static_cast<std::uint32_t>(video.frames.size());
  h.block_size = static_cast<std::uint8_t>(kBlockSize);
  h.stages = static_cast<std::uint8_t>(rarch_.stages);
  h.down = static_cast<std::uint8_t>(rarch_.down);
  h.code_ch = static_cast<std::uint16_t>(rarch_.code_ch);
  h.model_hash = m_.content_hash();
  h.deblock_enabled = cfg_.deblock.enabled;
  h.deblock_in_loop = cfg_.deblock.in_loop;
  h.deblock_beta = cfg_.deblock.beta8;
  h.motion_range = static_cast<std::uint8_t>(cfg_.motion_range);

  EncodeResult res;
  res.recon.width = wpx;
  res.recon.height = hpx;
  Tensor ref2, ref1;
  for (std::uint32_t i = 0; i < h.frame_count; ++i) {
    FrameRecord rec;
    rec.index = i;
    WalkResult wr =
        code_frame(i, h, i >= 2 ? &ref2 : nullptr, i >= 1 ? &ref1 : nullptr,
                   &video.frames[i], i >= 1 ? &video.frames[i - 1] : nullptr,
                   &rec, nullptr);
    advance_frame(h, std::move(wr.recon), wr.coded, res.recon, ref2, ref1);
    doc.frames.push_back(std::move(rec));
  }
  res.doc = std::move(doc);
  return res;
}

Video Codec::decode(const StreamDocument& doc) {
  const StreamHeader& h = doc.header;
  require(h.model_hash == m_.content_hash(), ErrorKind::kModelMismatch,
          "stream was produced by a different model");
  require(h.block_size == kBlockSize, ErrorKind::kFormat,
          "unsupported block size");
  require(h.down == rarch_.down && h.code_ch == rarch_.code_ch,
          ErrorKind::kModelMismatch,
          "stream code geometry does not match the model");
  require(h.width % h.block_size == 0 && h.height % h.block_size == 0,
          ErrorKind::kFormat, "frame size must be a block multiple");
  require(doc.frames.size() == h.frame_count, ErrorKind::kFormat,
          "frame record count does not match header");

  Video out;
  out.width = h.width;
  out.height = h.height;
  Tensor ref2, ref1;
  for (std::uint32_t i = 0; i < h.frame_count; ++i) {
    const FrameRecord& rec = doc.frames[i];
    require(rec.index == i, ErrorKind::kFormat, "frame index out of order");
    WalkResult wr = code_frame(i, h, i >= 2 ? &ref2 : nullptr,
                               i >= 1 ? &ref1 : nullptr, nullptr, nullptr,
                               nullptr, &rec);
    advance_frame(h, std::move(wr.recon), wr.coded, out, ref2, ref1);
  }
  return out;
}

}  // namespace pmvc
