#pragma once

#include <cstdint>
#include <vector>

#include "pmvc/bitstream.hpp"
#include "pmvc/deblock.hpp"
#include "pmvc/frame.hpp"
#include "pmvc/model.hpp"
#include "pmvc/modes.hpp"
#include "pmvc/predictor.hpp"
#include "pmvc/residual.hpp"

namespace pmvc {

struct CodecConfig {
  Thresholds thresholds;
  DeblockConfig deblock;
  int motion_range = 8;
  // Per-block stage budget for encoding; 0 keeps the model's default (8).
  int stages = 0;
};

struct EncodeResult {
  StreamDocument doc;
  // Encoder-side reconstruction; identical to what decode() produces from the
  // same document, because both run the exact same per-frame walk.
  Video recon;
};

// Block-based coder: the first two frames are coded without prediction, later
// frames run motion extension, hybrid prediction, skip/stage decisions, the
// stage-iterated residual coder, and boundary smoothing. Architecture and
// prediction mode are recovered from the model state's parameter names and
// shapes, so a checkpoint fully determines the network.
class Codec {
 public:
  explicit Codec(ModelState& m, const CodecConfig& cfg = {});

  EncodeResult encode(const Video& video);
  Video decode(const StreamDocument& doc);

  const PredictorArch& predictor_arch() const { return parch_; }
  const ResidualArch& residual_arch() const { return rarch_; }
  PredictionMode prediction_mode() const { return mode_; }
  const CodecConfig& config() const { return cfg_; }

 private:
  struct WalkResult {
    Tensor recon;                      // frame before boundary smoothing
    std::vector<std::uint8_t> coded;   // per block, 1 = coded this frame
  };

  // One frame, shared verbatim by encoder and decoder. Exactly one of
  // (original, out) / (in) is active: with `out` set the walker makes the
  // skip/stage decisions and fills the record; with `in` set it replays them.
  WalkResult code_frame(std::uint32_t index, const StreamHeader& h,
                        const Tensor* ref2, const Tensor* ref1,
                        const Tensor* original, const Tensor* original_prev,
                        FrameRecord* out, const FrameRecord* in);

  // Applies boundary smoothing per the header flags, emits the display frame,
  // and rolls the two-frame reference memory.
  void advance_frame(const StreamHeader& h, Tensor&& recon,
                     const std::vector<std::uint8_t>& coded, Video& out,
                     Tensor& ref2, Tensor& ref1);

  ModelState& m_;
  CodecConfig cfg_;
  PredictorArch parch_;
  ResidualArch rarch_;
  PredictionMode mode_;
};

}  // namespace pmvc
