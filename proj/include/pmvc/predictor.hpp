#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pmvc/model.hpp"
#include "pmvc/ops.hpp"
#include "pmvc/rng.hpp"
#include "pmvc/tape.hpp"

namespace pmvc {

// Which conditioning paths the predictor uses. Fixed per trained model and
// recoverable from a checkpoint via infer_prediction_mode.
enum class PredictionMode { kPMCNN, kSpatialPred, kTemporalPred, kNoPred };

std::string mode_name(PredictionMode mode);
PredictionMode mode_from_name(const std::string& name);

// Channel widths and repeat counts of the prediction network. full() is the
// reference configuration; desk() shrinks widths and depths for CPU-scale
// training while keeping every structural element in place.
struct PredictorArch {
  int enc_w1 = 96, enc_w2 = 192, enc_w3 = 192, enc_w4 = 96;
  int enc_res1 = 4, enc_res2 = 8, enc_res3 = 12;
  int lstm_hidden = 32;
  int dec_w1 = 32, dec_w2 = 32, dec_w3 = 16;
  int skip_w1 = 32, skip_w2 = 32, skip_w3 = 16;
  int dec_res1 = 12, dec_res2 = 8, dec_res3 = 4;
  int blk_count = 8;
  int blk_width = 64;  // split across the four dilated branches

  static PredictorArch full();
  static PredictorArch desk();
};

// Reconstructed blocks of the frame currently being coded. predict_block only
// queries the above-left / above / left positions that lie inside the frame;
// in raster order those are always already reconstructed.
class NeighborSource {
 public:
  virtual ~NeighborSource() = default;
  virtual bool has(int brow, int bcol) const = 0;
  virtual Tensor block(int brow, int bcol) const = 0;
};

// Creates every parameter the mode needs (weights, biases, BN buffers) by
// running shape-building passes over dummy input. Idempotent on a state that
// already holds the parameters.
void register_predictor(ModelState& m, const PredictorArch& arch,
                        PredictionMode mode, Rng& rng);

// Recover configuration from a loaded checkpoint (names and shapes only).
PredictorArch infer_predictor_arch(const ModelState& m);
PredictionMode infer_prediction_mode(const ModelState& m);

// Optional hook recording (label, shape) after each network stage.
using ShapeTrace = std::vector<std::pair<std::string, std::string>>;

// Frame-level path: shared conv trunk over the two previous reconstructions
// and the motion-extended frame, recurrent fusion, then the decoder with
// pooled skip connections off the extended frame. Returns the full-frame
// refinement map, same spatial size as the input, values in [-1, 1].
TValue frame_pass(Tape& t, ModelState& m, const PredictorArch& arch,
                  const TValue& rec_prev2, const TValue& rec_prev1,
                  const TValue& extended, nn::BnMode bn,
                  ShapeTrace* trace = nullptr);

// Block-level path: assemble the 64x64 context grid (above-left, above, left,
// refinement patch), run the dilated stack, crop the bottom-right quadrant.
// Per mode: kPMCNN uses all inputs; kTemporalPred returns the refinement
// patch; kSpatialPred uses neighbors only (zero fourth quadrant, zero fill,
// and a zero prediction for block (0,0)); kNoPred returns zeros.
TValue predict_block(Tape& t, ModelState& m, const PredictorArch& arch,
                     PredictionMode mode, const TValue& refinement,
                     const NeighborSource& neighbors, int brow, int bcol,
                     nn::BnMode bn, ShapeTrace* trace = nullptr);

}  // namespace pmvc
