#pragma once

#include <vector>

#include "pmvc/model.hpp"
#include "pmvc/ops.hpp"
#include "pmvc/rng.hpp"
#include "pmvc/tape.hpp"

namespace pmvc {

// Stage-iterated residual autoencoder. Three stride-2 convs interleaved with
// convolutional LSTMs map a 32x32x3 residual to a 4x4xC Tanh logit tensor,
// which the binarizer turns into the transmitted code; the synthesizer mirrors
// the path with deconvs. Recurrent state carries across stages within a block
// and resets between blocks. The residual is halved in front of the analyzer
// and each synthesized stage output is doubled (residuals live in [-2, 2]).
struct ResidualArch {
  int stages = 8;  // S
  int down = 8;    // D: code spatial factor; fixed at 8 by the 3-conv layout
  int code_ch = 32;  // C
  int w1 = 64, w2 = 128, w3 = 256, w4 = 256, w5 = 256;
  int tail = 32;  // width of the synthesizer's last upsampling stage

  static ResidualArch full();
  static ResidualArch desk();
};

void register_residual(ModelState& m, const ResidualArch& arch, Rng& rng);
ResidualArch infer_residual_arch(const ModelState& m);

// Recurrent state of one block's stage loop (analyzer pair + synthesizer pair).
struct ResidualStates {
  nn::LstmState a1, a2, s1, s2;
};
ResidualStates residual_zero_states(Tape& t, const ResidualArch& arch);

struct StageOut {
  TValue code;   // {32/D, 32/D, C}, values in {-1, +1}
  TValue synth;  // stage reconstruction, already scaled back to residual units
};

// Analyzer + binarizer + synthesizer for one stage. Differentiable when the
// tape records; stochastic=true applies the training-time quantization noise.
StageOut encode_stage(Tape& t, ModelState& m, const ResidualArch& arch,
                      const TValue& residual, ResidualStates& st,
                      bool stochastic, Rng* rng);

// Synthesizer chain only; what the decoder runs.
TValue decode_stage(Tape& t, ModelState& m, const ResidualArch& arch,
                    const TValue& code, ResidualStates& st);

// Inference-mode stepping encoder for one block: runs stages on demand so the
// caller can stop as soon as the reconstruction is good enough.
class BlockEncoder {
 public:
  BlockEncoder(ModelState& m, const ResidualArch& arch, const Tensor& r1);
  const Tensor& step();  // runs the next stage, returns its code
  const std::vector<Tensor>& codes() const { return codes_; }
  const Tensor& reconstruction() const { return recon_; }
  int stages_done() const { return static_cast<int>(codes_.size()); }
  int max_stages() const { return arch_.stages; }

 private:
  ModelState& m_;
  const ResidualArch& arch_;
  Tape tape_;
  ResidualStates st_;
  Tensor residual_;  // r^(n): what is left to code
  Tensor recon_;     // sum of synthesized stages
  std::vector<Tensor> codes_;
};

// Whole-block conveniences (inference mode, deterministic binarization).
struct BlockCode {
  std::vector<Tensor> codes;
  Tensor reconstruction;
};
BlockCode encode_block(ModelState& m, const ResidualArch& arch, const Tensor& r1,
                       int n_stages);
Tensor decode_block(ModelState& m, const ResidualArch& arch,
                    const std::vector<Tensor>& codes);

}  // namespace pmvc
