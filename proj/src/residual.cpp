#include "pmvc/residual.hpp"

#include "pmvc/error.hpp"
#include "pmvc/frame.hpp"
#include "pmvc/kernels.hpp"

namespace pmvc {
namespace {

using nn::Act;

enum class Init { kKaiming, kZeros };

struct RCtx {
  Tape& T;
  ModelState& M;
  bool build = false;
  Rng* rng = nullptr;
};

TValue pget(RCtx& c, const std::string& name, const std::vector<int>& shape,
            Init init, int fan_in = 1) {
  if (!c.M.has(name)) {
    require(c.build, ErrorKind::kModelMismatch,
            "checkpoint is missing parameter " + name);
    c.M.add(name, init == Init::kKaiming ? kaiming_init(shape, fan_in, *c.rng)
                                         : Tensor(shape));
  }
  Parameter& p = c.M.at(name);
  require(p.value.shape() == shape, ErrorKind::kModelMismatch,
          "parameter " + name + " has shape " + p.value.shape_str());
  return c.T.param(p);
}

TValue conv(RCtx& c, const TValue& x, const std::string& name, int k, int cout,
            int stride, Act act) {
  const int cin = x.t.dim(2);
  TValue w = pget(c, name + ".w", {k, k, cin, cout}, Init::kKaiming, k * k * cin);
  TValue b = pget(c, name + ".b", {cout}, Init::kZeros);
  return nn::activate(c.T, nn::conv2d_raw(c.T, x, w, &b, stride, 1), act);
}

TValue deconv(RCtx& c, const TValue& x, const std::string& name, int k, int cout,
              int stride, Act act) {
  const int cin = x.t.dim(2);
  TValue w = pget(c, name + ".w", {k, k, cout, cin}, Init::kKaiming, k * k * cin);
  TValue b = pget(c, name + ".b", {cout}, Init::kZeros);
  return nn::activate(c.T, nn::deconv2d_raw(c.T, x, w, &b, stride), act);
}

nn::LstmState lstm(RCtx& c, const TValue& x, const nn::LstmState& prev,
                   const std::string& name) {
  const int hidden = prev.h.t.dim(2);
  const int cin = x.t.dim(2) + hidden;
  TValue w = pget(c, name + ".w", {3, 3, cin, 4 * hidden}, Init::kKaiming,
                  3 * 3 * cin);
  TValue b = pget(c, name + ".b", {4 * hidden}, Init::kZeros);
  return nn::conv_lstm_step(c.T, x, prev, w, b);
}

// Tanh logits of one analyzer pass over the (already halved) residual.
TValue analyzer(RCtx& c, const ResidualArch& a, const TValue& half_res,
                ResidualStates& st) {
  TValue x = conv(c, half_res, "rc.ana.c1", 3, a.w1, 2, Act::kNone);
  st.a1 = lstm(c, x, st.a1, "rc.ana.l1");
  x = conv(c, st.a1.h, "rc.ana.c2", 3, a.w3, 2, Act::kNone);
  st.a2 = lstm(c, x, st.a2, "rc.ana.l2");
  x = conv(c, st.a2.h, "rc.ana.c3", 3, a.w5, 2, Act::kNone);
  return conv(c, x, "rc.ana.out", 1, a.code_ch, 1, Act::kTanh);
}

// Scaled stage reconstruction from one code tensor.
TValue synthesizer(RCtx& c, const ResidualArch& a, const TValue& code,
                   ResidualStates& st) {
  TValue x = conv(c, code, "rc.syn.in", 1, a.w5, 1, Act::kRelu);
  st.s1 = lstm(c, x, st.s1, "rc.syn.l1");
  x = deconv(c, st.s1.h, "rc.syn.d1", 3, a.w3, 2, Act::kRelu);
  st.s2 = lstm(c, x, st.s2, "rc.syn.l2");
  x = deconv(c, st.s2.h, "rc.syn.d2", 3, a.w1, 2, Act::kRelu);
  x = deconv(c, x, "rc.syn.d3", 3, a.tail, 2, Act::kRelu);
  x = conv(c, x, "rc.syn.out", 3, 3, 1, Act::kTanh);
  return nn::scale(c.T, x, 2.0f);
}

ResidualStates zero_states(Tape& t, const ResidualArch& a) {
  const int q = kBlockSize / 2, e = kBlockSize / 4;
  ResidualStates st;
  st.a1 = nn::lstm_zero_state(t, q, q, a.w2);  // after first stride-2 conv
  st.a2 = nn::lstm_zero_state(t, e, e, a.w4);  // after second
  st.s1 = nn::lstm_zero_state(t, kBlockSize / 8, kBlockSize / 8, a.w4);
  st.s2 = nn::lstm_zero_state(t, e, e, a.w2);
  return st;
}

}  // namespace

ResidualArch ResidualArch::full() { return ResidualArch{}; }

ResidualArch ResidualArch::desk() {
  ResidualArch a;
  a.w1 = 32;
  a.w2 = 48;
  a.w3 = 64;
  a.w4 = 64;
  a.w5 = 64;
  a.tail = 32;
  return a;
}

void register_residual(ModelState& m, const ResidualArch& arch, Rng& rng) {
  require(arch.down == 8, ErrorKind::kContract,
          "the three-conv analyzer fixes the code downsample factor at 8");
  require(arch.stages >= 1 && arch.stages <= 8, ErrorKind::kContract,
          "stage count must lie in [1, 8]");
  Tape t(false);
  RCtx c{t, m, true, &rng};
  ResidualStates st = zero_states(t, arch);
  TValue r = t.leaf(Tensor({kBlockSize, kBlockSize, 3}));
  TValue logits = analyzer(c, arch, r, st);
  TValue code = nn::binarize(t, logits, false, nullptr);
  (void)synthesizer(c, arch, code, st);
}

ResidualArch infer_residual_arch(const ModelState& m) {
  ResidualArch a;
  require(m.has("rc.ana.c1.w"), ErrorKind::kModelMismatch,
          "checkpoint lacks the residual coder");
  a.w1 = m.at("rc.ana.c1.w").value.dim(3);
  a.w2 = m.at("rc.ana.l1.b").value.dim(0) / 4;
  a.w3 = m.at("rc.ana.c2.w").value.dim(3);
  a.w4 = m.at("rc.ana.l2.b").value.dim(0) / 4;
  a.w5 = m.at("rc.ana.c3.w").value.dim(3);
  a.code_ch = m.at("rc.ana.out.w").value.dim(3);
  a.tail = m.at("rc.syn.d3.w").value.dim(2);
  return a;
}

ResidualStates residual_zero_states(Tape& t, const ResidualArch& arch) {
  return zero_states(t, arch);
}

StageOut encode_stage(Tape& t, ModelState& m, const ResidualArch& arch,
                      const TValue& residual, ResidualStates& st,
                      bool stochastic, Rng* rng) {
  RCtx c{t, m, false, nullptr};
  TValue half = nn::scale(t, residual, 0.5f);
  TValue logits = analyzer(c, arch, half, st);
  TValue code = nn::binarize(t, logits, stochastic, rng);
  TValue synth = synthesizer(c, arch, code, st);
  return {code, synth};
}

TValue decode_stage(Tape& t, ModelState& m, const ResidualArch& arch,
                    const TValue& code, ResidualStates& st) {
  RCtx c{t, m, false, nullptr};
  return synthesizer(c, arch, code, st);
}

BlockEncoder::BlockEncoder(ModelState& m, const ResidualArch& arch,
                           const Tensor& r1)
    : m_(m), arch_(arch), tape_(false), st_(zero_states(tape_, arch)),
      residual_(r1.clone()), recon_(r1.shape()) {
  require(r1.rank() == 3 && r1.dim(0) == kBlockSize && r1.dim(1) == kBlockSize,
          ErrorKind::kDimension, "residual block must be 32x32");
}

const Tensor& BlockEncoder::step() {
  require(stages_done() < arch_.stages, ErrorKind::kContract,
          "all stages already coded");
  StageOut out = encode_stage(tape_, m_, arch_, tape_.leaf(residual_), st_,
                              false, nullptr);
  kern::active().vadd(recon_.data(), out.synth.t.data(), recon_.data(),
                      recon_.size());
  kern::active().vsub(residual_.data(), out.synth.t.data(), residual_.data(),
                      residual_.size());
  codes_.push_back(out.code.t);
  return codes_.back();
}

BlockCode encode_block(ModelState& m, const ResidualArch& arch, const Tensor& r1,
                       int n_stages) {
  require(n_stages >= 0 && n_stages <= arch.stages, ErrorKind::kContract,
          "stage count out of range");
  BlockEncoder enc(m, arch, r1);
  for (int n = 0; n < n_stages; ++n) enc.step();
  return {enc.codes(), enc.reconstruction()};
}

Tensor decode_block(ModelState& m, const ResidualArch& arch,
                    const std::vector<Tensor>& codes) {
  Tape t(false);
  ResidualStates st = zero_states(t, arch);
  Tensor recon({kBlockSize, kBlockSize, 3});
  for (const Tensor& code : codes) {
    TValue synth = decode_stage(t, m, arch, t.leaf(code), st);
    kern::active().vadd(recon.data(), synth.t.data(), recon.data(),
                        recon.size());
  }
  return recon;
}

}  // namespace pmvc
