#include "pmvc/predictor.hpp"

#include <cmath>

#include "pmvc/error.hpp"
#include "pmvc/frame.hpp"

namespace pmvc {
namespace {

using nn::Act;
using nn::BnMode;

int scaled(int base, float s) {
  return std::max(4, static_cast<int>(std::lround(base * s)));
}

struct PCtx {
  Tape& T;
  ModelState& M;
  BnMode bn;
  bool build = false;
  Rng* rng = nullptr;
  ShapeTrace* trace = nullptr;

  void mark(const char* label, const TValue& v) {
    if (trace) trace->emplace_back(label, v.t.shape_str());
  }
};

enum class Init { kKaiming, kZeros, kOnes };

Parameter& fetch(PCtx& c, const std::string& name, const std::vector<int>& shape,
                 Init init, int fan_in) {
  if (!c.M.has(name)) {
    require(c.build, ErrorKind::kModelMismatch,
            "checkpoint is missing parameter " + name);
    Tensor t;
    switch (init) {
      case Init::kKaiming: t = kaiming_init(shape, fan_in, *c.rng); break;
      case Init::kZeros: t = Tensor(shape); break;
      case Init::kOnes: t = Tensor::full(shape, 1.0f); break;
    }
    c.M.add(name, t);
  }
  Parameter& p = c.M.at(name);
  require(p.value.shape() == shape, ErrorKind::kModelMismatch,
          "parameter " + name + " has shape " + p.value.shape_str());
  return p;
}

TValue pget(PCtx& c, const std::string& name, const std::vector<int>& shape,
            Init init, int fan_in = 1) {
  return c.T.param(fetch(c, name, shape, init, fan_in));
}

TValue bnorm(PCtx& c, const TValue& x, const std::string& name) {
  const int ch = x.t.dim(x.t.rank() - 1);
  TValue gamma = pget(c, name + ".gamma", {ch}, Init::kOnes);
  TValue beta = pget(c, name + ".beta", {ch}, Init::kZeros);
  Parameter& rm = fetch(c, name + ".running_mean", {ch}, Init::kZeros, 1);
  Parameter& rv = fetch(c, name + ".running_var", {ch}, Init::kOnes, 1);
  return nn::batchnorm(c.T, x, gamma, beta, rm.value, rv.value, c.bn);
}

TValue conv(PCtx& c, const TValue& x, const std::string& name, int k, int cout,
            int stride, int dilation, bool use_bn, Act act) {
  const int cin = x.t.dim(2);
  TValue w = pget(c, name + ".w", {k, k, cin, cout}, Init::kKaiming, k * k * cin);
  TValue out;
  if (use_bn) {
    out = nn::conv2d_raw(c.T, x, w, nullptr, stride, dilation);
    out = bnorm(c, out, name + ".bn");
  } else {
    TValue b = pget(c, name + ".b", {cout}, Init::kZeros);
    out = nn::conv2d_raw(c.T, x, w, &b, stride, dilation);
  }
  return nn::activate(c.T, out, act);
}

TValue deconv(PCtx& c, const TValue& x, const std::string& name, int k, int cout,
              int stride, bool use_bn, Act act) {
  const int cin = x.t.dim(2);
  TValue w = pget(c, name + ".w", {k, k, cout, cin}, Init::kKaiming, k * k * cin);
  TValue out;
  if (use_bn) {
    out = nn::deconv2d_raw(c.T, x, w, nullptr, stride);
    out = bnorm(c, out, name + ".bn");
  } else {
    TValue b = pget(c, name + ".b", {cout}, Init::kZeros);
    out = nn::deconv2d_raw(c.T, x, w, &b, stride);
  }
  return nn::activate(c.T, out, act);
}

// y = x + relu(conv_b(relu(bn(conv_a(x))))), widths preserved.
TValue resblock(PCtx& c, const TValue& x, const std::string& name) {
  const int w = x.t.dim(2);
  TValue y = conv(c, x, name + ".c1", 3, w, 1, 1, true, Act::kRelu);
  y = conv(c, y, name + ".c2", 3, w, 1, 1, false, Act::kRelu);
  return nn::add(c.T, x, y);
}

// Four parallel dilated 3x3 branches (dilation 1/2/4/8), each BN+ReLU at a
// quarter of the width, concatenated.
TValue convblock(PCtx& c, const TValue& x, const std::string& name, int width) {
  require(width % 4 == 0, ErrorKind::kContract,
          "dilated block width must be divisible by 4");
  const int per = width / 4;
  std::vector<TValue> branches;
  for (int d : {1, 2, 4, 8})
    branches.push_back(conv(c, x, name + ".dil" + std::to_string(d), 3, per, 1,
                            d, true, Act::kRelu));
  return nn::concat_ch(c.T, branches);
}

TValue trunk(PCtx& c, const PredictorArch& a, const TValue& f, bool mark) {
  TValue x = conv(c, f, "pm.enc.c1", 4, a.enc_w1, 2, 1, true, Act::kRelu);
  if (mark) c.mark("row2", x);
  for (int i = 0; i < a.enc_res1; ++i)
    x = resblock(c, x, "pm.enc.r1." + std::to_string(i));
  if (mark) c.mark("row3", x);
  x = conv(c, x, "pm.enc.c2", 4, a.enc_w2, 2, 1, true, Act::kRelu);
  if (mark) c.mark("row4", x);
  for (int i = 0; i < a.enc_res2; ++i)
    x = resblock(c, x, "pm.enc.r2." + std::to_string(i));
  if (mark) c.mark("row5", x);
  x = conv(c, x, "pm.enc.c3", 4, a.enc_w3, 2, 1, true, Act::kRelu);
  if (mark) c.mark("row6", x);
  for (int i = 0; i < a.enc_res3; ++i)
    x = resblock(c, x, "pm.enc.r3." + std::to_string(i));
  if (mark) c.mark("row7", x);
  x = conv(c, x, "pm.enc.c4", 4, a.enc_w4, 2, 1, true, Act::kRelu);
  if (mark) c.mark("row8", x);
  return x;
}

TValue skip_branch(PCtx& c, const TValue& extended, int pool_stride, int width,
                   const std::string& name, const char* pool_label,
                   const char* conv_label) {
  TValue pooled = nn::avg_pool(c.T, extended, 5, pool_stride);
  c.mark(pool_label, pooled);
  TValue s = conv(c, pooled, name, 4, width, 1, 1, true, Act::kRelu);
  c.mark(conv_label, s);
  return s;
}

TValue frame_pass_impl(PCtx& c, const PredictorArch& a, const TValue& rec_prev2,
                       const TValue& rec_prev1, const TValue& extended) {
  require(rec_prev2.t.same_shape(rec_prev1.t) &&
              rec_prev1.t.same_shape(extended.t) && extended.t.rank() == 3,
          ErrorKind::kDimension, "frame_pass inputs must share one shape");

  // Shared trunk, tied weights across the three frames.
  TValue f2 = trunk(c, a, rec_prev2, false);
  TValue f1 = trunk(c, a, rec_prev1, false);
  TValue fe = trunk(c, a, extended, true);

  // Recurrent fusion over the ordered feature sequence, zero initial state.
  const int gh = fe.t.dim(0), gw = fe.t.dim(1);
  const int cin = fe.t.dim(2) + a.lstm_hidden;
  TValue lw = pget(c, "pm.lstm.w", {3, 3, cin, 4 * a.lstm_hidden}, Init::kKaiming,
                   3 * 3 * cin);
  TValue lb = pget(c, "pm.lstm.b", {4 * a.lstm_hidden}, Init::kZeros);
  nn::LstmState st = nn::lstm_zero_state(c.T, gh, gw, a.lstm_hidden);
  for (const TValue* f : {&f2, &f1, &fe})
    st = nn::conv_lstm_step(c.T, *f, st, lw, lb);
  TValue x = st.h;
  c.mark("row9", x);

  x = deconv(c, x, "pm.dec.d1", 5, a.dec_w1, 2, true, Act::kRelu);
  c.mark("row10", x);
  TValue s1 = skip_branch(c, extended, 8, a.skip_w1, "pm.dec.s1", "row11",
                          "row12");
  x = nn::concat_ch(c.T, {x, s1});
  c.mark("row13", x);
  for (int i = 0; i < a.dec_res1; ++i)
    x = resblock(c, x, "pm.dec.r1." + std::to_string(i));
  c.mark("row14", x);

  x = deconv(c, x, "pm.dec.d2", 5, a.dec_w2, 2, true, Act::kRelu);
  c.mark("row15", x);
  TValue s2 = skip_branch(c, extended, 4, a.skip_w2, "pm.dec.s2", "row16",
                          "row17");
  x = nn::concat_ch(c.T, {x, s2});
  c.mark("row18", x);
  for (int i = 0; i < a.dec_res2; ++i)
    x = resblock(c, x, "pm.dec.r2." + std::to_string(i));
  c.mark("row19", x);

  x = deconv(c, x, "pm.dec.d3", 5, a.dec_w3, 2, true, Act::kRelu);
  c.mark("row20", x);
  TValue s3 = skip_branch(c, extended, 2, a.skip_w3, "pm.dec.s3", "row21",
                          "row22");
  x = nn::concat_ch(c.T, {x, s3});
  c.mark("row23", x);
  for (int i = 0; i < a.dec_res3; ++i)
    x = resblock(c, x, "pm.dec.r3." + std::to_string(i));
  c.mark("row24", x);

  x = deconv(c, x, "pm.dec.d4", 5, 3, 2, true, Act::kTanh);
  c.mark("row25", x);
  x = nn::concat_ch(c.T, {extended, x});
  x = conv(c, x, "pm.dec.out", 4, 3, 1, 1, false, Act::kTanh);
  c.mark("row26", x);
  return x;
}

// 2x2 spatial assembly of four equally sized blocks.
TValue grid2x2(Tape& T, const TValue& q1, const TValue& q2, const TValue& q3,
               const TValue& q4) {
  const int s = q1.t.dim(0), c = q1.t.dim(2);
  Tensor grid({2 * s, 2 * s, c});
  paste_block(grid, q1.t, 0, 0);
  paste_block(grid, q2.t, 0, 1);
  paste_block(grid, q3.t, 1, 0);
  paste_block(grid, q4.t, 1, 1);
  const bool needs = T.needs(q1) || T.needs(q2) || T.needs(q3) || T.needs(q4);
  if (!T.recording() || !needs) return T.emit(std::move(grid), false, nullptr);
  const int ids[4] = {q1.id, q2.id, q3.id, q4.id};
  return T.emit(std::move(grid), true,
                [ids, s](Tape& t, const Tensor& go) {
                  const int pos[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
                  for (int k = 0; k < 4; ++k)
                    if (t.needs(ids[k]))
                      t.accum(ids[k], extract_block(go, pos[k][0], pos[k][1], s));
                });
}

TValue block_net(PCtx& c, const PredictorArch& a, const TValue& grid) {
  TValue x = grid;
  for (int i = 0; i < a.blk_count; ++i)
    x = convblock(c, x, "pm.blk.b" + std::to_string(i), a.blk_width);
  x = conv(c, x, "pm.blk.out", 1, 3, 1, 1, false, Act::kTanh);
  c.mark("row27", x);
  TValue out = nn::crop(c.T, x, x.t.dim(0) / 2, x.t.dim(1) / 2, x.t.dim(0) / 2,
                        x.t.dim(1) / 2);
  c.mark("row28", out);
  return out;
}

TValue refinement_patch(PCtx& c, const TValue& refinement, int brow, int bcol) {
  return nn::crop(c.T, refinement, brow * kBlockSize, bcol * kBlockSize,
                  kBlockSize, kBlockSize);
}

TValue predict_block_impl(PCtx& c, const PredictorArch& a, PredictionMode mode,
                          const TValue& refinement,
                          const NeighborSource& neighbors, int brow, int bcol) {
  auto zero_block = [&] { return c.T.leaf(Tensor({kBlockSize, kBlockSize, 3})); };
  switch (mode) {
    case PredictionMode::kNoPred:
      return zero_block();
    case PredictionMode::kTemporalPred:
      return refinement_patch(c, refinement, brow, bcol);
    default:
      break;
  }
  const bool spatial_only = mode == PredictionMode::kSpatialPred;
  if (spatial_only && brow == 0 && bcol == 0) return zero_block();

  auto slot = [&](int r, int col) {
    if (r >= 0 && col >= 0 && neighbors.has(r, col))
      return c.T.leaf(neighbors.block(r, col));
    if (spatial_only) return zero_block();
    // Temporal fill: refinement patch at the position clamped into the frame.
    return refinement_patch(c, refinement, std::max(r, 0), std::max(col, 0));
  };
  TValue q1 = slot(brow - 1, bcol - 1);
  TValue q2 = slot(brow - 1, bcol);
  TValue q3 = slot(brow, bcol - 1);
  TValue q4 = spatial_only ? zero_block()
                           : refinement_patch(c, refinement, brow, bcol);
  TValue grid = grid2x2(c.T, q1, q2, q3, q4);
  return block_net(c, a, grid);
}

}  // namespace

std::string mode_name(PredictionMode mode) {
  switch (mode) {
    case PredictionMode::kPMCNN: return "pmcnn";
    case PredictionMode::kSpatialPred: return "spatial";
    case PredictionMode::kTemporalPred: return "temporal";
    case PredictionMode::kNoPred: return "nopred";
  }
  fail(ErrorKind::kContract, "unreachable mode");
}

PredictionMode mode_from_name(const std::string& name) {
  if (name == "pmcnn") return PredictionMode::kPMCNN;
  if (name == "spatial") return PredictionMode::kSpatialPred;
  if (name == "temporal") return PredictionMode::kTemporalPred;
  if (name == "nopred") return PredictionMode::kNoPred;
  fail(ErrorKind::kUsage, "unknown prediction mode: " + name);
}

PredictorArch PredictorArch::full() { return PredictorArch{}; }

PredictorArch PredictorArch::desk() {
  PredictorArch a;
  const float s = 0.25f;
  a.enc_w1 = scaled(a.enc_w1, s);
  a.enc_w2 = scaled(a.enc_w2, s);
  a.enc_w3 = scaled(a.enc_w3, s);
  a.enc_w4 = scaled(a.enc_w4, s);
  a.lstm_hidden = scaled(a.lstm_hidden, s);
  a.dec_w1 = scaled(a.dec_w1, s);
  a.dec_w2 = scaled(a.dec_w2, s);
  a.dec_w3 = scaled(a.dec_w3, s);
  a.skip_w1 = scaled(a.skip_w1, s);
  a.skip_w2 = scaled(a.skip_w2, s);
  a.skip_w3 = scaled(a.skip_w3, s);
  a.enc_res1 = 1;
  a.enc_res2 = 2;
  a.enc_res3 = 2;
  a.dec_res1 = 2;
  a.dec_res2 = 2;
  a.dec_res3 = 1;
  a.blk_count = 4;
  a.blk_width = 32;
  return a;
}

void register_predictor(ModelState& m, const PredictorArch& arch,
                        PredictionMode mode, Rng& rng) {
  if (mode == PredictionMode::kNoPred) return;
  Tape t(false);
  PCtx c{t, m, BnMode::kInfer, true, &rng, nullptr};
  const bool frame_path = mode == PredictionMode::kPMCNN ||
                          mode == PredictionMode::kTemporalPred;
  const bool block_path = mode == PredictionMode::kPMCNN ||
                          mode == PredictionMode::kSpatialPred;
  TValue dummy = t.leaf(Tensor({2 * kBlockSize, 2 * kBlockSize, 3}));
  TValue refinement = dummy;
  if (frame_path) refinement = frame_pass_impl(c, arch, dummy, dummy, dummy);
  if (block_path) {
    struct Empty : NeighborSource {
      bool has(int, int) const override { return false; }
      Tensor block(int, int) const override {
        fail(ErrorKind::kContract, "no neighbors in build pass");
      }
    } none;
    (void)predict_block_impl(c, arch, mode, refinement, none, 1, 1);
  }
}

PredictorArch infer_predictor_arch(const ModelState& m) {
  PredictorArch a;
  auto count = [&](const std::string& prefix) {
    int i = 0;
    while (m.has(prefix + std::to_string(i) + ".c1.w")) ++i;
    return i;
  };
  if (m.has("pm.enc.c1.w")) {
    a.enc_w1 = m.at("pm.enc.c1.w").value.dim(3);
    a.enc_w2 = m.at("pm.enc.c2.w").value.dim(3);
    a.enc_w3 = m.at("pm.enc.c3.w").value.dim(3);
    a.enc_w4 = m.at("pm.enc.c4.w").value.dim(3);
    a.enc_res1 = count("pm.enc.r1.");
    a.enc_res2 = count("pm.enc.r2.");
    a.enc_res3 = count("pm.enc.r3.");
    a.lstm_hidden = m.at("pm.lstm.b").value.dim(0) / 4;
    a.dec_w1 = m.at("pm.dec.d1.w").value.dim(2);
    a.dec_w2 = m.at("pm.dec.d2.w").value.dim(2);
    a.dec_w3 = m.at("pm.dec.d3.w").value.dim(2);
    a.skip_w1 = m.at("pm.dec.s1.w").value.dim(3);
    a.skip_w2 = m.at("pm.dec.s2.w").value.dim(3);
    a.skip_w3 = m.at("pm.dec.s3.w").value.dim(3);
    a.dec_res1 = count("pm.dec.r1.");
    a.dec_res2 = count("pm.dec.r2.");
    a.dec_res3 = count("pm.dec.r3.");
  }
  if (m.has("pm.blk.out.w")) {
    int i = 0;
    while (m.has("pm.blk.b" + std::to_string(i) + ".dil1.w")) ++i;
    a.blk_count = i;
    a.blk_width = m.at("pm.blk.b0.dil1.w").value.dim(3) * 4;
  }
  return a;
}

PredictionMode infer_prediction_mode(const ModelState& m) {
  const bool frame_path = m.has("pm.enc.c1.w");
  const bool block_path = m.has("pm.blk.out.w");
  if (frame_path && block_path) return PredictionMode::kPMCNN;
  if (frame_path) return PredictionMode::kTemporalPred;
  if (block_path) return PredictionMode::kSpatialPred;
  return PredictionMode::kNoPred;
}

TValue frame_pass(Tape& t, ModelState& m, const PredictorArch& arch,
                  const TValue& rec_prev2, const TValue& rec_prev1,
                  const TValue& extended, nn::BnMode bn, ShapeTrace* trace) {
  PCtx c{t, m, bn, false, nullptr, trace};
  return frame_pass_impl(c, arch, rec_prev2, rec_prev1, extended);
}

TValue predict_block(Tape& t, ModelState& m, const PredictorArch& arch,
                     PredictionMode mode, const TValue& refinement,
                     const NeighborSource& neighbors, int brow, int bcol,
                     nn::BnMode bn, ShapeTrace* trace) {
  PCtx c{t, m, bn, false, nullptr, trace};
  return predict_block_impl(c, arch, mode, refinement, neighbors, brow, bcol);
}

}  // namespace pmvc
