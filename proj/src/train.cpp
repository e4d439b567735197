#include "pmvc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pmvc/error.hpp"
#include "pmvc/frame.hpp"
#include "pmvc/motion.hpp"
#include "pmvc/ops.hpp"

namespace pmvc {

namespace {

struct RngUrbg {
  Rng& rng;
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ull; }
  result_type operator()() { return rng.next_u64(); }
};

struct Augment {
  bool flip = false;
  float jitter[3] = {0, 0, 0};
};

Tensor apply_augment(const Tensor& frame, const Augment& a) {
  if (!a.flip && a.jitter[0] == 0 && a.jitter[1] == 0 && a.jitter[2] == 0)
    return frame;
  const int h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
  Tensor out(frame.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sx = a.flip ? w - 1 - x : x;
      for (int ch = 0; ch < c; ++ch) {
        const float v =
            frame.data()[(static_cast<std::size_t>(y) * w + sx) * c + ch] +
            a.jitter[ch];
        out.data()[(static_cast<std::size_t>(y) * w + x) * c + ch] =
            std::clamp(v, -1.0f, 1.0f);
      }
    }
  return out;
}

Augment draw_augment(Rng& rng, bool enabled) {
  Augment a;
  if (!enabled) return a;
  a.flip = rng.bernoulli(0.5);
  for (float& j : a.jitter)
    j = static_cast<float>(rng.uniform() * 0.125 - 0.0625);
  return a;
}

// Every in-frame block of the (ground-truth) current frame is available:
// teacher forcing replaces reconstructed neighbors with originals.
class FullSource final : public NeighborSource {
 public:
  FullSource(const Tensor& frame, int bx_count, int by_count)
      : frame_(frame), bx_count_(bx_count), by_count_(by_count) {}
  bool has(int brow, int bcol) const override {
    return brow >= 0 && bcol >= 0 && brow < by_count_ && bcol < bx_count_;
  }
  Tensor block(int brow, int bcol) const override {
    return extract_block(frame_, brow, bcol, kBlockSize);
  }

 private:
  const Tensor& frame_;
  int bx_count_, by_count_;
};

struct BlockSample {
  int seq = 0, frame = 0, brow = 0, bcol = 0;
  Augment aug;
};

struct FrameSample {
  int seq = 0, frame = 0;
  Augment aug;
};

enum class PhaseKind { kResidual, kPredictor, kJoint };

struct StepLoss {
  TValue total;
  double lvcnn = 0.0, lres = 0.0;
};

// Mean over stages of MSE(r^(n), synth^(n)), full stage budget, sequential
// residual update. With aux_weight > 0 adds the mean prefix-reconstruction
// error against r^(1).
TValue residual_loss(Tape& t, ModelState& m, const ResidualArch& arch,
                     const TValue& r1, bool stochastic, Rng* rng,
                     double aux_weight) {
  ResidualStates st = residual_zero_states(t, arch);
  TValue r = r1;
  TValue loss, cum, aux;
  for (int n = 0; n < arch.stages; ++n) {
    const StageOut so = encode_stage(t, m, arch, r, st, stochastic, rng);
    const TValue ln = nn::mse(t, r, so.synth);
    loss = n == 0 ? ln : nn::add(t, loss, ln);
    if (aux_weight > 0) {
      cum = n == 0 ? so.synth : nn::add(t, cum, so.synth);
      const TValue an = nn::mse(t, r1, cum);
      aux = n == 0 ? an : nn::add(t, aux, an);
    }
    r = nn::sub(t, r, so.synth);
  }
  loss = nn::scale(t, loss, 1.0f / static_cast<float>(arch.stages));
  if (aux_weight > 0)
    loss = nn::add(t, loss,
                   nn::scale(t, aux, static_cast<float>(aux_weight) /
                                         static_cast<float>(arch.stages)));
  return loss;
}

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg)
      : cfg_(cfg), dataset_(generate_dataset(cfg.data)) {
    const int n = static_cast<int>(dataset_.size());
    int n_val = static_cast<int>(std::lround(n * cfg.val_fraction));
    n_val = std::clamp(n_val, 1, n - 1);
    n_train_ = n - n_val;
    Rng init = Rng(cfg_.seed).split(7);
    register_residual(model_, cfg_.residual_arch, init);
    register_predictor(model_, cfg_.predictor_arch, cfg_.mode, init);
  }

  TrainResult run() {
    long gstep = 0;
    run_phase("residual", cfg_.residual_phase, PhaseKind::kResidual, gstep);
    if (cfg_.mode != PredictionMode::kNoPred)
      run_phase("predictor", cfg_.predictor_phase, PhaseKind::kPredictor, gstep);
    run_phase("joint", cfg_.joint_phase, PhaseKind::kJoint, gstep);

    TrainResult res;
    res.model = std::move(model_);
    res.phases = std::move(reports_);
    res.log = std::move(log_);
    res.final_val = res.phases.empty() ? 0.0 : res.phases.back().val_after;
    return res;
  }

 private:
  const Video& video_of(int seq) const {
    return dataset_[static_cast<std::size_t>(seq)].video;
  }
  int frames_per_seq() const { return cfg_.data.frame_count; }
  int bx_count() const { return cfg_.data.width / kBlockSize; }
  int by_count() const { return cfg_.data.height / kBlockSize; }
  bool temporal_mode() const {
    return cfg_.mode == PredictionMode::kPMCNN ||
           cfg_.mode == PredictionMode::kTemporalPred;
  }

  // Loss of one sample. For kResidual the frame sample degenerates to the
  // listed block with zero prediction.
  StepLoss sample_loss(Tape& t, PhaseKind kind, const BlockSample& bs,
                       const FrameSample& fs, bool stochastic, Rng* rng,
                       nn::BnMode bn) {
    StepLoss out;
    if (kind == PhaseKind::kResidual) {
      const Tensor frame = apply_augment(video_of(bs.seq).frames[bs.frame], bs.aug);
      const Tensor block = extract_block(frame, bs.brow, bs.bcol, kBlockSize);
      const TValue r1 = t.leaf(block);
      out.total = residual_loss(t, model_, cfg_.residual_arch, r1, stochastic,
                                rng, cfg_.aux_stage_weight);
      out.lres = static_cast<double>(out.total.t.data()[0]);
      return out;
    }

    const Video& video = video_of(fs.seq);
    const Tensor prev2 = apply_augment(video.frames[fs.frame - 2], fs.aug);
    const Tensor prev1 = apply_augment(video.frames[fs.frame - 1], fs.aug);
    const Tensor cur = apply_augment(video.frames[fs.frame], fs.aug);

    TValue refinement;
    if (temporal_mode()) {
      const MotionField field = estimate_motion(prev2, prev1, cfg_.motion_range);
      Tensor extended = extend_motion(prev1, field);
      refinement = frame_pass(t, model_, cfg_.predictor_arch, t.leaf(prev2),
                              t.leaf(prev1), t.leaf(std::move(extended)), bn);
    } else {
      refinement = t.leaf(Tensor({cfg_.data.height, cfg_.data.width, 3}));
    }

    FullSource src(cur, bx_count(), by_count());
    const int blocks = bx_count() * by_count();
    TValue lvcnn, lres;
    for (int brow = 0; brow < by_count(); ++brow)
      for (int bcol = 0; bcol < bx_count(); ++bcol) {
        const TValue pred = predict_block(t, model_, cfg_.predictor_arch,
                                          cfg_.mode, refinement, src, brow,
                                          bcol, bn);
        const Tensor orig = extract_block(cur, brow, bcol, kBlockSize);
        const TValue lv = nn::mse(t, pred, t.leaf(orig));
        lvcnn = (brow == 0 && bcol == 0) ? lv : nn::add(t, lvcnn, lv);
        if (kind == PhaseKind::kJoint) {
          const TValue r1 = nn::sub(t, t.leaf(orig), pred);
          const TValue lr = residual_loss(t, model_, cfg_.residual_arch, r1,
                                          stochastic, rng, cfg_.aux_stage_weight);
          lres = (brow == 0 && bcol == 0) ? lr : nn::add(t, lres, lr);
        }
      }
    lvcnn = nn::scale(t, lvcnn, 1.0f / static_cast<float>(blocks));
    out.lvcnn = static_cast<double>(lvcnn.t.data()[0]);
    if (kind == PhaseKind::kJoint) {
      lres = nn::scale(t, lres, 1.0f / static_cast<float>(blocks));
      out.lres = static_cast<double>(lres.t.data()[0]);
      out.total = nn::add(t, lvcnn, lres);
    } else {
      out.total = lvcnn;
    }
    return out;
  }

  // Deterministic loss over the frozen validation batch: no augmentation, no
  // quantization noise, frozen-statistics normalization.
  double validation_loss(PhaseKind kind) {
    const int n_samples = cfg_.batch;
    double total = 0.0;
    for (int i = 0; i < n_samples; ++i) {
      const int seq = n_train_ + i % (static_cast<int>(dataset_.size()) - n_train_);
      Tape t(false);
      BlockSample bs;
      FrameSample fs;
      if (kind == PhaseKind::kResidual) {
        bs.seq = seq;
        bs.frame = i % frames_per_seq();
        bs.brow = i % by_count();
        bs.bcol = i % bx_count();
      } else {
        fs.seq = seq;
        fs.frame = 2 + i % (frames_per_seq() - 2);
      }
      const StepLoss sl = sample_loss(t, kind, bs, fs, /*stochastic=*/false,
                                      nullptr, nn::BnMode::kInfer);
      total += static_cast<double>(sl.total.t.data()[0]);
    }
    return total / n_samples;
  }

  void run_phase(const char* name, const PhaseSchedule& sched, PhaseKind kind,
                 long& gstep) {
    require(sched.lr > 0 && sched.decay > 0 && sched.decay <= 1.0 &&
                sched.decay_every >= 1,
            ErrorKind::kContract, "phase schedule out of range");
    PhaseReport rep{name, validation_loss(kind), 0.0};
    Rng phase_rng = Rng(cfg_.seed).split(0x100 + static_cast<int>(kind));
    for (int epoch = 0; epoch < sched.epochs; ++epoch) {
      const double lr =
          sched.lr * std::pow(sched.decay, epoch / sched.decay_every);
      Rng erng = phase_rng.split(epoch);

      std::vector<BlockSample> blocks;
      std::vector<FrameSample> frames;
      if (kind == PhaseKind::kResidual) {
        for (int s = 0; s < n_train_; ++s)
          for (int k = 0; k < cfg_.residual_blocks_per_seq; ++k) {
            BlockSample bs;
            bs.seq = s;
            bs.frame = erng.uniform_int(0, frames_per_seq() - 1);
            bs.brow = erng.uniform_int(0, by_count() - 1);
            bs.bcol = erng.uniform_int(0, bx_count() - 1);
            bs.aug = draw_augment(erng, cfg_.augment);
            blocks.push_back(bs);
          }
        RngUrbg g{erng};
        std::shuffle(blocks.begin(), blocks.end(), g);
      } else {
        for (int s = 0; s < n_train_; ++s)
          for (int f = 2; f < frames_per_seq(); ++f) {
            FrameSample fs;
            fs.seq = s;
            fs.frame = f;
            fs.aug = draw_augment(erng, cfg_.augment);
            frames.push_back(fs);
          }
        RngUrbg g{erng};
        std::shuffle(frames.begin(), frames.end(), g);
      }
      const std::size_t n_samples =
          kind == PhaseKind::kResidual ? blocks.size() : frames.size();
      require(n_samples > 0, ErrorKind::kContract, "phase has no samples");

      Rng noise_rng = erng.split(0xBB);
      for (std::size_t at = 0; at < n_samples; at += cfg_.batch) {
        const std::size_t chunk =
            std::min<std::size_t>(cfg_.batch, n_samples - at);
        model_.zero_grads();
        double lv = 0, lrs = 0, lt = 0;
        for (std::size_t k = 0; k < chunk; ++k) {
          Tape t(true);
          const StepLoss sl =
              sample_loss(t, kind,
                          kind == PhaseKind::kResidual ? blocks[at + k]
                                                       : BlockSample{},
                          kind != PhaseKind::kResidual ? frames[at + k]
                                                       : FrameSample{},
                          /*stochastic=*/true, &noise_rng, nn::BnMode::kTrain);
          lv += sl.lvcnn;
          lrs += sl.lres;
          lt += static_cast<double>(sl.total.t.data()[0]);
          t.backward(nn::scale(t, sl.total, 1.0f / static_cast<float>(chunk)));
        }
        adam_step(model_, static_cast<float>(lr));
        LogRow row;
        row.step = ++gstep;
        row.phase = name;
        row.lvcnn = lv / chunk;
        row.lres = lrs / chunk;
        row.ltotal = lt / chunk;
        row.lr = lr;
        log_.push_back(std::move(row));
      }
    }
    rep.val_after = validation_loss(kind);
    reports_.push_back(std::move(rep));
  }

  TrainConfig cfg_;
  std::vector<LabeledVideo> dataset_;
  int n_train_ = 0;
  ModelState model_;
  std::vector<PhaseReport> reports_;
  std::vector<LogRow> log_;
};

}  // namespace

TrainConfig train_config_from(const Config& c) {
  TrainConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(c.get_int("seed", 1));
  cfg.mode = mode_from_name(c.get_str("mode", "pmcnn"));
  const std::string arch = c.get_str("arch", "desk");
  if (arch == "full") {
    cfg.predictor_arch = PredictorArch::full();
    cfg.residual_arch = ResidualArch::full();
  } else {
    require(arch == "desk", ErrorKind::kFormat,
            "config key 'arch' must be desk or full");
  }
  cfg.data.width = c.get_int("data_width", cfg.data.width);
  cfg.data.height = c.get_int("data_height", cfg.data.height);
  cfg.data.frame_count = c.get_int("data_frames", cfg.data.frame_count);
  cfg.data.sequence_count = c.get_int("data_sequences", cfg.data.sequence_count);
  cfg.data.seed = static_cast<std::uint64_t>(
      c.get_int("data_seed", static_cast<int>(cfg.seed)));
  cfg.batch = c.get_int("batch", cfg.batch);
  cfg.val_fraction = c.get_real("val_fraction", cfg.val_fraction);
  cfg.aux_stage_weight = c.get_real("aux_stage_weight", cfg.aux_stage_weight);
  cfg.residual_blocks_per_seq =
      c.get_int("residual_blocks_per_seq", cfg.residual_blocks_per_seq);
  cfg.augment = c.get_flag("augment", cfg.augment);
  cfg.motion_range = c.get_int("motion_range", cfg.motion_range);
  const auto phase = [&](const char* prefix, PhaseSchedule& s) {
    const std::string p = prefix;
    s.epochs = c.get_int(p + "_epochs", s.epochs);
    s.lr = c.get_real(p + "_lr", s.lr);
    s.decay = c.get_real(p + "_decay", s.decay);
    s.decay_every = c.get_int(p + "_decay_every", s.decay_every);
  };
  phase("residual", cfg.residual_phase);
  phase("predictor", cfg.predictor_phase);
  phase("joint", cfg.joint_phase);

  require(cfg.batch >= 1, ErrorKind::kFormat, "batch must be >= 1");
  require(cfg.data.frame_count >= 3, ErrorKind::kFormat,
          "training needs at least 3 frames per sequence");
  require(cfg.data.width % kBlockSize == 0 && cfg.data.height % kBlockSize == 0,
          ErrorKind::kFormat, "data size must be a block multiple");
  require(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0, ErrorKind::kFormat,
          "val_fraction must be in (0, 1)");
  return cfg;
}

TrainResult train(const TrainConfig& cfg) {
  require(cfg.data.sequence_count >= 2, ErrorKind::kContract,
          "training needs at least 2 sequences (1 held out)");
  Trainer trainer(cfg);
  return trainer.run();
}

std::string train_log_csv(const std::vector<LogRow>& log) {
  std::string out = "step,phase,lvcnn,lres,ltotal,lr\n";
  char line[192];
  for (const LogRow& r : log) {
    std::snprintf(line, sizeof line, "%ld,%s,%.9g,%.9g,%.9g,%.9g\n", r.step,
                  r.phase.c_str(), r.lvcnn, r.lres, r.ltotal, r.lr);
    out += line;
  }
  return out;
}

}  // namespace pmvc
