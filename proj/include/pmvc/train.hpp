#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmvc/config.hpp"
#include "pmvc/model.hpp"
#include "pmvc/predictor.hpp"
#include "pmvc/residual.hpp"
#include "pmvc/synth.hpp"

namespace pmvc {

struct PhaseSchedule {
  int epochs = 0;
  double lr = 1e-3;
  double decay = 0.1;  // multiplied in every decay_every epochs
  int decay_every = 5;
};

// Desk-scale three-phase schedule: the residual coder pretrains on random
// blocks with the prediction forced to zero, the prediction network pretrains
// on its own loss, then both tune jointly on the summed loss at a lower rate.
//
// Conditioning uses ground-truth previous frames and neighbor blocks (teacher
// forcing) instead of the codec's own reconstructions; sequential closed-loop
// reconstruction inside the training loop would dominate the budget, so the
// train/eval mismatch is accepted and measured at evaluation time.
struct TrainConfig {
  std::uint64_t seed = 1;
  PredictionMode mode = PredictionMode::kPMCNN;
  PredictorArch predictor_arch = PredictorArch::desk();
  ResidualArch residual_arch = ResidualArch::desk();
  SyntheticSpec data;  // 200 sequences x 8 frames at 96x64 by default
  int batch = 8;
  double val_fraction = 0.1;
  // Optional extra pressure keeping every stage-prefix reconstruction close to
  // the first residual (helps stage-count monotonicity); 0 disables it.
  double aux_stage_weight = 0.0;
  int residual_blocks_per_seq = 2;  // phase-1 samples per sequence per epoch
  bool augment = true;              // horizontal flip + channel jitter
  int motion_range = 8;
  PhaseSchedule residual_phase{10, 1e-3, 0.1, 5};
  PhaseSchedule predictor_phase{20, 1e-3, 0.1, 5};
  PhaseSchedule joint_phase{5, 1e-4, 0.1, 5};
};

// Reads keys seed, mode, batch, val_fraction, aux_stage_weight,
// residual_blocks_per_seq, augment, motion_range, arch (desk|full),
// data_{width,height,frames,sequences,seed}, and
// {residual,predictor,joint}_{epochs,lr,decay,decay_every}.
TrainConfig train_config_from(const Config& c);

struct LogRow {
  long step = 0;
  std::string phase;
  double lvcnn = 0.0;
  double lres = 0.0;
  double ltotal = 0.0;
  double lr = 0.0;
};

struct PhaseReport {
  std::string name;
  double val_before = 0.0;
  double val_after = 0.0;
};

struct TrainResult {
  ModelState model;
  std::vector<PhaseReport> phases;
  std::vector<LogRow> log;
  double final_val = 0.0;
};

TrainResult train(const TrainConfig& cfg);

// CSV with header "step,phase,lvcnn,lres,ltotal,lr".
std::string train_log_csv(const std::vector<LogRow>& log);

}  // namespace pmvc
