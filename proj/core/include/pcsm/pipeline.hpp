#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcsm/channel.hpp"
#include "pcsm/checkpoint.hpp"
#include "pcsm/codec.hpp"
#include "pcsm/config.hpp"
#include "pcsm/dataset.hpp"
#include "pcsm/geometry.hpp"
#include "pcsm/metrics.hpp"
#include "pcsm/shapes.hpp"

namespace pcsm {

// All learned components of one experiment. The global branch (camera
// predictor, renderer consumer, global encoder) exists only when
// cfg.dprime > 0.
struct SemModel {
  ExperimentConfig cfg;
  LocalEncoder local;
  std::optional<CameraPredictor> cameras;
  std::optional<GlobalEncoder> global;
  SemanticDecoder decoder;
  ChannelEncoder chan_enc;
  ChannelDecoder chan_dec;

  SemModel(const ExperimentConfig& cfg, Rng& rng);

  std::vector<nn::Parameter*> parameters();
  std::vector<nn::Parameter*> semantic_encoder_params();  // local + cameras + global
  std::vector<nn::Parameter*> stage2_params();            // channel pair + decoder
  void freeze_semantic_encoders();
};

// Snapshot carries every parameter, the stage tag, and the config.
Checkpoint snapshot(SemModel& model, const std::string& stage, const std::string& rng_state);
// Shape-checked weight load; the model keeps its own cfg.
void restore(SemModel& model, const Checkpoint& ckpt);

struct TrainResult {
  Checkpoint ckpt;
  std::vector<double> epoch_cd;  // mean training Chamfer per epoch
};

struct ToySplits {
  std::vector<PointCloud> train;
  std::vector<PointCloud> test;
};

// Procedural dataset: one cloud per shape, densely sampled, downsampled to
// cfg.n by farthest point sampling, normalized into [range_lo, range_hi].
// The test split redraws the surfaces with an offset seed.
ToySplits make_toy_splits(const ExperimentConfig& cfg);

// Stage 1: semantic codec alone (no channel, no noise), Chamfer loss, Adam.
// Stops early once the epoch mean falls below early_stop_ratio x the first
// epoch's mean, when that ratio is set. Throws on non-finite loss.
TrainResult train_stage1(const ExperimentConfig& cfg,
                         const std::vector<PointCloud>& train_clouds);

// Stage 2: loads stage-1 weights, freezes both semantic encoders, and trains
// the channel pair plus decoder under AWGN at cfg.snr_db.
TrainResult train_stage2(const ExperimentConfig& cfg, const Checkpoint& stage1,
                         const std::vector<PointCloud>& train_clouds);

// Control arm: the whole system trained from scratch with channel noise for
// epochs_stage1 + epochs_stage2 epochs.
TrainResult train_no_pretrain(const ExperimentConfig& cfg,
                              const std::vector<PointCloud>& train_clouds);

struct SweepRow {
  double snr_db = 0.0;
  int dprime = 0;
  RateReport rate;
  double d1_psnr_db = 0.0;  // test-set means of display-capped values
  double d2_psnr_db = 0.0;
  double d1_psnr_symmetric_db = 0.0;
  double d2_psnr_symmetric_db = 0.0;
  double cd = 0.0;
  double wall_ms = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

// One cloud through the transmit chain. Stage-1 checkpoints bypass the
// channel entirely (decoder reads the local rows directly); stage-2 runs
// normalize -> channel encode -> AWGN -> channel decode.
PointCloud reconstruct(SemModel& model, const std::string& stage, const PointCloud& cloud,
                       double snr_db, Rng& noise_rng);

// Fixed weights, one row per SNR, metrics averaged over the test set.
SweepResult evaluate_model(const Checkpoint& ckpt, const ExperimentConfig& cfg,
                           const std::vector<PointCloud>& test_clouds,
                           const std::vector<double>& snr_list);

// Evaluates one pre-trained checkpoint per global width (ckpts[i] trained at
// dprime_list[i]) and tables the noiseless test metrics; rows come back
// sorted by dprime, including the disabled-branch baseline when the list
// holds 0.
SweepResult ablate_global(const std::vector<Checkpoint>& ckpt_family,
                          const ExperimentConfig& base, const std::vector<int>& dprime_list,
                          const std::vector<PointCloud>& test_clouds);

// CSV with a schema tag line; doubles are rendered at full precision so
// equal runs emit identical bytes.
std::string sweep_csv(const SweepResult& result);
std::string ablation_csv(const SweepResult& result);

}  // namespace pcsm
