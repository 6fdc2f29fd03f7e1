#pragma once

#include <cstdint>
#include <string>

namespace pcsm {

// Everything one experiment needs, round-trippable through a sectioned
// key = value text file. parse_config(render_config(cfg)) == cfg holds
// field-for-field.
struct ExperimentConfig {
  // [model]
  int n = 1024;           // points per cloud
  int s = 16;             // patches (K = 2n/s points each)
  int d = 8;              // local feature width
  int dprime = 4;         // global feature width, 0 disables the branch
  int views = 4;          // rendered projections
  int image_size = 64;    // square projection images
  int feature_width = 128;  // per-view CNN feature
  double splat_sigma = 1.0;

  // [channel]
  double snr_db = 0.0;
  double p = 0.9;  // lossless side-channel success probability
  // Experimental: draw each training cloud's SNR uniformly from
  // snr_db +- 5 dB instead of holding it fixed. Evaluation is unaffected.
  bool snr_jitter = false;

  // [train]
  double lr = 0.0005;
  int batch = 8;
  int epochs_stage1 = 30;
  int epochs_stage2 = 20;
  std::uint64_t seed = 1;
  double early_stop_ratio = 0.0;  // stop when epoch CD falls below ratio x first epoch; 0 = off

  // [data]
  std::string root = "toy";  // "toy" or a directory of OFF meshes
  std::string split = "train";
  int dense_factor = 4;  // surface samples per kept point before downsampling
  double range_lo = 0.0;
  double range_hi = 63.0;
  std::uint64_t shuffle_seed = 7;

  // [output]
  std::string out_dir = "out";
  bool timings = false;  // real wall_ms in CSVs (breaks byte-stability)

  int patch_points() const { return s > 0 ? 2 * n / s : 0; }

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

// Named presets: "toy" is the desk-scale default above; "full_scale" is the
// production-sized setting (n=8192, s=64, 224x224 images, batch 24).
ExperimentConfig toy_config();
ExperimentConfig full_scale_config();

std::string render_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

}  // namespace pcsm
