#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcsm/tensor.hpp"

namespace pcsm {

struct ParamBlob {
  Shape shape;
  std::vector<double> values;
};

// On-disk model snapshot. File layout: "PCSM" magic, u32 version, u64
// manifest length, JSON manifest (stage, rng state, hyperparameters, blob
// names and shapes), then the blob values as little-endian f64 in manifest
// order. Round-trips are bit-exact.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string stage;  // "stage1" or "stage2"
  std::string rng_state;
  std::map<std::string, std::string> hyper;
  std::map<std::string, ParamBlob> blobs;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pcsm
