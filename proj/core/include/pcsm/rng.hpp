#ifndef PCSM_RNG_HPP
#define PCSM_RNG_HPP

#include <cstdint>
#include <random>
#include <string>

namespace pcsm {

/// Deterministic random source. All distribution transforms are implemented
/// here (not delegated to std:: distributions, whose output is
/// implementation-defined) so that a seed pins the exact sample stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Standard normal via Box-Muller, one spare cached.
  double gaussian();

  /// Derive an independent stream for a tagged sub-task.
  Rng fork(std::uint64_t tag) const;

  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
  std::uint64_t seed_ = 0;
};

/// splitmix64 hash step, used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace pcsm

#endif
