#pragma once

#include <complex>
#include <string>
#include <vector>

#include "pcsm/nn.hpp"
#include "pcsm/rng.hpp"
#include "pcsm/tensor.hpp"

namespace pcsm {

// Row-major complex symbol block.
struct ComplexFrame {
  int rows = 0, cols = 0;
  std::vector<std::complex<double>> values;

  std::complex<double> at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Scales the block uniformly so the complex symbols it forms average unit
// power: scale = sqrt(count/2 / sum x^2) over all count real entries. The
// gradient accounts for the data-dependent scale. Optional scale_out reports
// the factor applied.
Tensor power_normalize(const Tensor& x, double* scale_out = nullptr);

// Adjacent real pairs become one complex value: (i,2k) the real part,
// (i,2k+1) the imaginary part. from_complex returns a constant tensor and
// inverts to_complex exactly.
ComplexFrame to_complex(const Tensor& m);
Tensor from_complex(const ComplexFrame& frame);

// Additive white Gaussian noise at sigma^2 = 10^(-snr_db/10) against unit
// signal power; real and imaginary parts each draw N(0, sigma^2/2). The
// sigma^2 = 0 path leaves the input and the rng untouched. The tensor form
// treats the same noise stream as a constant shift, so both forms agree
// bit-exactly for equal rng state.
ComplexFrame awgn(const ComplexFrame& frame, double snr_db, Rng& rng);
Tensor awgn_op(const Tensor& x, double snr_db, Rng& rng);

// Two fully connected layers per row, d -> 2d -> 2d, widening each feature
// row into the real symbol pairs the channel carries.
struct ChannelEncoder {
  int d;
  nn::Dense fc1, fc2;

  ChannelEncoder(const std::string& name, int d, Rng& rng);
  Tensor forward(const Tensor& x) const;  // (S,d) -> (S,2d)
  void collect(std::vector<nn::Parameter*>& out);
};

// Mirror of the encoder: 2d -> 2d -> d per row.
struct ChannelDecoder {
  int d;
  nn::Dense fc1, fc2;

  ChannelDecoder(const std::string& name, int d, Rng& rng);
  Tensor forward(const Tensor& x) const;  // (S,2d) -> (S,d)
  void collect(std::vector<nn::Parameter*>& out);
};

// Shannon capacity in bits per symbol at the given SNR.
double capacity(double snr_db);

// Worst-case symbol budget for lossless side data: a rate-1/2 BPSK-style
// scheme delivering bit_use bits with success probability p needs
// ceil((1/p) * 2 * bit_use / capacity) channel uses.
struct LinkBudget {
  double snr_db = 0.0;
  double p = 1.0;
  double code_rate = 0.5;
  long long bit_use = 0;
  long long symbol_use = 0;
  double capacity = 0.0;
};

LinkBudget lossless_budget(long long bit_use, double snr_db, double p);

// Transmission accounting for one cloud: centroids and the global feature go
// losslessly at 16 bits per parameter, the local rows go as S*d analog
// symbols (16-bit equivalent for the bpp figure).
struct RateReport {
  int n = 0, s = 0, d = 0, dprime = 0;
  long long lossless_bits = 0;
  long long lossless_symbols = 0;
  long long analog_symbols = 0;
  double symbols_per_point = 0.0;
  double bits_per_point = 0.0;
  LinkBudget budget;
};

RateReport rate_report(int s, int d, int dprime, int n, double snr_db, double p);

}  // namespace pcsm
