#include "pcsm/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace pcsm {

namespace {

double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

// One draw per real slot in row-major order; both channel forms share this
// so their streams line up.
void add_noise(double* vals, std::size_t count, double sigma2, Rng& rng) {
  if (sigma2 == 0.0) return;
  const double sd = std::sqrt(sigma2 / 2.0);
  for (std::size_t i = 0; i < count; ++i) vals[i] += sd * rng.gaussian();
}

}  // namespace

Tensor power_normalize(const Tensor& x, double* scale_out) {
  const std::size_t count = x.values().size();
  if (count == 0) throw std::invalid_argument("power_normalize: empty input");
  double sum_sq = 0.0;
  for (double v : x.values()) sum_sq += v * v;
  if (sum_sq <= 0.0) throw std::invalid_argument("power_normalize: all-zero input");

  // count reals form count/2 complex symbols of mean power scale^2*sum/(count/2).
  const double s = std::sqrt(static_cast<double>(count) / (2.0 * sum_sq));
  if (scale_out != nullptr) *scale_out = s;

  std::vector<double> out(x.values());
  for (double& v : out) v *= s;
  return make_op(x.shape(), std::move(out), {x}, [s, sum_sq](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    double dot = 0.0;
    for (std::size_t i = 0; i < self.value.size(); ++i) dot += self.grad[i] * p.value[i];
    const double shrink = s * dot / sum_sq;
    for (std::size_t i = 0; i < self.value.size(); ++i)
      p.grad[i] += s * self.grad[i] - shrink * p.value[i];
  });
}

ComplexFrame to_complex(const Tensor& m) {
  if (m.ndim() != 2 || m.dim(1) % 2 != 0)
    throw std::invalid_argument("to_complex: need an even inner dimension, got " +
                                shape_str(m.shape()));
  ComplexFrame out;
  out.rows = m.dim(0);
  out.cols = m.dim(1) / 2;
  out.values.reserve(static_cast<std::size_t>(out.rows) * out.cols);
  for (std::size_t i = 0; i + 1 < m.values().size(); i += 2)
    out.values.emplace_back(m.values()[i], m.values()[i + 1]);
  return out;
}

Tensor from_complex(const ComplexFrame& frame) {
  std::vector<double> vals;
  vals.reserve(frame.values.size() * 2);
  for (const std::complex<double>& c : frame.values) {
    vals.push_back(c.real());
    vals.push_back(c.imag());
  }
  return Tensor::constant({frame.rows, frame.cols * 2}, std::move(vals));
}

ComplexFrame awgn(const ComplexFrame& frame, double snr_db, Rng& rng) {
  ComplexFrame out = frame;
  const double sigma2 = noise_variance(snr_db);
  if (sigma2 == 0.0) return out;
  const double sd = std::sqrt(sigma2 / 2.0);
  for (std::complex<double>& c : out.values) {
    const double re = sd * rng.gaussian();
    const double im = sd * rng.gaussian();
    c += std::complex<double>(re, im);
  }
  return out;
}

Tensor awgn_op(const Tensor& x, double snr_db, Rng& rng) {
  if (x.ndim() != 2 || x.dim(1) % 2 != 0)
    throw std::invalid_argument("awgn_op: need an even inner dimension, got " +
                                shape_str(x.shape()));
  std::vector<double> out(x.values());
  add_noise(out.data(), out.size(), noise_variance(snr_db), rng);
  return make_op(x.shape(), std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i) p.grad[i] += self.grad[i];
  });
}

ChannelEncoder::ChannelEncoder(const std::string& name, int d_, Rng& rng)
    : d(d_), fc1(name + ".fc1", d_, 2 * d_, rng), fc2(name + ".fc2", 2 * d_, 2 * d_, rng) {
  if (d < 1) throw std::invalid_argument("ChannelEncoder: feature width must be positive");
}

Tensor ChannelEncoder::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.dim(1) != d)
    throw std::invalid_argument("ChannelEncoder: expected (S," + std::to_string(d) +
                                "), got " + shape_str(x.shape()));
  return fc2.forward(relu(fc1.forward(x)));
}

void ChannelEncoder::collect(std::vector<nn::Parameter*>& out) {
  fc1.collect(out);
  fc2.collect(out);
}

ChannelDecoder::ChannelDecoder(const std::string& name, int d_, Rng& rng)
    : d(d_), fc1(name + ".fc1", 2 * d_, 2 * d_, rng), fc2(name + ".fc2", 2 * d_, d_, rng) {
  if (d < 1) throw std::invalid_argument("ChannelDecoder: feature width must be positive");
}

Tensor ChannelDecoder::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.dim(1) != 2 * d)
    throw std::invalid_argument("ChannelDecoder: expected (S," + std::to_string(2 * d) +
                                "), got " + shape_str(x.shape()));
  return fc2.forward(relu(fc1.forward(x)));
}

void ChannelDecoder::collect(std::vector<nn::Parameter*>& out) {
  fc1.collect(out);
  fc2.collect(out);
}

double capacity(double snr_db) { return std::log2(1.0 + std::pow(10.0, snr_db / 10.0)); }

LinkBudget lossless_budget(long long bit_use, double snr_db, double p) {
  if (bit_use < 0) throw std::invalid_argument("lossless_budget: negative bit count");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("lossless_budget: p must be in (0,1]");
  const double cap = capacity(snr_db);
  if (!(cap > 0.0)) throw std::invalid_argument("lossless_budget: zero channel capacity");

  LinkBudget out;
  out.snr_db = snr_db;
  out.p = p;
  out.bit_use = bit_use;
  out.capacity = cap;
  out.symbol_use =
      static_cast<long long>(std::ceil((1.0 / p) * (2.0 * static_cast<double>(bit_use) / cap)));
  return out;
}

RateReport rate_report(int s, int d, int dprime, int n, double snr_db, double p) {
  if (s < 1 || d < 1 || dprime < 0 || n < 1)
    throw std::invalid_argument("rate_report: counts must be positive");

  RateReport out;
  out.n = n;
  out.s = s;
  out.d = d;
  out.dprime = dprime;
  out.lossless_bits = (static_cast<long long>(s) * 3 + dprime) * 16;
  out.budget = lossless_budget(out.lossless_bits, snr_db, p);
  out.lossless_symbols = out.budget.symbol_use;
  out.analog_symbols = static_cast<long long>(s) * d;
  out.symbols_per_point =
      static_cast<double>(out.analog_symbols + out.lossless_symbols) / n;
  out.bits_per_point =
      static_cast<double>(out.lossless_bits + out.analog_symbols * 16) / n;
  return out;
}

}  // namespace pcsm
