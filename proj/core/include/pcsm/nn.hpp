#ifndef PCSM_NN_HPP
#define PCSM_NN_HPP

#include <string>
#include <vector>

#include "pcsm/rng.hpp"
#include "pcsm/tensor.hpp"

namespace pcsm::nn {

/// Named trainable tensor with its Adam state. Freezing detaches it from the
/// tape (no gradients recorded) and makes the optimizer skip it.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool frozen = false;
  std::vector<double> moment1;
  std::vector<double> moment2;
  long step = 0;

  Parameter() = default;
  Parameter(std::string name_, Tensor tensor_);

  void set_frozen(bool flag);
  int size() const { return tensor.size(); }
};

struct AdamOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update with bias correction over all unfrozen parameters.
/// Clears every parameter's gradient afterwards, frozen ones included.
void adam_step(const std::vector<Parameter*>& params, const AdamOptions& opt);

/// Kaiming-uniform fan-in init, U(-sqrt(6/fan_in), sqrt(6/fan_in)).
std::vector<double> kaiming_uniform(int fan_in, int count, Rng& rng, double gain = 1.0);

/// Fully connected layer y = xW + b operating on (rows, in) matrices.
struct Dense {
  Parameter w;  // (in, out)
  Parameter b;  // (out)

  Dense() = default;
  Dense(const std::string& name, int in, int out, Rng& rng, double init_gain = 1.0);
  Tensor forward(const Tensor& x) const;
  void collect(std::vector<Parameter*>& out);
};

/// Chain of Dense layers with ReLU between them (none after the last),
/// applied to every row independently. Rows may be points of a set, so this
/// doubles as the weight-shared per-point MLP.
struct MlpChain {
  std::vector<Dense> layers;

  MlpChain() = default;
  MlpChain(const std::string& name, const std::vector<int>& widths, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(std::vector<Parameter*>& out);
};

/// Shared-weight per-point MLP over (B,K,C_in) -> (B,K,C_out).
Tensor shared_mlp(const Tensor& points, const MlpChain& chain);

/// Channel-wise max over the point axis: (B,K,C) -> (B,C).
Tensor max_pool_points(const Tensor& x);

/// y = x w + b as a free op; Dense::forward wraps it.
Tensor linear(const Tensor& x, const Parameter& w, const Parameter& b);

/// 2D convolution layer.
struct Conv2d {
  Parameter w;  // (out, in, k, k)
  Parameter b;  // (out)
  int stride = 1;
  int padding = 0;

  Conv2d() = default;
  Conv2d(const std::string& name, int in_ch, int out_ch, int kernel, int stride_,
         int padding_, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(std::vector<Parameter*>& out);
};

}  // namespace pcsm::nn

#endif
