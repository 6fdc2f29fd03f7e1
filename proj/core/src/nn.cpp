#include "pcsm/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace pcsm::nn {

Parameter::Parameter(std::string name_, Tensor tensor_)
    : name(std::move(name_)), tensor(std::move(tensor_)) {
  tensor.set_requires_grad(true);
  moment1.assign(static_cast<std::size_t>(tensor.size()), 0.0);
  moment2.assign(static_cast<std::size_t>(tensor.size()), 0.0);
}

void Parameter::set_frozen(bool flag) {
  frozen = flag;
  tensor.set_requires_grad(!flag);
}

void adam_step(const std::vector<Parameter*>& params, const AdamOptions& opt) {
  for (Parameter* p : params) {
    if (!p->frozen && p->tensor.has_grad()) {
      p->step += 1;
      const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(p->step));
      const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(p->step));
      auto& w = p->tensor.values();
      const auto& g = p->tensor.grad();
      for (std::size_t i = 0; i < w.size(); ++i) {
        p->moment1[i] = opt.beta1 * p->moment1[i] + (1.0 - opt.beta1) * g[i];
        p->moment2[i] = opt.beta2 * p->moment2[i] + (1.0 - opt.beta2) * g[i] * g[i];
        const double m_hat = p->moment1[i] / bc1;
        const double v_hat = p->moment2[i] / bc2;
        w[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
      }
    }
    p->tensor.zero_grad();
  }
}

std::vector<double> kaiming_uniform(int fan_in, int count, Rng& rng, double gain) {
  if (fan_in < 1) throw std::invalid_argument("kaiming_uniform: fan_in must be positive");
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> out(static_cast<std::size_t>(count));
  for (double& v : out) v = rng.uniform(-bound, bound);
  return out;
}

Dense::Dense(const std::string& name, int in, int out, Rng& rng, double init_gain)
    : w(name + ".w", Tensor::constant({in, out}, kaiming_uniform(in, in * out, rng, init_gain))),
      b(name + ".b", Tensor::zeros({out})) {}

Tensor Dense::forward(const Tensor& x) const { return linear(x, w, b); }

void Dense::collect(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

Tensor linear(const Tensor& x, const Parameter& w, const Parameter& b) {
  return add_rowvec(matmul(x, w.tensor), b.tensor);
}

MlpChain::MlpChain(const std::string& name, const std::vector<int>& widths, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("MlpChain: need at least one layer");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers.emplace_back(name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
}

Tensor MlpChain::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

void MlpChain::collect(std::vector<Parameter*>& out) {
  for (Dense& d : layers) d.collect(out);
}

Tensor shared_mlp(const Tensor& points, const MlpChain& chain) {
  if (points.ndim() != 3)
    throw std::invalid_argument("shared_mlp: expected (B,K,C) input, got " +
                                shape_str(points.shape()));
  const int b = points.dim(0), k = points.dim(1), c = points.dim(2);
  Tensor flat = reshape(points, {b * k, c});
  Tensor out = chain.forward(flat);
  return reshape(out, {b, k, out.dim(1)});
}

Tensor max_pool_points(const Tensor& x) { return max_mid(x); }

Conv2d::Conv2d(const std::string& name, int in_ch, int out_ch, int kernel, int stride_,
               int padding_, Rng& rng)
    : w(name + ".w", Tensor::constant({out_ch, in_ch, kernel, kernel},
                                      kaiming_uniform(in_ch * kernel * kernel,
                                                      out_ch * in_ch * kernel * kernel, rng))),
      b(name + ".b", Tensor::zeros({out_ch})),
      stride(stride_),
      padding(padding_) {}

Tensor Conv2d::forward(const Tensor& x) const {
  return conv2d(x, w.tensor, b.tensor, stride, padding);
}

void Conv2d::collect(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

}  // namespace pcsm::nn
