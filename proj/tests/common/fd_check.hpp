#pragma once

// Central finite-difference verification for the reverse-mode tape. A probe
// functional P(y) = sum_i w_i y_i with fixed random weights turns any tensor
// output into a scalar, so one backward pass yields gradients for every
// input coordinate at once; sampled coordinates are then compared against
// (f(x+h) - f(x-h)) / 2h. The error metric |ad - fd| / max(1, |ad|, |fd|)
// reads as relative error for large gradients and absolute near zero.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "pcsm/rng.hpp"
#include "pcsm/tensor.hpp"

namespace fd {

// Rebuilds the computation for a flat parameter vector. The builder must
// append its leaf tensors (in theta order) so gradients can be read back.
using BuildLeavesFn =
    std::function<pcsm::Tensor(const std::vector<double>&, std::vector<pcsm::Tensor>&)>;

struct Result {
  double max_err = 0.0;
  std::size_t coords = 0;
};

inline double guarded_rel(double ad, double fdv) {
  return std::abs(ad - fdv) / std::max({1.0, std::abs(ad), std::abs(fdv)});
}

// max_coords == 0 checks every coordinate; otherwise that many are sampled
// without replacement.
inline Result check(const BuildLeavesFn& build, const std::vector<double>& theta0,
                    pcsm::Rng& rng, std::size_t max_coords, double h = 1e-5) {
  std::vector<pcsm::Tensor> leaves;
  pcsm::Tensor y0 = build(theta0, leaves);
  for (pcsm::Tensor& leaf : leaves) leaf.zero_grad();  // leaves may be shared state
  y0.backward();
  std::vector<double> ad;
  ad.reserve(theta0.size());
  for (pcsm::Tensor& leaf : leaves)
    for (double g : leaf.grad()) ad.push_back(g);

  std::vector<std::size_t> coords(theta0.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (max_coords != 0 && max_coords < coords.size()) {
    for (std::size_t i = coords.size(); i > 1; --i)
      std::swap(coords[i - 1], coords[rng.index(i)]);
    coords.resize(max_coords);
  }

  Result res;
  for (std::size_t c : coords) {
    std::vector<double> tp = theta0, tm = theta0;
    tp[c] += h;
    tm[c] -= h;
    std::vector<pcsm::Tensor> scratch;
    const double fp = build(tp, scratch).item();
    scratch.clear();
    const double fm = build(tm, scratch).item();
    res.max_err = std::max(res.max_err, guarded_rel(ad[c], (fp - fm) / (2.0 * h)));
    ++res.coords;
  }
  return res;
}

inline std::vector<double> random_vec(std::size_t count, pcsm::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
  std::vector<double> v(count);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Probe weights.
inline std::vector<double> probe(std::size_t count, pcsm::Rng& rng) {
  return random_vec(count, rng);
}

// Pushes values at least margin away from zero, for kinked ops.
inline void away_from_zero(std::vector<double>& v, double margin) {
  for (double& x : v) x += (x < 0.0 ? -margin : margin);
}

}  // namespace fd
