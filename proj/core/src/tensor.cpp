#include "pcsm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace pcsm::nn {

namespace {

#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif

void check_finite(const Node& node) {
  for (double v : node.value) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("non-finite value produced by op, shape " +
                               shape_str(node.shape));
    }
  }
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

int numel(const Shape& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

void Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
}

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks() { return g_finite_checks; }

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  require(numel(shape) == static_cast<int>(values.size()),
          "tensor: value count does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::variable(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node()->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const int n = numel(shape);
  Tensor t = constant(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  t.node()->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const int n = numel(shape);
  Tensor t = constant(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value));
  t.node()->requires_grad = requires_grad;
  return t;
}

std::vector<double>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }

double Tensor::item() const {
  require(size() == 1, "item: tensor is not scalar, shape " + shape_str(shape()));
  return node_->value[0];
}

void Tensor::backward() {
  require(size() == 1, "backward: root must be scalar, shape " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS: parents first, so `order` is topological.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next ] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next].get();
      ++next;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward) {
      node->ensure_grad();
      node->backward(*node);
    }
  }
}

Tensor make_op(Shape out_shape, std::vector<double> out_values,
               std::vector<Tensor> parents, std::function<void(Node&)> backward) {
  require(numel(out_shape) == static_cast<int>(out_values.size()),
          "make_op: output size does not match shape " + shape_str(out_shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(out_shape);
  node->value = std::move(out_values);
  bool needs_grad = false;
  for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
  if (needs_grad) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  if (g_finite_checks) check_finite(*node);
  return Tensor(std::move(node));
}

// ---- elementwise ----

namespace {

Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* name,
                         double (*fwd)(double, double), double da_coeff, double db_coeff,
                         bool mul_rule) {
  require(a.shape() == b.shape(), std::string(name) + ": shape mismatch " +
                                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t n = a.values().size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.values()[i], b.values()[i]);
  return make_op(
      a.shape(), std::move(out), {a, b},
      [da_coeff, db_coeff, mul_rule](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const std::size_t n = self.value.size();
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            pa.grad[i] += self.grad[i] * (mul_rule ? pb.value[i] : da_coeff);
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            pb.grad[i] += self.grad[i] * (mul_rule ? pa.value[i] : db_coeff);
        }
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_same_shape(a, b, "add", [](double x, double y) { return x + y; }, 1.0, 1.0,
                           false);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_same_shape(a, b, "sub", [](double x, double y) { return x - y; }, 1.0, -1.0,
                           false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_same_shape(a, b, "mul", [](double x, double y) { return x * y; }, 0.0, 0.0,
                           true);
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.values());
  for (double& v : out) v *= s;
  return make_op(a.shape(), std::move(out), {a}, [s](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i) p.grad[i] += s * self.grad[i];
  });
}

Tensor cadd(const Tensor& a, const std::vector<double>& c) {
  require(a.values().size() == c.size(), "cadd: constant size mismatch");
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  return make_op(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i) p.grad[i] += self.grad[i];
  });
}

Tensor cmul(const Tensor& a, const std::vector<double>& c) {
  require(a.values().size() == c.size(), "cmul: constant size mismatch");
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  return make_op(a.shape(), std::move(out), {a}, [c](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i) p.grad[i] += c[i] * self.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_op(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i)
      if (p.value[i] > 0.0) p.grad[i] += self.grad[i];
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.values());
  for (double& v : out) v = std::tanh(v);
  return make_op(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i)
      p.grad[i] += (1.0 - self.value[i] * self.value[i]) * self.grad[i];
  });
}

// ---- shape ----

Tensor reshape(const Tensor& a, Shape shape) {
  require(numel(shape) == a.size(),
          "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<double> out(a.values());
  return make_op(std::move(shape), std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i) p.grad[i] += self.grad[i];
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(0) == b.dim(0),
          "concat_cols: need matching 2D row counts");
  const int rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(rows) * (ca + cb));
  for (int r = 0; r < rows; ++r) {
    std::copy_n(a.data() + static_cast<std::size_t>(r) * ca, ca,
                out.begin() + static_cast<std::size_t>(r) * (ca + cb));
    std::copy_n(b.data() + static_cast<std::size_t>(r) * cb, cb,
                out.begin() + static_cast<std::size_t>(r) * (ca + cb) + ca);
  }
  return make_op({rows, ca + cb}, std::move(out), {a, b}, [rows, ca, cb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (int r = 0; r < rows; ++r) {
      const double* g = self.grad.data() + static_cast<std::size_t>(r) * (ca + cb);
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (int c = 0; c < ca; ++c) pa.grad[static_cast<std::size_t>(r) * ca + c] += g[c];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (int c = 0; c < cb; ++c)
          pb.grad[static_cast<std::size_t>(r) * cb + c] += g[ca + c];
      }
    }
  });
}

Tensor broadcast_rows(const Tensor& row, int rows) {
  require(row.ndim() == 2 && row.dim(0) == 1, "broadcast_rows: expected shape (1,C)");
  require(rows >= 1, "broadcast_rows: rows must be positive");
  const int cols = row.dim(1);
  std::vector<double> out(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    std::copy_n(row.data(), cols, out.begin() + static_cast<std::size_t>(r) * cols);
  return make_op({rows, cols}, std::move(out), {row}, [rows, cols](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        p.grad[c] += self.grad[static_cast<std::size_t>(r) * cols + c];
  });
}

// ---- linear algebra ----

void matmul_raw(const double* a, const double* b, double* out, int rows, int inner,
                int cols, bool accumulate) {
  if (!accumulate) std::fill_n(out, static_cast<std::size_t>(rows) * cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* arow = a + static_cast<std::size_t>(r) * inner;
    double* orow = out + static_cast<std::size_t>(r) * cols;
    for (int k = 0; k < inner; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(k) * cols;
      for (int c = 0; c < cols; ++c) orow[c] += av * brow[c];
    }
  }
}

void matmul_nt_raw(const double* a, const double* b, double* out, int rows, int inner,
                   int cols, bool accumulate) {
  // out[r,c] += dot(a[r,:], b[c,:])
  for (int r = 0; r < rows; ++r) {
    const double* arow = a + static_cast<std::size_t>(r) * inner;
    double* orow = out + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      const double* brow = b + static_cast<std::size_t>(c) * inner;
      double acc = 0.0;
      for (int k = 0; k < inner; ++k) acc += arow[k] * brow[k];
      orow[c] = accumulate ? orow[c] + acc : acc;
    }
  }
}

void matmul_tn_raw(const double* a, const double* b, double* out, int rows, int inner,
                   int cols, bool accumulate) {
  // out[r,c] += sum_k a[k,r] * b[k,c]
  if (!accumulate) std::fill_n(out, static_cast<std::size_t>(rows) * cols, 0.0);
  for (int k = 0; k < inner; ++k) {
    const double* arow = a + static_cast<std::size_t>(k) * rows;
    const double* brow = b + static_cast<std::size_t>(k) * cols;
    for (int r = 0; r < rows; ++r) {
      const double av = arow[r];
      if (av == 0.0) continue;
      double* orow = out + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) orow[c] += av * brow[c];
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  const int rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(rows) * cols);
  matmul_raw(a.data(), b.data(), out.data(), rows, inner, cols, false);
  return make_op({rows, cols}, std::move(out), {a, b}, [rows, inner, cols](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      // dA = dY * B^T
      matmul_nt_raw(self.grad.data(), pb.value.data(), pa.grad.data(), rows, cols, inner,
                    true);
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      // dB = A^T * dY
      matmul_tn_raw(pa.value.data(), self.grad.data(), pb.grad.data(), inner, rows, cols,
                    true);
    }
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
  require(x.ndim() == 2 && bias.ndim() == 1 && bias.dim(0) == x.dim(1),
          "add_rowvec: bias length must equal column count");
  const int rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(x.values());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(r) * cols + c] += bias.values()[c];
  return make_op(x.shape(), std::move(out), {x, bias}, [rows, cols](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < self.value.size(); ++i) px.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          pb.grad[c] += self.grad[static_cast<std::size_t>(r) * cols + c];
    }
  });
}

// ---- reductions / pooling ----

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_op({1}, {acc}, {a}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (double& g : p.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  return make_op({1}, {acc * inv}, {a}, [inv](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (double& g : p.grad) g += inv * self.grad[0];
  });
}

Tensor max_mid(const Tensor& x) {
  require(x.ndim() == 3, "max_mid: expected 3D tensor, got " + shape_str(x.shape()));
  const int b = x.dim(0), k = x.dim(1), c = x.dim(2);
  require(k >= 1, "max_mid: middle axis must be nonempty");
  std::vector<double> out(static_cast<std::size_t>(b) * c,
                          -std::numeric_limits<double>::infinity());
  std::vector<int> argmax(static_cast<std::size_t>(b) * c, 0);
  for (int bi = 0; bi < b; ++bi) {
    for (int ki = 0; ki < k; ++ki) {
      const double* row =
          x.data() + (static_cast<std::size_t>(bi) * k + ki) * static_cast<std::size_t>(c);
      for (int ci = 0; ci < c; ++ci) {
        const std::size_t o = static_cast<std::size_t>(bi) * c + ci;
        if (row[ci] > out[o]) {  // strict: first index wins ties
          out[o] = row[ci];
          argmax[o] = ki;
        }
      }
    }
  }
  return make_op({b, c}, std::move(out), {x}, [b, k, c, argmax](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (int bi = 0; bi < b; ++bi)
      for (int ci = 0; ci < c; ++ci) {
        const std::size_t o = static_cast<std::size_t>(bi) * c + ci;
        const std::size_t src =
            (static_cast<std::size_t>(bi) * k + argmax[o]) * static_cast<std::size_t>(c) + ci;
        p.grad[src] += self.grad[o];
      }
  });
}

Tensor view_pool(const Tensor& x) { return max_mid(x); }

// ---- 2D convnet ops ----

namespace {

struct ConvDims {
  int batch, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int padding) {
  require(x.ndim() == 4, "conv2d: input must be (B,C,H,W), got " + shape_str(x.shape()));
  require(w.ndim() == 4, "conv2d: weight must be (O,C,kh,kw), got " + shape_str(w.shape()));
  require(x.dim(1) == w.dim(1), "conv2d: channel mismatch");
  require(stride >= 1 && padding >= 0, "conv2d: bad stride/padding");
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3),
             stride, padding, 0, 0};
  const int hp = d.h + 2 * padding, wp = d.w + 2 * padding;
  require(d.kh <= hp && d.kw <= wp, "conv2d: kernel larger than padded input");
  d.ho = (hp - d.kh) / stride + 1;
  d.wo = (wp - d.kw) / stride + 1;
  return d;
}

// col is [B*Ho*Wo, C*kh*kw], row-major; zero padding contributes zeros.
void im2col(const double* x, const ConvDims& d, double* col) {
  const std::size_t patch = static_cast<std::size_t>(d.cin) * d.kh * d.kw;
  for (int b = 0; b < d.batch; ++b)
    for (int i = 0; i < d.ho; ++i)
      for (int j = 0; j < d.wo; ++j) {
        double* row = col + ((static_cast<std::size_t>(b) * d.ho + i) * d.wo + j) * patch;
        std::size_t idx = 0;
        for (int c = 0; c < d.cin; ++c)
          for (int ki = 0; ki < d.kh; ++ki) {
            const int yy = i * d.stride + ki - d.pad;
            for (int kj = 0; kj < d.kw; ++kj, ++idx) {
              const int xx = j * d.stride + kj - d.pad;
              row[idx] = (yy >= 0 && yy < d.h && xx >= 0 && xx < d.w)
                             ? x[((static_cast<std::size_t>(b) * d.cin + c) * d.h + yy) * d.w + xx]
                             : 0.0;
            }
          }
      }
}

void col2im_accum(const double* col, const ConvDims& d, double* gx) {
  const std::size_t patch = static_cast<std::size_t>(d.cin) * d.kh * d.kw;
  for (int b = 0; b < d.batch; ++b)
    for (int i = 0; i < d.ho; ++i)
      for (int j = 0; j < d.wo; ++j) {
        const double* row = col + ((static_cast<std::size_t>(b) * d.ho + i) * d.wo + j) * patch;
        std::size_t idx = 0;
        for (int c = 0; c < d.cin; ++c)
          for (int ki = 0; ki < d.kh; ++ki) {
            const int yy = i * d.stride + ki - d.pad;
            for (int kj = 0; kj < d.kw; ++kj, ++idx) {
              const int xx = j * d.stride + kj - d.pad;
              if (yy >= 0 && yy < d.h && xx >= 0 && xx < d.w)
                gx[((static_cast<std::size_t>(b) * d.cin + c) * d.h + yy) * d.w + xx] += row[idx];
            }
          }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding) {
  const ConvDims d = conv_dims(x, w, stride, padding);
  require(bias.ndim() == 1 && bias.dim(0) == d.cout, "conv2d: bias must be (O)");
  const std::size_t patch = static_cast<std::size_t>(d.cin) * d.kh * d.kw;
  const std::size_t m = static_cast<std::size_t>(d.batch) * d.ho * d.wo;
  auto col = std::make_shared<std::vector<double>>(m * patch);
  im2col(x.data(), d, col->data());

  // tmp[mrow, o] = dot(col row, w[o]); then scatter to NCHW
  std::vector<double> tmp(m * d.cout);
  matmul_nt_raw(col->data(), w.data(), tmp.data(), static_cast<int>(m),
                static_cast<int>(patch), d.cout, false);
  std::vector<double> out(m * d.cout);
  for (std::size_t r = 0; r < m; ++r) {
    const int b = static_cast<int>(r / (static_cast<std::size_t>(d.ho) * d.wo));
    const std::size_t ij = r % (static_cast<std::size_t>(d.ho) * d.wo);
    for (int o = 0; o < d.cout; ++o)
      out[(static_cast<std::size_t>(b) * d.cout + o) * d.ho * d.wo + ij] =
          tmp[r * d.cout + o] + bias.values()[o];
  }

  return make_op(
      {d.batch, d.cout, d.ho, d.wo}, std::move(out), {x, w, bias},
      [d, col, patch, m](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pb = *self.parents[2];
        // gather dY back to [m, O]
        std::vector<double> gtmp(m * d.cout);
        for (std::size_t r = 0; r < m; ++r) {
          const int b = static_cast<int>(r / (static_cast<std::size_t>(d.ho) * d.wo));
          const std::size_t ij = r % (static_cast<std::size_t>(d.ho) * d.wo);
          for (int o = 0; o < d.cout; ++o)
            gtmp[r * d.cout + o] =
                self.grad[(static_cast<std::size_t>(b) * d.cout + o) * d.ho * d.wo + ij];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t r = 0; r < m; ++r)
            for (int o = 0; o < d.cout; ++o) pb.grad[o] += gtmp[r * d.cout + o];
        }
        if (pw.requires_grad) {
          pw.ensure_grad();
          // dW[o, patch] = gtmp^T * col
          matmul_tn_raw(gtmp.data(), col->data(), pw.grad.data(), d.cout,
                        static_cast<int>(m), static_cast<int>(patch), true);
        }
        if (px.requires_grad) {
          px.ensure_grad();
          // dcol = gtmp * W, then scatter-add back through the im2col map
          std::vector<double> gcol(m * patch);
          matmul_raw(gtmp.data(), pw.value.data(), gcol.data(), static_cast<int>(m),
                     d.cout, static_cast<int>(patch), false);
          col2im_accum(gcol.data(), d, px.grad.data());
        }
      });
}

Tensor max_pool2d(const Tensor& x, int window, int stride) {
  require(x.ndim() == 4, "max_pool2d: input must be (B,C,H,W)");
  require(window >= 1 && stride >= 1, "max_pool2d: bad window/stride");
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(window <= h && window <= w, "max_pool2d: window larger than input");
  const int ho = (h - window) / stride + 1;
  const int wo = (w - window) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(b) * c * ho * wo);
  std::vector<int> argmax(out.size());
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      const double* plane = x.data() + (static_cast<std::size_t>(bi) * c + ci) *
                                           static_cast<std::size_t>(h) * w;
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          double best = -std::numeric_limits<double>::infinity();
          int best_idx = 0;
          for (int ki = 0; ki < window; ++ki)
            for (int kj = 0; kj < window; ++kj) {
              const int idx = (i * stride + ki) * w + (j * stride + kj);
              if (plane[idx] > best) {
                best = plane[idx];
                best_idx = idx;
              }
            }
          const std::size_t o =
              ((static_cast<std::size_t>(bi) * c + ci) * ho + i) * wo + j;
          out[o] = best;
          argmax[o] = best_idx;
        }
    }
  return make_op({b, c, ho, wo}, std::move(out), {x},
                 [b, c, h, w, ho, wo, argmax](Node& self) {
                   Node& p = *self.parents[0];
                   p.ensure_grad();
                   for (int bi = 0; bi < b; ++bi)
                     for (int ci = 0; ci < c; ++ci) {
                       const std::size_t plane =
                           (static_cast<std::size_t>(bi) * c + ci) *
                           static_cast<std::size_t>(h) * w;
                       for (int i = 0; i < ho; ++i)
                         for (int j = 0; j < wo; ++j) {
                           const std::size_t o =
                               ((static_cast<std::size_t>(bi) * c + ci) * ho + i) * wo + j;
                           p.grad[plane + argmax[o]] += self.grad[o];
                         }
                     }
                 });
}

}  // namespace pcsm::nn
