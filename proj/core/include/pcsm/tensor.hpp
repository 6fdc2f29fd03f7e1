#ifndef PCSM_TENSOR_HPP
#define PCSM_TENSOR_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pcsm::nn {

using Shape = std::vector<int>;

int numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One record of the dynamic tape. Leaves (inputs, parameters) have no
/// backward function; op outputs keep their parents alive and know how to
/// push their gradient one step back.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  void ensure_grad();
};

/// Shared handle to a tape node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  /// Leaf with requires_grad = false.
  static Tensor constant(Shape shape, std::vector<double> values);
  /// Leaf with requires_grad = true (a trainable value).
  static Tensor variable(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int size() const { return static_cast<int>(node_->value.size()); }

  std::vector<double>& values() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }
  double* data() { return node_->value.data(); }
  const double* data() const { return node_->value.data(); }

  /// Gradient buffer, zero-initialized on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);

  /// Value of a 1-element tensor.
  double item() const;

  /// Reverse-mode sweep from a scalar root. Visits reachable op nodes in
  /// reverse topological order exactly once.
  void backward();

  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

/// When enabled, every op asserts its output is finite and throws otherwise.
/// Defaults to on in debug builds.
void set_finite_checks(bool enabled);
bool finite_checks();

/// Generic op constructor for custom differentiable operations. The backward
/// callable receives the output node; parents are reachable via
/// node.parents[i] and expect gradient accumulation (+=) into their grad.
Tensor make_op(Shape out_shape, std::vector<double> out_values,
               std::vector<Tensor> parents, std::function<void(Node&)> backward);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor cadd(const Tensor& a, const std::vector<double>& c);  // a + const
Tensor cmul(const Tensor& a, const std::vector<double>& c);  // a * const
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);

// ---- shape ----
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_cols(const Tensor& a, const Tensor& b);   // [R,C1]+[R,C2] -> [R,C1+C2]
Tensor broadcast_rows(const Tensor& row, int rows);     // [1,C] -> [rows,C]

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);        // [R,K]x[K,C] -> [R,C]
Tensor add_rowvec(const Tensor& x, const Tensor& bias); // [R,C]+[C]

// ---- reductions / pooling ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor max_mid(const Tensor& x);   // [B,K,C] -> [B,C], max over K, first index on ties
Tensor view_pool(const Tensor& x); // [B,V,F] -> [B,F], same reduction

// ---- 2D convnet ops, NCHW ----
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding);
Tensor max_pool2d(const Tensor& x, int window, int stride);

// ---- raw kernels (shared with backward paths) ----
void matmul_raw(const double* a, const double* b, double* out, int rows, int inner,
                int cols, bool accumulate);
void matmul_nt_raw(const double* a, const double* b, double* out, int rows, int inner,
                   int cols, bool accumulate);  // a[rows,inner] * b[cols,inner]^T
void matmul_tn_raw(const double* a, const double* b, double* out, int rows, int inner,
                   int cols, bool accumulate);  // a[inner,rows]^T * b[inner,cols]

}  // namespace pcsm::nn

// The tensor core sits in pcsm::nn; the rest of the library refers to these
// names without the extra qualifier.
namespace pcsm {
using nn::make_op;
using nn::Node;
using nn::numel;
using nn::Shape;
using nn::shape_str;
using nn::tanh;  // keeps the tensor overload ahead of ::tanh
using nn::Tensor;
}  // namespace pcsm

#endif
