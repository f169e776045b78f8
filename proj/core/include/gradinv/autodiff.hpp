#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gradinv/ndarray.hpp"

namespace gradinv {

struct Node;

/// Handle to a node in a dynamically built computation graph.
///
/// Every operation records a backward rule expressed through the same public
/// ops, so adjoints produced by grad() are themselves graph tensors and can be
/// differentiated again. That closure under differentiation is what the
/// attack relies on: it takes d/dz of scalar functions of d(loss)/d(weights).
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(NDArray value, bool requires_grad = false);
  static Tensor constant(NDArray value) { return leaf(std::move(value), false); }
  static Tensor constant(double v) { return leaf(NDArray::scalar(v), false); }

  bool defined() const { return node != nullptr; }
  const NDArray& value() const;
  const Shape& shape() const { return value().shape(); }
  int64_t numel() const { return value().numel(); }
  bool requires_grad() const;
  /// Same value, disconnected from the graph.
  Tensor detach() const { return constant(value()); }

  std::shared_ptr<Node> node;
};

struct Node : std::enable_shared_from_this<Node> {
  NDArray value;
  bool requires_grad = false;
  std::vector<Tensor> parents;
  // Maps (adjoint of this node, this node) -> adjoints of parents, in order.
  // Entries may be undefined Tensors for parents that need no gradient.
  std::function<std::vector<Tensor>(const Tensor&, const Tensor&)> backward;
};

// ---- elementwise (numpy-style broadcasting on binary ops) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor shift(const Tensor& x, double c);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor square(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor transpose(const Tensor& x);                // 2-d

// ---- shape ----
Tensor reshape(const Tensor& x, Shape shape);
Tensor broadcast_to(const Tensor& x, Shape shape);
/// Adjoint of broadcast_to: sums down to `shape`.
Tensor sum_to_shape(const Tensor& x, Shape shape);

// ---- reductions ----
Tensor sum_all(const Tensor& x);   // rank-0 result
Tensor mean_all(const Tensor& x);
Tensor sum_axes_keepdim(const Tensor& x, const std::vector<int64_t>& axes);
/// Max over all entries; gradient routes to the first (flat-order) argmax.
Tensor reduce_max_all(const Tensor& x);
/// Row maxima of a 2-d tensor as a detached [B,1] constant (for stable logsumexp).
Tensor rowmax_detached(const Tensor& x);

// ---- convolution family ----
// Cross-correlation, zero padding `pad`, stride `stride`.
// x: [B,IC,H,W], w: [OC,IC,KH,KW] -> [B,OC,OH,OW]
Tensor conv2d(const Tensor& x, const Tensor& w, int64_t stride, int64_t pad);
// Adjoint of conv2d w.r.t. x. Doubles as a stride-`stride` transposed
// convolution when used forward: gy [B,OC,h,w] scatters through w [OC,IC,KH,KW]
// into [B,IC,in_h,in_w].
Tensor conv2d_input_adjoint(const Tensor& gy, const Tensor& w, int64_t stride, int64_t pad,
                            int64_t in_h, int64_t in_w);
// Adjoint of conv2d w.r.t. w.
Tensor conv2d_weight_adjoint(const Tensor& x, const Tensor& gy, int64_t stride, int64_t pad,
                             int64_t kh, int64_t kw);
inline Tensor conv_transpose2d(const Tensor& x, const Tensor& w, int64_t stride, int64_t pad,
                               int64_t out_h, int64_t out_w) {
  return conv2d_input_adjoint(x, w, stride, pad, out_h, out_w);
}

/// Gradient of a scalar `output` with respect to each tensor in `wrt`.
/// Results stay attached to the graph, so scalars built from them can be
/// differentiated again. Unreachable wrt entries yield zero tensors.
std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& wrt);

}  // namespace gradinv
