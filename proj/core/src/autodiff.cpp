#include "gradinv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace gradinv {

namespace {

Tensor make_node(NDArray value, std::vector<Tensor> parents,
                 std::function<std::vector<Tensor>(const Tensor&, const Tensor&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p.defined() && p.requires_grad()) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  Tensor t;
  t.node = std::move(n);
  return t;
}

// Elementwise binary with broadcasting; dfa/dfb build the parent adjoints.
NDArray ew_binary(const NDArray& a, const NDArray& b, double (*f)(double, double)) {
  Shape os = broadcast_shape(a.shape(), b.shape());
  NDArray av = broadcast_array(a, os);
  NDArray bv = broadcast_array(b, os);
  NDArray out(os);
  int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  return out;
}

NDArray ew_unary(const NDArray& x, double (*f)(double)) {
  NDArray out(x.shape());
  int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = f(x[i]);
  return out;
}

void check_defined(const Tensor& t, const char* who) {
  if (!t.defined()) throw std::invalid_argument(std::string(who) + ": undefined tensor");
}

}  // namespace

Tensor Tensor::leaf(NDArray value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  Tensor t;
  t.node = std::move(n);
  return t;
}

const NDArray& Tensor::value() const {
  if (!node) throw std::logic_error("value() on undefined tensor");
  return node->value;
}

bool Tensor::requires_grad() const { return node && node->requires_grad; }

Tensor add(const Tensor& a, const Tensor& b) {
  check_defined(a, "add");
  check_defined(b, "add");
  Shape as = a.shape(), bs = b.shape();
  return make_node(ew_binary(a.value(), b.value(), [](double x, double y) { return x + y; }),
                   {a, b}, [as, bs](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{sum_to_shape(gy, as), sum_to_shape(gy, bs)};
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_defined(a, "sub");
  check_defined(b, "sub");
  Shape as = a.shape(), bs = b.shape();
  return make_node(ew_binary(a.value(), b.value(), [](double x, double y) { return x - y; }),
                   {a, b}, [as, bs](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{sum_to_shape(gy, as),
                                                sum_to_shape(neg(gy), bs)};
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_defined(a, "mul");
  check_defined(b, "mul");
  Shape as = a.shape(), bs = b.shape();
  return make_node(ew_binary(a.value(), b.value(), [](double x, double y) { return x * y; }),
                   {a, b}, [a, b, as, bs](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{sum_to_shape(mul(gy, b), as),
                                                sum_to_shape(mul(gy, a), bs)};
                   });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_defined(a, "div");
  check_defined(b, "div");
  Shape as = a.shape(), bs = b.shape();
  return make_node(ew_binary(a.value(), b.value(), [](double x, double y) { return x / y; }),
                   {a, b}, [a, b, as, bs](const Tensor& gy, const Tensor& self) {
                     // d/da = gy/b ; d/db = -gy*a/b^2 = -gy*self/b
                     return std::vector<Tensor>{
                         sum_to_shape(div(gy, b), as),
                         sum_to_shape(neg(div(mul(gy, self), b)), bs)};
                   });
}

Tensor neg(const Tensor& x) {
  check_defined(x, "neg");
  return make_node(ew_unary(x.value(), [](double v) { return -v; }), {x},
                   [](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{neg(gy)};
                   });
}

Tensor scale(const Tensor& x, double c) {
  check_defined(x, "scale");
  NDArray out(x.shape());
  int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = x.value()[i] * c;
  return make_node(std::move(out), {x}, [c](const Tensor& gy, const Tensor&) {
    return std::vector<Tensor>{scale(gy, c)};
  });
}

Tensor shift(const Tensor& x, double c) {
  check_defined(x, "shift");
  NDArray out(x.shape());
  int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = x.value()[i] + c;
  return make_node(std::move(out), {x}, [](const Tensor& gy, const Tensor&) {
    return std::vector<Tensor>{gy};
  });
}

Tensor exp(const Tensor& x) {
  check_defined(x, "exp");
  return make_node(ew_unary(x.value(), [](double v) { return std::exp(v); }), {x},
                   [](const Tensor& gy, const Tensor& self) {
                     return std::vector<Tensor>{mul(gy, self)};
                   });
}

Tensor log(const Tensor& x) {
  check_defined(x, "log");
  return make_node(ew_unary(x.value(), [](double v) { return std::log(v); }), {x},
                   [x](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{div(gy, x)};
                   });
}

Tensor sqrt(const Tensor& x) {
  check_defined(x, "sqrt");
  return make_node(ew_unary(x.value(), [](double v) { return std::sqrt(v); }), {x},
                   [](const Tensor& gy, const Tensor& self) {
                     return std::vector<Tensor>{div(scale(gy, 0.5), self)};
                   });
}

Tensor abs(const Tensor& x) {
  check_defined(x, "abs");
  NDArray sign(x.shape());
  int64_t n = sign.numel();
  for (int64_t i = 0; i < n; ++i) sign[i] = x.value()[i] < 0 ? -1.0 : (x.value()[i] > 0 ? 1.0 : 0.0);
  Tensor sign_c = Tensor::constant(std::move(sign));
  return make_node(ew_unary(x.value(), [](double v) { return std::abs(v); }), {x},
                   [sign_c](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{mul(gy, sign_c)};
                   });
}

Tensor sigmoid(const Tensor& x) {
  check_defined(x, "sigmoid");
  return make_node(ew_unary(x.value(), [](double v) { return 1.0 / (1.0 + std::exp(-v)); }), {x},
                   [](const Tensor& gy, const Tensor& self) {
                     // gy * y * (1 - y)
                     return std::vector<Tensor>{mul(gy, mul(self, shift(neg(self), 1.0)))};
                   });
}

Tensor tanh(const Tensor& x) {
  check_defined(x, "tanh");
  return make_node(ew_unary(x.value(), [](double v) { return std::tanh(v); }), {x},
                   [](const Tensor& gy, const Tensor& self) {
                     return std::vector<Tensor>{mul(gy, shift(neg(square(self)), 1.0))};
                   });
}

Tensor relu(const Tensor& x) {
  check_defined(x, "relu");
  NDArray mask(x.shape());
  int64_t n = mask.numel();
  for (int64_t i = 0; i < n; ++i) mask[i] = x.value()[i] > 0 ? 1.0 : 0.0;
  Tensor mask_c = Tensor::constant(std::move(mask));
  return make_node(ew_unary(x.value(), [](double v) { return v > 0 ? v : 0.0; }), {x},
                   [mask_c](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{mul(gy, mask_c)};
                   });
}

Tensor square(const Tensor& x) { return mul(x, x); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  const NDArray& av = a.value();
  const NDArray& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(av.shape()) + " x " +
                                shape_str(bv.shape()));
  int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  NDArray out(Shape{m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (int64_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  return make_node(std::move(out), {a, b}, [a, b](const Tensor& gy, const Tensor&) {
    return std::vector<Tensor>{matmul(gy, transpose(b)), matmul(transpose(a), gy)};
  });
}

Tensor transpose(const Tensor& x) {
  check_defined(x, "transpose");
  const NDArray& xv = x.value();
  if (xv.rank() != 2) throw std::invalid_argument("transpose: rank-2 tensor required");
  int64_t m = xv.dim(0), n = xv.dim(1);
  NDArray out(Shape{n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  return make_node(std::move(out), {x}, [](const Tensor& gy, const Tensor&) {
    return std::vector<Tensor>{transpose(gy)};
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_defined(x, "reshape");
  Shape orig = x.shape();
  return make_node(x.value().reshaped(std::move(shape)), {x},
                   [orig](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{reshape(gy, orig)};
                   });
}

Tensor broadcast_to(const Tensor& x, Shape shape) {
  check_defined(x, "broadcast_to");
  Shape orig = x.shape();
  return make_node(broadcast_array(x.value(), shape), {x},
                   [orig](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{sum_to_shape(gy, orig)};
                   });
}

Tensor sum_to_shape(const Tensor& x, Shape shape) {
  check_defined(x, "sum_to_shape");
  if (x.shape() == shape) return x;
  Shape orig = x.shape();
  return make_node(reduce_to_shape(x.value(), shape), {x},
                   [orig](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{broadcast_to(gy, orig)};
                   });
}

Tensor sum_all(const Tensor& x) { return sum_to_shape(x, Shape{}); }

Tensor mean_all(const Tensor& x) {
  check_defined(x, "mean_all");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum_axes_keepdim(const Tensor& x, const std::vector<int64_t>& axes) {
  Shape target = x.shape();
  for (int64_t ax : axes) {
    if (ax < 0 || ax >= static_cast<int64_t>(target.size()))
      throw std::invalid_argument("sum_axes_keepdim: axis out of range");
    target[static_cast<size_t>(ax)] = 1;
  }
  return sum_to_shape(x, target);
}

Tensor reduce_max_all(const Tensor& x) {
  check_defined(x, "reduce_max_all");
  const NDArray& xv = x.value();
  if (xv.numel() == 0) throw std::invalid_argument("reduce_max_all: empty tensor");
  int64_t arg = 0;
  for (int64_t i = 1; i < xv.numel(); ++i)
    if (xv[i] > xv[arg]) arg = i;
  NDArray mask = NDArray::zeros(xv.shape());
  mask[arg] = 1.0;
  Tensor mask_c = Tensor::constant(std::move(mask));
  Shape orig = xv.shape();
  return make_node(NDArray::scalar(xv[arg]), {x},
                   [mask_c, orig](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{mul(broadcast_to(gy, orig), mask_c)};
                   });
}

Tensor rowmax_detached(const Tensor& x) {
  check_defined(x, "rowmax_detached");
  const NDArray& xv = x.value();
  if (xv.rank() != 2) throw std::invalid_argument("rowmax_detached: rank-2 tensor required");
  int64_t b = xv.dim(0), k = xv.dim(1);
  if (k == 0) throw std::invalid_argument("rowmax_detached: empty rows");
  NDArray out(Shape{b, 1});
  for (int64_t i = 0; i < b; ++i) {
    double m = xv[i * k];
    for (int64_t j = 1; j < k; ++j) m = std::max(m, xv[i * k + j]);
    out[i] = m;
  }
  return Tensor::constant(std::move(out));
}

// ---- convolution family ----

namespace {

struct ConvGeom {
  int64_t b, ic, h, w, oc, kh, kw, oh, ow, stride, pad;
};

ConvGeom conv_geom(const Shape& xs, const Shape& ws, int64_t stride, int64_t pad) {
  if (xs.size() != 4 || ws.size() != 4)
    throw std::invalid_argument("conv2d: x and w must be rank 4");
  if (xs[1] != ws[1])
    throw std::invalid_argument("conv2d: channel mismatch x" + shape_str(xs) + " w" +
                                shape_str(ws));
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/pad");
  ConvGeom g;
  g.b = xs[0];
  g.ic = xs[1];
  g.h = xs[2];
  g.w = xs[3];
  g.oc = ws[0];
  g.kh = ws[2];
  g.kw = ws[3];
  g.stride = stride;
  g.pad = pad;
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
  if (g.oh < 1 || g.ow < 1)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  return g;
}

NDArray conv2d_value(const NDArray& x, const NDArray& w, const ConvGeom& g) {
  NDArray y(Shape{g.b, g.oc, g.oh, g.ow});
  const double* xd = x.data();
  const double* wd = w.data();
  double* yd = y.data();
  for (int64_t b = 0; b < g.b; ++b)
    for (int64_t oc = 0; oc < g.oc; ++oc)
      for (int64_t i = 0; i < g.oh; ++i)
        for (int64_t j = 0; j < g.ow; ++j) {
          double acc = 0.0;
          for (int64_t ic = 0; ic < g.ic; ++ic)
            for (int64_t u = 0; u < g.kh; ++u) {
              int64_t hi = i * g.stride + u - g.pad;
              if (hi < 0 || hi >= g.h) continue;
              const double* xrow = xd + ((b * g.ic + ic) * g.h + hi) * g.w;
              const double* wrow = wd + ((oc * g.ic + ic) * g.kh + u) * g.kw;
              for (int64_t v = 0; v < g.kw; ++v) {
                int64_t wi = j * g.stride + v - g.pad;
                if (wi < 0 || wi >= g.w) continue;
                acc += xrow[wi] * wrow[v];
              }
            }
          yd[((b * g.oc + oc) * g.oh + i) * g.ow + j] = acc;
        }
  return y;
}

NDArray conv2d_input_adjoint_value(const NDArray& gy, const NDArray& w, const ConvGeom& g) {
  NDArray gx(Shape{g.b, g.ic, g.h, g.w});
  const double* gyd = gy.data();
  const double* wd = w.data();
  double* gxd = gx.data();
  for (int64_t b = 0; b < g.b; ++b)
    for (int64_t oc = 0; oc < g.oc; ++oc)
      for (int64_t i = 0; i < g.oh; ++i)
        for (int64_t j = 0; j < g.ow; ++j) {
          double gv = gyd[((b * g.oc + oc) * g.oh + i) * g.ow + j];
          if (gv == 0.0) continue;
          for (int64_t ic = 0; ic < g.ic; ++ic)
            for (int64_t u = 0; u < g.kh; ++u) {
              int64_t hi = i * g.stride + u - g.pad;
              if (hi < 0 || hi >= g.h) continue;
              double* gxrow = gxd + ((b * g.ic + ic) * g.h + hi) * g.w;
              const double* wrow = wd + ((oc * g.ic + ic) * g.kh + u) * g.kw;
              for (int64_t v = 0; v < g.kw; ++v) {
                int64_t wi = j * g.stride + v - g.pad;
                if (wi < 0 || wi >= g.w) continue;
                gxrow[wi] += gv * wrow[v];
              }
            }
        }
  return gx;
}

NDArray conv2d_weight_adjoint_value(const NDArray& x, const NDArray& gy, const ConvGeom& g) {
  NDArray gw(Shape{g.oc, g.ic, g.kh, g.kw});
  const double* xd = x.data();
  const double* gyd = gy.data();
  double* gwd = gw.data();
  for (int64_t b = 0; b < g.b; ++b)
    for (int64_t oc = 0; oc < g.oc; ++oc)
      for (int64_t i = 0; i < g.oh; ++i)
        for (int64_t j = 0; j < g.ow; ++j) {
          double gv = gyd[((b * g.oc + oc) * g.oh + i) * g.ow + j];
          if (gv == 0.0) continue;
          for (int64_t ic = 0; ic < g.ic; ++ic)
            for (int64_t u = 0; u < g.kh; ++u) {
              int64_t hi = i * g.stride + u - g.pad;
              if (hi < 0 || hi >= g.h) continue;
              const double* xrow = xd + ((b * g.ic + ic) * g.h + hi) * g.w;
              double* gwrow = gwd + ((oc * g.ic + ic) * g.kh + u) * g.kw;
              for (int64_t v = 0; v < g.kw; ++v) {
                int64_t wi = j * g.stride + v - g.pad;
                if (wi < 0 || wi >= g.w) continue;
                gwrow[v] += xrow[wi] * gv;
              }
            }
        }
  return gw;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int64_t stride, int64_t pad) {
  check_defined(x, "conv2d");
  check_defined(w, "conv2d");
  ConvGeom g = conv_geom(x.shape(), w.shape(), stride, pad);
  return make_node(conv2d_value(x.value(), w.value(), g), {x, w},
                   [x, w, g](const Tensor& gy, const Tensor&) {
                     return std::vector<Tensor>{
                         conv2d_input_adjoint(gy, w, g.stride, g.pad, g.h, g.w),
                         conv2d_weight_adjoint(x, gy, g.stride, g.pad, g.kh, g.kw)};
                   });
}

Tensor conv2d_input_adjoint(const Tensor& gy, const Tensor& w, int64_t stride, int64_t pad,
                            int64_t in_h, int64_t in_w) {
  check_defined(gy, "conv2d_input_adjoint");
  check_defined(w, "conv2d_input_adjoint");
  const Shape& gys = gy.shape();
  const Shape& ws = w.shape();
  if (gys.size() != 4 || ws.size() != 4 || gys[1] != ws[0])
    throw std::invalid_argument("conv2d_input_adjoint: bad shapes gy" + shape_str(gys) + " w" +
                                shape_str(ws));
  ConvGeom g = conv_geom(Shape{gys[0], ws[1], in_h, in_w}, ws, stride, pad);
  if (g.oh != gys[2] || g.ow != gys[3])
    throw std::invalid_argument("conv2d_input_adjoint: gy spatial size inconsistent with target");
  return make_node(conv2d_input_adjoint_value(gy.value(), w.value(), g), {gy, w},
                   [gy, w, g](const Tensor& gz, const Tensor&) {
                     return std::vector<Tensor>{
                         conv2d(gz, w, g.stride, g.pad),
                         conv2d_weight_adjoint(gz, gy, g.stride, g.pad, g.kh, g.kw)};
                   });
}

Tensor conv2d_weight_adjoint(const Tensor& x, const Tensor& gy, int64_t stride, int64_t pad,
                             int64_t kh, int64_t kw) {
  check_defined(x, "conv2d_weight_adjoint");
  check_defined(gy, "conv2d_weight_adjoint");
  const Shape& xs = x.shape();
  const Shape& gys = gy.shape();
  if (xs.size() != 4 || gys.size() != 4 || xs[0] != gys[0])
    throw std::invalid_argument("conv2d_weight_adjoint: bad shapes");
  ConvGeom g = conv_geom(xs, Shape{gys[1], xs[1], kh, kw}, stride, pad);
  if (g.oh != gys[2] || g.ow != gys[3])
    throw std::invalid_argument("conv2d_weight_adjoint: gy spatial size inconsistent");
  return make_node(conv2d_weight_adjoint_value(x.value(), gy.value(), g), {x, gy},
                   [x, gy, g](const Tensor& gz, const Tensor&) {
                     return std::vector<Tensor>{
                         conv2d_input_adjoint(gy, gz, g.stride, g.pad, g.h, g.w),
                         conv2d(x, gz, g.stride, g.pad)};
                   });
}

// ---- gradient engine ----

std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& wrt) {
  check_defined(output, "grad");
  if (output.numel() != 1) throw std::invalid_argument("grad: output must be a scalar");

  // Iterative post-order topological sort over the requires_grad subgraph.
  std::vector<Node*> topo;
  std::unordered_set<Node*> seen;
  if (output.requires_grad()) {
    std::vector<std::pair<Node*, size_t>> stack{{output.node.get(), 0}};
    seen.insert(output.node.get());
    while (!stack.empty()) {
      auto& [n, i] = stack.back();
      if (i < n->parents.size()) {
        Node* p = n->parents[i].node.get();
        ++i;
        if (p && p->requires_grad && !seen.count(p)) {
          seen.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        topo.push_back(n);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<Node*, Tensor> adjoint;
  if (output.requires_grad())
    adjoint[output.node.get()] = Tensor::constant(NDArray::full(output.shape(), 1.0));

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    auto found = adjoint.find(n);
    if (found == adjoint.end() || !n->backward) continue;
    Tensor self_t;
    self_t.node = n->shared_from_this();
    std::vector<Tensor> pg = n->backward(found->second, self_t);
    if (pg.size() != n->parents.size())
      throw std::logic_error("grad: backward rule returned wrong arity");
    for (size_t k = 0; k < pg.size(); ++k) {
      const Tensor& p = n->parents[k];
      if (!p.defined() || !p.requires_grad() || !pg[k].defined()) continue;
      if (pg[k].shape() != p.shape())
        throw std::logic_error("grad: adjoint shape mismatch " + shape_str(pg[k].shape()) +
                               " vs " + shape_str(p.shape()));
      auto a = adjoint.find(p.node.get());
      if (a == adjoint.end())
        adjoint[p.node.get()] = pg[k];
      else
        a->second = add(a->second, pg[k]);
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Tensor& t : wrt) {
    check_defined(t, "grad(wrt)");
    auto a = adjoint.find(t.node.get());
    if (a == adjoint.end())
      out.push_back(Tensor::constant(NDArray::zeros(t.shape())));
    else
      out.push_back(a->second);
  }
  return out;
}

}  // namespace gradinv
