#include "gradinv/gradmatch.hpp"

#include <cmath>
#include <stdexcept>

namespace gradinv {

void RegWeights::validate() const {
  if (alpha_tv < 0 || alpha_l2 < 0 || alpha_group < 0)
    throw std::invalid_argument("RegWeights: weights must be non-negative");
}

void ScheduleParams::validate() const {
  if (total_iters < 1) throw std::invalid_argument("ScheduleParams: total_iters must be >= 1");
  if (switch_fraction.num <= 0 || switch_fraction.den <= 0 ||
      switch_fraction.num >= switch_fraction.den)
    throw std::invalid_argument("ScheduleParams: switch_fraction must be in (0,1)");
  if (late_grad_factor.den <= 0 || late_grad_factor.num < 0)
    throw std::invalid_argument("ScheduleParams: bad late_grad_factor");
  if (alpha_grad < 0 || alpha_aux < 0)
    throw std::invalid_argument("ScheduleParams: negative scale factor");
}

int64_t ScheduleParams::transition_index() const {
  return switch_fraction.num * total_iters / switch_fraction.den;
}

std::pair<double, double> schedule_weights(int64_t t, const ScheduleParams& params) {
  params.validate();
  if (t < 0 || t >= params.total_iters)
    throw std::out_of_range("schedule_weights: t out of [0,T)");
  if (t < params.transition_index()) return {params.alpha_grad, 0.0};
  return {params.late_grad_factor.value() * params.alpha_grad, params.alpha_aux};
}

namespace {

void check_match(const GradientSet& g1, const GradientSet& g2, const char* who) {
  if (!g1.same_layout(g2))
    throw std::invalid_argument(std::string(who) + ": gradient sets have different layouts");
  if (g1.entries.empty()) throw std::invalid_argument(std::string(who) + ": empty gradient");
}

// max(a,b) built from |.|: 0.5*(a+b+|a-b|); keeps the graph differentiable.
Tensor max2(const Tensor& a, const Tensor& b) {
  return scale(add(add(a, b), abs(sub(a, b))), 0.5);
}

}  // namespace

Tensor grad_distance_mse(const GradientSet& g1, const GradientSet& g2) {
  check_match(g1, g2, "grad_distance_mse");
  Tensor acc;
  for (size_t i = 0; i < g1.entries.size(); ++i) {
    Tensor term = sum_all(square(sub(g1.entries[i].second, g2.entries[i].second)));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

Tensor grad_distance_cosine(const GradientSet& g1, const GradientSet& g2) {
  check_match(g1, g2, "grad_distance_cosine");
  Tensor dot, n1, n2;
  for (size_t i = 0; i < g1.entries.size(); ++i) {
    const Tensor& a = g1.entries[i].second;
    const Tensor& b = g2.entries[i].second;
    Tensor d = sum_all(mul(a, b));
    Tensor qa = sum_all(square(a));
    Tensor qb = sum_all(square(b));
    dot = dot.defined() ? add(dot, d) : d;
    n1 = n1.defined() ? add(n1, qa) : qa;
    n2 = n2.defined() ? add(n2, qb) : qb;
  }
  if (n1.value().item() == 0.0 || n2.value().item() == 0.0)
    throw std::domain_error("grad_distance_cosine: zero gradient vector, cosine undefined");
  return shift(neg(div(dot, mul(sqrt(n1), sqrt(n2)))), 1.0);
}

Tensor grad_distance_maxabs(const GradientSet& g1, const GradientSet& g2) {
  check_match(g1, g2, "grad_distance_maxabs");
  Tensor acc;
  for (size_t i = 0; i < g1.entries.size(); ++i) {
    Tensor m = reduce_max_all(abs(sub(g1.entries[i].second, g2.entries[i].second)));
    acc = acc.defined() ? max2(acc, m) : m;
  }
  return acc;
}

Tensor tv_regularizer(const Tensor& images, bool count_pairs_twice) {
  const Shape& s = images.shape();
  if (s.size() != 4) throw std::invalid_argument("tv_regularizer: images must be [B,C,H,W]");
  int64_t b = s[0], c = s[1], h = s[2], w = s[3];
  // Per-channel neighbor differences as single-channel convolutions.
  Tensor flat = reshape(images, {b * c, 1, h, w});
  Tensor acc = Tensor::constant(0.0);
  if (w > 1) {
    Tensor kx = Tensor::constant(NDArray({1, 1, 1, 2}, {-1.0, 1.0}));
    acc = add(acc, sum_all(square(conv2d(flat, kx, 1, 0))));
  }
  if (h > 1) {
    Tensor ky = Tensor::constant(NDArray({1, 1, 2, 1}, {-1.0, 1.0}));
    acc = add(acc, sum_all(square(conv2d(flat, ky, 1, 0))));
  }
  return count_pairs_twice ? scale(acc, 2.0) : acc;
}

Tensor l2_regularizer(const Tensor& images) {
  if (images.shape().size() != 4)
    throw std::invalid_argument("l2_regularizer: images must be [B,C,H,W]");
  return sum_all(square(images));
}

NDArray compute_consensus(const NDArray& images) {
  if (images.rank() != 4) throw std::invalid_argument("compute_consensus: expected [B,C,H,W]");
  int64_t b = images.dim(0);
  if (b < 1) throw std::invalid_argument("compute_consensus: empty batch");
  int64_t n = images.numel() / b;
  NDArray out(Shape{images.dim(1), images.dim(2), images.dim(3)});
  for (int64_t i = 0; i < b; ++i)
    for (int64_t k = 0; k < n; ++k) out[k] += images[i * n + k];
  for (int64_t k = 0; k < n; ++k) out[k] /= static_cast<double>(b);
  return out;
}

NDArray compute_consensus(const ImageBatch& images) { return compute_consensus(images.data); }

Tensor group_regularizer(const Tensor& images, const Tensor& consensus) {
  const Shape& s = images.shape();
  if (s.size() != 4) throw std::invalid_argument("group_regularizer: images must be [B,C,H,W]");
  const Shape& cs = consensus.shape();
  if (cs != Shape{s[1], s[2], s[3]})
    throw std::invalid_argument("group_regularizer: consensus shape " + shape_str(cs) +
                                " does not match a single image " +
                                shape_str(Shape{s[1], s[2], s[3]}));
  return sum_all(square(sub(images, consensus)));
}

Tensor combined_aux(const Tensor& images, const RegWeights& weights, const Tensor& consensus) {
  weights.validate();
  Tensor acc = Tensor::constant(0.0);
  if (weights.alpha_tv != 0.0) acc = add(acc, scale(tv_regularizer(images), weights.alpha_tv));
  if (weights.alpha_l2 != 0.0) acc = add(acc, scale(l2_regularizer(images), weights.alpha_l2));
  if (weights.alpha_group != 0.0) {
    if (!consensus.defined())
      throw std::invalid_argument("combined_aux: group weight set but no consensus given");
    acc = add(acc, scale(group_regularizer(images, consensus), weights.alpha_group));
  }
  return acc;
}

}  // namespace gradinv
