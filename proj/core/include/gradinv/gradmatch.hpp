#pragma once

#include <cstdint>
#include <utility>

#include "gradinv/autodiff.hpp"
#include "gradinv/flsim.hpp"
#include "gradinv/types.hpp"

namespace gradinv {

/// Balance factors for the three image regularizers.
struct RegWeights {
  double alpha_tv = 1e-4;
  double alpha_l2 = 1e-4;
  double alpha_group = 1e-4;

  void validate() const;
};

struct Fraction {
  int64_t num = 0;
  int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Two-phase loss schedule: gradient matching alone before the transition,
/// then a reduced gradient weight plus the regularizers.
struct ScheduleParams {
  double alpha_grad = 1.0;
  double alpha_aux = 1.0;
  int64_t total_iters = 4000;
  Fraction switch_fraction{4, 9};
  Fraction late_grad_factor{1, 2};

  void validate() const;
  /// floor(switch_fraction * total_iters), exact in integer arithmetic.
  int64_t transition_index() const;
};

/// (gradient-loss weight, regularizer weight) at iteration t, 0 <= t < T.
std::pair<double, double> schedule_weights(int64_t t, const ScheduleParams& params);

/// Sum of squared elementwise differences over all parameter arrays.
Tensor grad_distance_mse(const GradientSet& g1, const GradientSet& g2);
/// 1 - <a,b>/(|a||b|) over the globally flattened sets, in [0,2].
/// Errors if either vector is all-zero.
Tensor grad_distance_cosine(const GradientSet& g1, const GradientSet& g2);
/// Max over all entries of |g1 - g2|.
Tensor grad_distance_maxabs(const GradientSet& g1, const GradientSet& g2);

/// Squared differences of horizontally and vertically adjacent pixels, each
/// unordered pair counted once; count_pairs_twice doubles the result for
/// compatibility with the symmetric-neighborhood reading.
Tensor tv_regularizer(const Tensor& images, bool count_pairs_twice = false);
/// Sum over the batch of squared per-image Euclidean norms.
Tensor l2_regularizer(const Tensor& images);
/// Pixelwise mean across the batch -> one [C,H,W] image.
NDArray compute_consensus(const ImageBatch& images);
NDArray compute_consensus(const NDArray& images);
/// Sum over the batch of squared deviation from the (frozen) consensus.
Tensor group_regularizer(const Tensor& images, const Tensor& consensus);
/// alpha_tv*TV + alpha_l2*L2 + alpha_group*Group. The consensus may be left
/// undefined when alpha_group == 0.
Tensor combined_aux(const Tensor& images, const RegWeights& weights, const Tensor& consensus);

}  // namespace gradinv
