#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gradinv/nn.hpp"
#include "gradinv/rng.hpp"

namespace gradinv {

struct DefenseSpec;

/// Ordered per-parameter gradients for a target model. Immutable once
/// produced; defenses return new instances. Entries hold graph tensors so a
/// dummy gradient can be differentiated further; observed gradients are
/// detached constants.
struct GradientSet {
  std::vector<std::pair<std::string, Tensor>> entries;
  int64_t batch_size_used = 0;

  int64_t total_size() const;
  /// Concatenation in parameter order, row-major within each array.
  std::vector<double> flat() const;
  /// Same names/shapes, values replaced from a flat vector (as constants).
  GradientSet with_flat(const std::vector<double>& values) const;
  GradientSet detached() const;
  bool same_layout(const GradientSet& other) const;
};

/// What the honest-but-curious server observes: the model, the reported
/// (possibly defended) gradient, and the true labels. Deliberately contains
/// no image data.
struct AttackInput {
  const TargetModel* model = nullptr;
  GradientSet observed_gradient;
  LabelBatch labels;
  int64_t batch_size = 0;
};

/// Gradient of the mean batch cross-entropy w.r.t. every model parameter.
/// With `differentiable` set the entries stay attached to the graph that
/// produced `images`, so they support further differentiation.
GradientSet client_gradient(const TargetModel& model, const Tensor& images,
                            const LabelBatch& labels, bool differentiable = false);
GradientSet client_gradient(const TargetModel& model, const ImageBatch& images,
                            const LabelBatch& labels);

/// Client-boundary defense application; the input set is never modified.
GradientSet report_gradient(const GradientSet& grad, const DefenseSpec& spec, Rng& rng);

AttackInput make_attack_input(const TargetModel& model, const GradientSet& defended_grad,
                              const LabelBatch& labels);

}  // namespace gradinv
