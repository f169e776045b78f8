#pragma once

#include <string>
#include <vector>

#include "gradinv/flsim.hpp"
#include "gradinv/rng.hpp"

namespace gradinv {

/// Tagged description of a gradient transformation.
struct DefenseSpec {
  enum class Kind { None, Prune, Intercept, GaussianNoise, Chain };

  Kind kind = Kind::None;
  double keep_fraction = 1.0;  // prune / intercept, in (0,1]
  bool per_layer = false;      // prune: top-k per parameter array instead of globally
  double sigma2 = 0.0;         // gaussian noise variance, >= 0
  std::vector<DefenseSpec> chain;

  static DefenseSpec none();
  static DefenseSpec prune(double keep_fraction, bool per_layer = false);
  static DefenseSpec intercept(double keep_fraction);
  static DefenseSpec gaussian_noise(double sigma2);
  static DefenseSpec chained(std::vector<DefenseSpec> steps);

  void validate() const;
  /// Short label used in run ids and summary rows, e.g. "prune0.3".
  std::string label() const;
};

/// Keeps the ceil(keep_fraction * n) largest-|value| entries of the globally
/// flattened gradient (parameter order), zeroes the rest. Ties keep the lower
/// flat index. per_layer applies the same rule within each array.
GradientSet prune_gradient(const GradientSet& grad, double keep_fraction, bool per_layer = false);

/// Keeps the first ceil(keep_fraction * n) entries of the flattened gradient,
/// zeroes the remainder.
GradientSet intercept_gradient(const GradientSet& grad, double keep_fraction);

/// Adds i.i.d. N(0, sigma2) elementwise.
GradientSet add_gaussian_noise(const GradientSet& grad, double sigma2, Rng& rng);

/// Dispatch on spec.kind; chains apply left to right.
GradientSet apply_defense(const GradientSet& grad, const DefenseSpec& spec, Rng& rng);

}  // namespace gradinv
