#pragma once

#include <cstdint>
#include <vector>

#include "gradinv/ndarray.hpp"

namespace gradinv {

/// Adaptive moment estimation with bias correction.
/// eps = 0 is allowed; the update is skipped where the second moment is 0.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  NDArray m, v;

  AdamState() = default;
  explicit AdamState(const Shape& shape, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8)
      : beta1(beta1), beta2(beta2), eps(eps), m(NDArray::zeros(shape)), v(NDArray::zeros(shape)) {}

  void step(NDArray& x, const NDArray& g, double lr);
};

}  // namespace gradinv
