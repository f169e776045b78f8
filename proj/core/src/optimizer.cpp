#include "gradinv/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace gradinv {

void AdamState::step(NDArray& x, const NDArray& g, double lr) {
  if (x.shape() != m.shape() || g.shape() != m.shape())
    throw std::invalid_argument("AdamState::step: shape mismatch");
  ++t;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    double mhat = m[i] / c1;
    double vhat = v[i] / c2;
    double denom = std::sqrt(vhat) + eps;
    if (denom == 0.0) continue;
    x[i] -= lr * mhat / denom;
  }
}

}  // namespace gradinv
