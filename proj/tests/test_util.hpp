#pragma once

#include <cmath>
#include <functional>

#include "gradinv/ndarray.hpp"
#include "gradinv/rng.hpp"

namespace testutil {

using gradinv::NDArray;
using gradinv::Rng;
using gradinv::Shape;

inline double rel_err(double got, double want) {
  double denom = std::max(std::abs(want), 1e-12);
  return std::abs(got - want) / denom;
}

/// Largest elementwise relative error, with an absolute floor so entries
/// near zero do not dominate.
inline double max_rel_err(const NDArray& got, const NDArray& want, double floor = 1e-8) {
  double worst = 0.0;
  for (int64_t i = 0; i < got.numel(); ++i) {
    double denom = std::max(std::abs(want[i]), floor);
    worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
  }
  return worst;
}

/// Central finite differences of a scalar function.
inline NDArray fd_grad(const std::function<double(const NDArray&)>& f, const NDArray& x,
                       double h = 1e-5) {
  NDArray g(x.shape());
  NDArray xp = x;
  for (int64_t i = 0; i < x.numel(); ++i) {
    double orig = xp[i];
    xp[i] = orig + h;
    double fp = f(xp);
    xp[i] = orig - h;
    double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline NDArray random_normal(const Shape& shape, Rng& rng, double stddev = 1.0) {
  NDArray out(shape);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = rng.normal(0.0, stddev);
  return out;
}

inline NDArray random_uniform(const Shape& shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  NDArray out(shape);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = lo + (hi - lo) * rng.uniform01();
  return out;
}

}  // namespace testutil
