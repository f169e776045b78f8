#include "gradinv/types.hpp"

#include <cmath>

namespace gradinv {

ImageBatch::ImageBatch(NDArray d) : data(std::move(d)) {
  if (data.rank() != 4)
    throw std::invalid_argument("ImageBatch: expected [B,C,H,W], got " + shape_str(data.shape()));
  for (int64_t i = 0; i < data.numel(); ++i) {
    double v = data[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument("ImageBatch: entries must be finite and in [0,1]");
  }
}

NDArray ImageBatch::slot(int64_t i) const {
  if (i < 0 || i >= batch()) throw std::out_of_range("ImageBatch::slot");
  int64_t n = data.dim(1) * data.dim(2) * data.dim(3);
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t k = 0; k < n; ++k) out[static_cast<size_t>(k)] = data[i * n + k];
  return NDArray(slot_shape(), std::move(out));
}

LatentBatch::LatentBatch(NDArray c) : codes(std::move(c)) {
  if (codes.rank() != 2)
    throw std::invalid_argument("LatentBatch: expected [B,d], got " + shape_str(codes.shape()));
  if (!codes.all_finite()) throw std::invalid_argument("LatentBatch: non-finite latent entries");
}

void clamp01(NDArray& x) {
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (x[i] < 0.0) x[i] = 0.0;
    if (x[i] > 1.0) x[i] = 1.0;
  }
}

}  // namespace gradinv
