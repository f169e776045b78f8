#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gradinv/ndarray.hpp"

namespace gradinv {

/// B images, C x H x W, intensities in [0,1]. Construction validates range
/// and finiteness.
struct ImageBatch {
  NDArray data;  // [B,C,H,W]

  ImageBatch() = default;
  explicit ImageBatch(NDArray d);

  int64_t batch() const { return data.dim(0); }
  int64_t channels() const { return data.dim(1); }
  int64_t height() const { return data.dim(2); }
  int64_t width() const { return data.dim(3); }
  Shape slot_shape() const { return {data.dim(1), data.dim(2), data.dim(3)}; }

  /// Copy of image `i` as a [C,H,W] array.
  NDArray slot(int64_t i) const;
};

/// Integer class labels, one per image slot.
struct LabelBatch {
  std::vector<int64_t> labels;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
};

/// B latent codes of width `dim`.
struct LatentBatch {
  NDArray codes;  // [B,d]

  LatentBatch() = default;
  explicit LatentBatch(NDArray c);

  int64_t batch() const { return codes.dim(0); }
  int64_t dim() const { return codes.dim(1); }
};

/// Clamp every entry into [0,1] in place.
void clamp01(NDArray& x);

}  // namespace gradinv
