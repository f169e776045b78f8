#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gradinv/types.hpp"

namespace gradinv {

struct Dataset {
  ImageBatch images;
  std::vector<int64_t> labels;
  int64_t num_classes = 0;

  int64_t size() const { return images.batch(); }
};

enum class SynthKind { Gradients, Shapes, Checker };

SynthKind synth_kind_from_string(const std::string& s);
std::string synth_kind_to_string(SynthKind k);

/// Procedural 3 x size x size images with 4 label classes per kind:
///  - gradients: linear color ramp, label = direction quadrant
///  - shapes: disk / square / cross / diamond on a plain background
///  - checker: checkerboard, label = (cell size in {2,4}) x parity
Dataset synth_dataset(SynthKind kind, int64_t n, int64_t size, uint64_t seed);

/// Loads `labels.csv` (lines "filename,label") plus the referenced PNGs.
/// resize_to > 0 resizes every image bilinearly to that square side.
Dataset load_image_folder(const std::filesystem::path& dir, int64_t resize_to = 0);

NDArray resize_bilinear(const NDArray& image, int64_t out_h, int64_t out_w);

}  // namespace gradinv
