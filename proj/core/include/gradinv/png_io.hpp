#pragma once

#include <filesystem>

#include "gradinv/ndarray.hpp"

namespace gradinv {

/// Writes a [C,H,W] image with values in [0,1] as an 8-bit PNG.
/// C == 3 writes RGB, C == 1 grayscale.
void write_png(const std::filesystem::path& path, const NDArray& image);

/// Decodes a PNG into a [3,H,W] array in [0,1]. Grayscale and paletted
/// images expand to RGB, alpha is dropped, and 16-bit samples normalize by
/// 65535 (8-bit by 255).
NDArray read_png(const std::filesystem::path& path);

}  // namespace gradinv
