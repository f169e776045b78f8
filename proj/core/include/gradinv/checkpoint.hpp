#pragma once

#include <filesystem>

#include "gradinv/flsim.hpp"
#include "gradinv/nn.hpp"

namespace gradinv {

/// Container format shared by model, generator and gradient files:
/// magic "GINV" | u32 version | u64 manifest length | manifest JSON |
/// concatenated little-endian float32 arrays in manifest order.
/// Values are stored as float32, so a load round-trips to ~1e-7 relative.

void save_model(const std::filesystem::path& path, const TargetModel& model);
TargetModel load_model(const std::filesystem::path& path);

void save_generator(const std::filesystem::path& path, const Generator& gen);
Generator load_generator(const std::filesystem::path& path);

void save_gradient(const std::filesystem::path& path, const GradientSet& grad);
GradientSet load_gradient(const std::filesystem::path& path);

}  // namespace gradinv
