#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradinv/types.hpp"

namespace gradinv {

/// Mean squared error over all entries of two equal-shape arrays.
double mse(const NDArray& x, const NDArray& y);

/// 20*log10(max_i / sqrt(MSE)); identical inputs return the 100 dB cap.
double psnr(const NDArray& x, const NDArray& y, double max_i = 1.0);

struct SsimParams {
  int64_t window = 11;  // odd; auto-shrunk to fit small images
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double max_i = 1.0;
};

/// Mean local SSIM over a Gaussian window, per channel, averaged. Inputs are
/// single images [C,H,W]. Symmetric in its arguments; ssim(x,x) == 1.
double ssim(const NDArray& x, const NDArray& y, const SsimParams& params = {});

/// Per-slot scores under the slot matching that maximizes mean PSNR.
struct MetricReport {
  struct PerImage {
    int64_t slot = 0;          // reconstruction slot
    int64_t matched_slot = 0;  // original it was scored against
    double psnr_db = 0.0;
    double ssim = 0.0;
  };
  std::vector<PerImage> per_image;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
  /// Convention recorded in every report.
  static constexpr const char* kMatching = "optimal_assignment";
};

/// Scores reconstructions against originals under the permutation that
/// maximizes mean PSNR (exact assignment, batches up to 20).
MetricReport batch_match_metrics(const ImageBatch& recon, const ImageBatch& original,
                                 double max_i = 1.0);

}  // namespace gradinv
