#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gradinv/autodiff.hpp"
#include "gradinv/rng.hpp"
#include "gradinv/types.hpp"

namespace gradinv {

enum class ArchId { ConvSmall, ResNetLite, ResNet18 };

ArchId arch_from_string(const std::string& s);
std::string arch_to_string(ArchId a);

/// The federated target classifier. Parameters are leaf tensors in a fixed,
/// stable order and are never mutated after construction; reconstruction with
/// different values goes through with_parameters().
struct TargetModel {
  ArchId arch_id = ArchId::ConvSmall;
  Shape input_shape;  // {C,H,W}
  int64_t num_classes = 0;
  uint64_t init_seed = 0;
  std::vector<std::pair<std::string, Tensor>> parameters;

  int64_t param_count() const;
  std::vector<double> flat_parameters() const;
  TargetModel with_parameters(const std::vector<NDArray>& values) const;
};

TargetModel build_target_model(ArchId arch, const Shape& input_shape, int64_t num_classes,
                               uint64_t seed);

/// Forward pass; images [B,C,H,W] -> logits [B,num_classes].
Tensor classify(const TargetModel& model, const Tensor& images);
Tensor classify(const TargetModel& model, const ImageBatch& images);

/// Mean softmax cross-entropy over the batch (scalar, >= 0).
Tensor classification_loss(const Tensor& logits, const LabelBatch& labels);

/// Latent -> image network with a mapping stage (2-layer MLP on the code)
/// and a synthesis stage (fully connected seed + transposed-conv upsampling,
/// sigmoid output). Output images always lie in (0,1).
/// Output shape must be square with power-of-two side in [8, 64].
struct Generator {
  int64_t latent_dim = 64;
  Shape out_shape;  // {C,H,W}
  uint64_t init_seed = 0;
  bool trained_flag = false;
  std::vector<std::pair<std::string, Tensor>> weights;

  Generator with_weights(const std::vector<NDArray>& values) const;
};

Generator build_generator(int64_t latent_dim, const Shape& out_shape, uint64_t seed);

Tensor generate(const Generator& gen, const Tensor& latents);
ImageBatch generate(const Generator& gen, const LatentBatch& latents);

/// Fits generator weights plus one latent code per training image by joint
/// pixel-MSE descent (generative latent optimization). epochs == 0 returns
/// the generator unchanged.
Generator pretrain_generator(const Generator& gen, const ImageBatch& dataset, int64_t epochs,
                             uint64_t seed, double lr = 0.01);

/// Latent regression: fits codes so that generate(gen, codes) approaches
/// `targets` under pixel MSE. The projector used as reachability oracle.
LatentBatch fit_latents(const Generator& gen, const ImageBatch& targets, int64_t iters,
                        double lr, uint64_t seed);

}  // namespace gradinv
