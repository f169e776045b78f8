#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gradinv/flsim.hpp"
#include "gradinv/gradmatch.hpp"
#include "gradinv/nn.hpp"
#include "gradinv/optimizer.hpp"

namespace gradinv {

enum class DistanceKind { Mse, Cosine, MaxAbs };
enum class InitKind { Randn, Rand, NormalImagenet };

DistanceKind distance_from_string(const std::string& s);
std::string distance_to_string(DistanceKind d);
InitKind init_from_string(const std::string& s);
std::string init_to_string(InitKind k);

/// All attack hyperparameters. `distance` left unset picks the per-attack
/// default: MSE for the latent attack, cosine for the direct-pixel baseline.
struct AttackConfig {
  int64_t total_iters = 4000;
  double base_lr = 0.1;
  std::vector<double> lr_milestones = {3.0 / 8.0, 5.0 / 8.0, 7.0 / 8.0};
  double lr_decay_factor = 0.1;
  std::optional<DistanceKind> distance;
  RegWeights reg_weights;
  ScheduleParams schedule;  // total_iters here is superseded by the field above
  int64_t consensus_period = 100;
  InitKind init_kind = InitKind::Randn;
  uint64_t seed = 1314;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  DistanceKind effective_distance(bool direct_attack) const;
  /// Schedule with total_iters synced to this config.
  ScheduleParams effective_schedule() const;
};

struct TrajectoryPoint {
  int64_t iter = 0;
  double grad_loss = 0.0;  // raw gradient-distance value
  double aux_loss = 0.0;   // weighted regularizer contribution (exactly 0 pre-transition)
  double lr = 0.0;
};

struct ReconstructionResult {
  ImageBatch images;
  std::optional<LatentBatch> final_latents;  // absent for the direct attack
  std::vector<TrajectoryPoint> trajectory;
  int64_t iters_run = 0;
};

/// Seeded initialization. Slot i (row along dim 0) draws from its own
/// substream mix_seed(seed, i), so per-slot draws are stable across batch
/// sizes. normal-imagenet uses the conventional per-channel constants
/// mean (0.485, 0.456, 0.406), std (0.229, 0.224, 0.225); for rank-4 arrays
/// with 3 channels they apply per channel, otherwise channel c = index mod 3.
NDArray init_variable(const Shape& shape, InitKind kind, uint64_t seed);
LatentBatch init_latents(int64_t batch_size, int64_t dim, InitKind kind, uint64_t seed);

/// Step learning rate: base_lr * decay^(#milestones m with m*T <= t).
double lr_at(int64_t t, const AttackConfig& config);

/// One optimization run's full state; attack_step advances exactly one
/// iteration so per-step invariants can be tested.
struct AttackState {
  const TargetModel* model = nullptr;
  const Generator* generator = nullptr;  // nullptr -> direct pixel attack
  AttackConfig config;
  ScheduleParams schedule;
  LabelBatch labels;
  GradientSet observed;
  DistanceKind distance = DistanceKind::Mse;
  RegWeights aux_weights;
  NDArray variable;  // latents [B,d] or pixels [B,C,H,W]
  AdamState adam;
  int64_t t = 0;
  bool have_consensus = false;
  NDArray consensus;
  std::vector<TrajectoryPoint> trajectory;
};

AttackState init_gi_smn_state(const AttackInput& input, const Generator& generator,
                              const AttackConfig& config);
AttackState init_direct_state(const AttackInput& input, const AttackConfig& config);

void attack_step(AttackState& state);

ReconstructionResult gi_smn_attack(const AttackInput& input, const Generator& generator,
                                   const AttackConfig& config);
ReconstructionResult direct_attack(const AttackInput& input, const AttackConfig& config);

}  // namespace gradinv
