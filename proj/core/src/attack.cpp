#include "gradinv/attack.hpp"

#include <cmath>
#include <stdexcept>

namespace gradinv {

DistanceKind distance_from_string(const std::string& s) {
  if (s == "mse") return DistanceKind::Mse;
  if (s == "cosine") return DistanceKind::Cosine;
  if (s == "maxabs") return DistanceKind::MaxAbs;
  throw std::invalid_argument("unknown distance: " + s);
}

std::string distance_to_string(DistanceKind d) {
  switch (d) {
    case DistanceKind::Mse: return "mse";
    case DistanceKind::Cosine: return "cosine";
    case DistanceKind::MaxAbs: return "maxabs";
  }
  throw std::logic_error("bad DistanceKind");
}

InitKind init_from_string(const std::string& s) {
  if (s == "randn") return InitKind::Randn;
  if (s == "rand") return InitKind::Rand;
  if (s == "normal-imagenet") return InitKind::NormalImagenet;
  throw std::invalid_argument("unknown init kind: " + s);
}

std::string init_to_string(InitKind k) {
  switch (k) {
    case InitKind::Randn: return "randn";
    case InitKind::Rand: return "rand";
    case InitKind::NormalImagenet: return "normal-imagenet";
  }
  throw std::logic_error("bad InitKind");
}

void AttackConfig::validate() const {
  if (total_iters < 1) throw std::invalid_argument("AttackConfig: total_iters must be >= 1");
  if (!(base_lr > 0.0)) throw std::invalid_argument("AttackConfig: base_lr must be > 0");
  if (!(lr_decay_factor > 0.0))
    throw std::invalid_argument("AttackConfig: lr_decay_factor must be > 0");
  double prev = 0.0;
  for (double m : lr_milestones) {
    if (!(m > prev && m < 1.0))
      throw std::invalid_argument("AttackConfig: milestones must be strictly increasing in (0,1)");
    prev = m;
  }
  if (consensus_period < 1)
    throw std::invalid_argument("AttackConfig: consensus_period must be >= 1");
  reg_weights.validate();
  effective_schedule().validate();
}

DistanceKind AttackConfig::effective_distance(bool direct) const {
  if (distance.has_value()) return *distance;
  return direct ? DistanceKind::Cosine : DistanceKind::Mse;
}

ScheduleParams AttackConfig::effective_schedule() const {
  ScheduleParams s = schedule;
  s.total_iters = total_iters;
  return s;
}

namespace {

const double kImagenetMean[3] = {0.485, 0.456, 0.406};
const double kImagenetStd[3] = {0.229, 0.224, 0.225};

}  // namespace

NDArray init_variable(const Shape& shape, InitKind kind, uint64_t seed) {
  if (shape.empty() || shape[0] < 1)
    throw std::invalid_argument("init_variable: leading dimension must be >= 1");
  NDArray out(shape);
  int64_t slots = shape[0];
  int64_t per_slot = out.numel() / slots;
  bool channelwise = shape.size() == 4 && shape[1] == 3;
  int64_t hw = channelwise ? shape[2] * shape[3] : 0;
  for (int64_t s = 0; s < slots; ++s) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(s)));
    for (int64_t i = 0; i < per_slot; ++i) {
      double v = 0.0;
      switch (kind) {
        case InitKind::Randn: v = rng.normal(); break;
        case InitKind::Rand: v = rng.uniform01(); break;
        case InitKind::NormalImagenet: {
          int64_t c = channelwise ? (i / hw) : (i % 3);
          v = rng.normal(kImagenetMean[c], kImagenetStd[c]);
          break;
        }
      }
      out[s * per_slot + i] = v;
    }
  }
  return out;
}

LatentBatch init_latents(int64_t batch_size, int64_t dim, InitKind kind, uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("init_latents: batch_size must be >= 1");
  if (dim < 1) throw std::invalid_argument("init_latents: dim must be >= 1");
  return LatentBatch(init_variable({batch_size, dim}, kind, seed));
}

double lr_at(int64_t t, const AttackConfig& config) {
  config.validate();
  if (t < 0 || t >= config.total_iters) throw std::out_of_range("lr_at: t out of [0,T)");
  int64_t decays = 0;
  for (double m : config.lr_milestones)
    if (static_cast<double>(t) >= m * static_cast<double>(config.total_iters)) ++decays;
  return config.base_lr * std::pow(config.lr_decay_factor, static_cast<double>(decays));
}

namespace {

AttackState init_common(const AttackInput& input, const AttackConfig& config) {
  config.validate();
  if (input.model == nullptr) throw std::invalid_argument("attack: input has no model");
  if (input.labels.size() != input.batch_size || input.batch_size < 1)
    throw std::invalid_argument("attack: labels missing or inconsistent");
  AttackState st;
  st.model = input.model;
  st.config = config;
  st.schedule = config.effective_schedule();
  st.labels = input.labels;
  st.observed = input.observed_gradient.detached();
  st.aux_weights = config.reg_weights;
  st.t = 0;
  st.have_consensus = false;
  return st;
}

Tensor distance_loss(DistanceKind kind, const GradientSet& dummy, const GradientSet& observed) {
  switch (kind) {
    case DistanceKind::Mse: return grad_distance_mse(dummy, observed);
    case DistanceKind::Cosine: return grad_distance_cosine(dummy, observed);
    case DistanceKind::MaxAbs: return grad_distance_maxabs(dummy, observed);
  }
  throw std::logic_error("bad DistanceKind");
}

ImageBatch clamped_batch(NDArray data) {
  clamp01(data);
  return ImageBatch(std::move(data));
}

}  // namespace

AttackState init_gi_smn_state(const AttackInput& input, const Generator& generator,
                              const AttackConfig& config) {
  AttackState st = init_common(input, config);
  if (generator.out_shape != input.model->input_shape)
    throw std::invalid_argument("attack: generator output " + shape_str(generator.out_shape) +
                                " does not match model input " +
                                shape_str(input.model->input_shape));
  st.generator = &generator;
  st.distance = config.effective_distance(false);
  st.variable = init_variable({input.batch_size, generator.latent_dim}, config.init_kind,
                              config.seed);
  st.adam = AdamState(st.variable.shape(), config.adam_beta1, config.adam_beta2, config.adam_eps);
  return st;
}

AttackState init_direct_state(const AttackInput& input, const AttackConfig& config) {
  AttackState st = init_common(input, config);
  st.generator = nullptr;
  st.distance = config.effective_distance(true);
  // Direct baseline regularizes with TV only.
  st.aux_weights.alpha_l2 = 0.0;
  st.aux_weights.alpha_group = 0.0;
  const Shape& in = input.model->input_shape;
  st.variable = init_variable({input.batch_size, in[0], in[1], in[2]}, config.init_kind,
                              config.seed);
  clamp01(st.variable);
  st.adam = AdamState(st.variable.shape(), config.adam_beta1, config.adam_beta2, config.adam_eps);
  return st;
}

void attack_step(AttackState& state) {
  if (state.t >= state.config.total_iters)
    throw std::logic_error("attack_step: all iterations already run");
  int64_t t = state.t;
  double lr = lr_at(t, state.config);
  auto [w_grad, w_aux] = schedule_weights(t, state.schedule);

  Tensor var = Tensor::leaf(state.variable, true);
  Tensor images = state.generator ? generate(*state.generator, var) : var;

  GradientSet dummy = client_gradient(*state.model, images, state.labels, true);
  Tensor dist = distance_loss(state.distance, dummy, state.observed);
  Tensor loss = scale(dist, w_grad);

  double aux_contrib = 0.0;
  if (w_aux != 0.0) {
    bool needs_consensus = state.aux_weights.alpha_group != 0.0;
    if (needs_consensus) {
      int64_t transition = state.schedule.transition_index();
      bool refresh = (t == transition && !state.have_consensus) ||
                     (t > transition && state.config.consensus_period > 0 &&
                      t % state.config.consensus_period == 0);
      if (!state.have_consensus || refresh) {
        state.consensus = compute_consensus(images.value());
        state.have_consensus = true;
      }
    }
    Tensor consensus_t =
        needs_consensus ? Tensor::constant(state.consensus) : Tensor();
    Tensor aux = combined_aux(images, state.aux_weights, consensus_t);
    aux_contrib = w_aux * aux.value().item();
    loss = add(loss, scale(aux, w_aux));
  }

  double grad_loss = dist.value().item();
  if (!std::isfinite(loss.value().item()))
    throw std::runtime_error("attack: non-finite loss at iteration " + std::to_string(t));

  Tensor g = grad(loss, {var})[0];
  state.adam.step(state.variable, g.value(), lr);
  if (!state.generator) clamp01(state.variable);

  state.trajectory.push_back({t, grad_loss, aux_contrib, lr});
  state.t = t + 1;
}

namespace {

ReconstructionResult run_loop(AttackState& st) {
  while (st.t < st.config.total_iters) attack_step(st);
  ReconstructionResult res;
  if (st.generator) {
    LatentBatch z(st.variable);
    res.images = generate(*st.generator, z);
    res.final_latents = std::move(z);
  } else {
    res.images = clamped_batch(st.variable);
  }
  res.trajectory = std::move(st.trajectory);
  res.iters_run = st.t;
  return res;
}

}  // namespace

ReconstructionResult gi_smn_attack(const AttackInput& input, const Generator& generator,
                                   const AttackConfig& config) {
  AttackState st = init_gi_smn_state(input, generator, config);
  return run_loop(st);
}

ReconstructionResult direct_attack(const AttackInput& input, const AttackConfig& config) {
  AttackState st = init_direct_state(input, config);
  return run_loop(st);
}

}  // namespace gradinv
