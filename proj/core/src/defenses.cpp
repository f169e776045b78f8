#include "gradinv/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gradinv {

DefenseSpec DefenseSpec::none() { return DefenseSpec{}; }

DefenseSpec DefenseSpec::prune(double keep_fraction, bool per_layer) {
  DefenseSpec s;
  s.kind = Kind::Prune;
  s.keep_fraction = keep_fraction;
  s.per_layer = per_layer;
  s.validate();
  return s;
}

DefenseSpec DefenseSpec::intercept(double keep_fraction) {
  DefenseSpec s;
  s.kind = Kind::Intercept;
  s.keep_fraction = keep_fraction;
  s.validate();
  return s;
}

DefenseSpec DefenseSpec::gaussian_noise(double sigma2) {
  DefenseSpec s;
  s.kind = Kind::GaussianNoise;
  s.sigma2 = sigma2;
  s.validate();
  return s;
}

DefenseSpec DefenseSpec::chained(std::vector<DefenseSpec> steps) {
  DefenseSpec s;
  s.kind = Kind::Chain;
  s.chain = std::move(steps);
  s.validate();
  return s;
}

void DefenseSpec::validate() const {
  switch (kind) {
    case Kind::None:
      return;
    case Kind::Prune:
    case Kind::Intercept:
      if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw std::invalid_argument("defense: keep_fraction must be in (0,1]");
      return;
    case Kind::GaussianNoise:
      if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
        throw std::invalid_argument("defense: sigma2 must be finite and >= 0");
      return;
    case Kind::Chain:
      if (chain.empty()) throw std::invalid_argument("defense: empty chain");
      for (const auto& s : chain) {
        if (s.kind == Kind::Chain) throw std::invalid_argument("defense: nested chains");
        s.validate();
      }
      return;
  }
  throw std::invalid_argument("defense: unknown kind");
}

namespace {
std::string num_label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}
}  // namespace

std::string DefenseSpec::label() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::Prune:
      return (per_layer ? "pruneL" : "prune") + num_label(keep_fraction);
    case Kind::Intercept: return "intercept" + num_label(keep_fraction);
    case Kind::GaussianNoise: return "noise" + num_label(sigma2);
    case Kind::Chain: {
      std::string out = "chain";
      for (const auto& s : chain) out += "-" + s.label();
      return out;
    }
  }
  return "unknown";
}

namespace {

int64_t keep_count(double keep_fraction, int64_t n) {
  return static_cast<int64_t>(std::ceil(keep_fraction * static_cast<double>(n)));
}

void check_nonempty(const GradientSet& grad, const char* who) {
  if (grad.entries.empty() || grad.total_size() == 0)
    throw std::invalid_argument(std::string(who) + ": empty gradient");
}

// Top-k by |value| over [begin,end) of `flat`; ties keep the lower index.
void prune_range(std::vector<double>& flat, int64_t begin, int64_t end, double keep_fraction) {
  int64_t n = end - begin;
  int64_t k = keep_count(keep_fraction, n);
  if (k >= n) return;
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), begin);
  std::stable_sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    double aa = std::abs(flat[static_cast<size_t>(a)]);
    double ab = std::abs(flat[static_cast<size_t>(b)]);
    if (aa != ab) return aa > ab;
    return a < b;
  });
  for (int64_t i = k; i < n; ++i) flat[static_cast<size_t>(idx[static_cast<size_t>(i)])] = 0.0;
}

}  // namespace

GradientSet prune_gradient(const GradientSet& grad, double keep_fraction, bool per_layer) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("prune_gradient: keep_fraction must be in (0,1]");
  check_nonempty(grad, "prune_gradient");
  std::vector<double> flat = grad.flat();
  if (per_layer) {
    int64_t pos = 0;
    for (const auto& [name, t] : grad.entries) {
      prune_range(flat, pos, pos + t.numel(), keep_fraction);
      pos += t.numel();
    }
  } else {
    prune_range(flat, 0, static_cast<int64_t>(flat.size()), keep_fraction);
  }
  return grad.with_flat(flat);
}

GradientSet intercept_gradient(const GradientSet& grad, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("intercept_gradient: keep_fraction must be in (0,1]");
  check_nonempty(grad, "intercept_gradient");
  std::vector<double> flat = grad.flat();
  int64_t n = static_cast<int64_t>(flat.size());
  int64_t k = keep_count(keep_fraction, n);
  for (int64_t i = k; i < n; ++i) flat[static_cast<size_t>(i)] = 0.0;
  return grad.with_flat(flat);
}

GradientSet add_gaussian_noise(const GradientSet& grad, double sigma2, Rng& rng) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("add_gaussian_noise: sigma2 must be finite and >= 0");
  check_nonempty(grad, "add_gaussian_noise");
  std::vector<double> flat = grad.flat();
  double stddev = std::sqrt(sigma2);
  if (stddev > 0.0)
    for (double& v : flat) v += rng.normal(0.0, stddev);
  return grad.with_flat(flat);
}

GradientSet apply_defense(const GradientSet& grad, const DefenseSpec& spec, Rng& rng) {
  spec.validate();
  switch (spec.kind) {
    case DefenseSpec::Kind::None: return grad.detached();
    case DefenseSpec::Kind::Prune:
      return prune_gradient(grad, spec.keep_fraction, spec.per_layer);
    case DefenseSpec::Kind::Intercept: return intercept_gradient(grad, spec.keep_fraction);
    case DefenseSpec::Kind::GaussianNoise: return add_gaussian_noise(grad, spec.sigma2, rng);
    case DefenseSpec::Kind::Chain: {
      GradientSet cur = grad.detached();
      for (const auto& s : spec.chain) cur = apply_defense(cur, s, rng);
      return cur;
    }
  }
  throw std::invalid_argument("apply_defense: unknown kind");
}

}  // namespace gradinv
