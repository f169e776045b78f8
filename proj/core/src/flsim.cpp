#include "gradinv/flsim.hpp"

#include <stdexcept>

#include "gradinv/defenses.hpp"

namespace gradinv {

int64_t GradientSet::total_size() const {
  int64_t n = 0;
  for (const auto& [name, t] : entries) n += t.numel();
  return n;
}

std::vector<double> GradientSet::flat() const {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(total_size()));
  for (const auto& [name, t] : entries)
    out.insert(out.end(), t.value().vec().begin(), t.value().vec().end());
  return out;
}

GradientSet GradientSet::with_flat(const std::vector<double>& values) const {
  if (static_cast<int64_t>(values.size()) != total_size())
    throw std::invalid_argument("GradientSet::with_flat: size mismatch");
  GradientSet out;
  out.batch_size_used = batch_size_used;
  out.entries.reserve(entries.size());
  size_t pos = 0;
  for (const auto& [name, t] : entries) {
    size_t n = static_cast<size_t>(t.numel());
    std::vector<double> chunk(values.begin() + pos, values.begin() + pos + n);
    pos += n;
    out.entries.emplace_back(name, Tensor::constant(NDArray(t.shape(), std::move(chunk))));
  }
  return out;
}

GradientSet GradientSet::detached() const {
  GradientSet out;
  out.batch_size_used = batch_size_used;
  out.entries.reserve(entries.size());
  for (const auto& [name, t] : entries) out.entries.emplace_back(name, t.detach());
  return out;
}

bool GradientSet::same_layout(const GradientSet& other) const {
  if (entries.size() != other.entries.size()) return false;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != other.entries[i].first) return false;
    if (entries[i].second.shape() != other.entries[i].second.shape()) return false;
  }
  return true;
}

GradientSet client_gradient(const TargetModel& model, const Tensor& images,
                            const LabelBatch& labels, bool differentiable) {
  const Shape& s = images.shape();
  if (s.size() != 4) throw std::invalid_argument("client_gradient: images must be [B,C,H,W]");
  if (labels.size() != s[0])
    throw std::invalid_argument("client_gradient: label count != batch size");

  Tensor loss = classification_loss(classify(model, images), labels);

  std::vector<Tensor> wrt;
  wrt.reserve(model.parameters.size());
  for (const auto& [name, t] : model.parameters) wrt.push_back(t);
  std::vector<Tensor> grads = grad(loss, wrt);

  GradientSet out;
  out.batch_size_used = s[0];
  out.entries.reserve(grads.size());
  for (size_t i = 0; i < grads.size(); ++i)
    out.entries.emplace_back(model.parameters[i].first,
                             differentiable ? grads[i] : grads[i].detach());
  return out;
}

GradientSet client_gradient(const TargetModel& model, const ImageBatch& images,
                            const LabelBatch& labels) {
  return client_gradient(model, Tensor::constant(images.data), labels, false);
}

GradientSet report_gradient(const GradientSet& grad, const DefenseSpec& spec, Rng& rng) {
  spec.validate();
  return apply_defense(grad, spec, rng);
}

AttackInput make_attack_input(const TargetModel& model, const GradientSet& defended_grad,
                              const LabelBatch& labels) {
  if (defended_grad.entries.size() != model.parameters.size())
    throw std::invalid_argument("make_attack_input: gradient entry count does not match model");
  for (size_t i = 0; i < model.parameters.size(); ++i) {
    const auto& [gname, gt] = defended_grad.entries[i];
    const auto& [pname, pt] = model.parameters[i];
    if (gname != pname || gt.shape() != pt.shape())
      throw std::invalid_argument("make_attack_input: gradient entry '" + gname +
                                  "' inconsistent with model parameter '" + pname + "'");
  }
  if (labels.size() < 1) throw std::invalid_argument("make_attack_input: empty labels");
  if (defended_grad.batch_size_used != 0 && defended_grad.batch_size_used != labels.size())
    throw std::invalid_argument("make_attack_input: label count != gradient batch size");
  for (int64_t y : labels.labels)
    if (y < 0 || y >= model.num_classes)
      throw std::invalid_argument("make_attack_input: label out of range");

  AttackInput in;
  in.model = &model;
  in.observed_gradient = defended_grad.detached();
  in.labels = labels;
  in.batch_size = labels.size();
  return in;
}

}  // namespace gradinv
