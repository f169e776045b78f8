#include "gradinv/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "gradinv/optimizer.hpp"

namespace gradinv {

ArchId arch_from_string(const std::string& s) {
  if (s == "conv-small") return ArchId::ConvSmall;
  if (s == "resnet-lite") return ArchId::ResNetLite;
  if (s == "resnet18") return ArchId::ResNet18;
  throw std::invalid_argument("unknown arch_id: " + s);
}

std::string arch_to_string(ArchId a) {
  switch (a) {
    case ArchId::ConvSmall: return "conv-small";
    case ArchId::ResNetLite: return "resnet-lite";
    case ArchId::ResNet18: return "resnet18";
  }
  throw std::logic_error("bad ArchId");
}

namespace {

// Registers parameters in a fixed order with seeded He-style init.
struct ParamBuilder {
  Rng rng;
  std::vector<std::pair<std::string, Tensor>> params;

  explicit ParamBuilder(uint64_t seed) : rng(seed) {}

  Tensor weight(const std::string& name, Shape shape, int64_t fan_in) {
    NDArray w(shape);
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, stddev);
    Tensor t = Tensor::leaf(std::move(w), true);
    params.emplace_back(name, t);
    return t;
  }

  Tensor conv(const std::string& name, int64_t oc, int64_t ic, int64_t k) {
    return weight(name + ".weight", {oc, ic, k, k}, ic * k * k);
  }

  Tensor bias(const std::string& name, int64_t n) {
    Tensor t = Tensor::leaf(NDArray::zeros({n}), true);
    params.emplace_back(name + ".bias", t);
    return t;
  }

  Tensor linear(const std::string& name, int64_t in, int64_t out) {
    return weight(name + ".weight", {in, out}, in);
  }
};

// Named read access for forward passes.
struct ParamView {
  std::unordered_map<std::string, const Tensor*> map;

  explicit ParamView(const std::vector<std::pair<std::string, Tensor>>& params) {
    for (const auto& [name, t] : params) map[name] = &t;
  }

  const Tensor& operator()(const std::string& name) const {
    auto it = map.find(name);
    if (it == map.end()) throw std::logic_error("missing parameter " + name);
    return *it->second;
  }
};

Tensor conv_bias(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride, int64_t pad) {
  Tensor y = conv2d(x, w, stride, pad);
  return add(y, reshape(b, {1, b.numel(), 1, 1}));
}

Tensor global_avg_pool(const Tensor& x) {
  const Shape& s = x.shape();
  Tensor pooled = scale(sum_axes_keepdim(x, {2, 3}), 1.0 / static_cast<double>(s[2] * s[3]));
  return reshape(pooled, {s[0], s[1]});
}

Tensor linear_bias(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

struct BlockSpec {
  int64_t channels;
  int64_t stride;
};

void build_resnet_params(ParamBuilder& pb, int64_t in_ch, int64_t stem_ch,
                         const std::vector<BlockSpec>& blocks, int64_t num_classes) {
  pb.conv("stem", stem_ch, in_ch, 3);
  pb.bias("stem", stem_ch);
  int64_t ch = stem_ch;
  for (size_t i = 0; i < blocks.size(); ++i) {
    const BlockSpec& bs = blocks[i];
    std::string base = "block" + std::to_string(i);
    pb.conv(base + ".conv1", bs.channels, ch, 3);
    pb.bias(base + ".conv1", bs.channels);
    pb.conv(base + ".conv2", bs.channels, bs.channels, 3);
    pb.bias(base + ".conv2", bs.channels);
    if (bs.stride != 1 || bs.channels != ch) {
      pb.weight(base + ".proj.weight", {bs.channels, ch, 1, 1}, ch);
      pb.bias(base + ".proj", bs.channels);
    }
    ch = bs.channels;
  }
  pb.linear("head", ch, num_classes);
  pb.bias("head", num_classes);
}

Tensor resnet_forward(const ParamView& p, const Tensor& images, int64_t stem_ch,
                      const std::vector<BlockSpec>& blocks) {
  Tensor h = relu(conv_bias(images, p("stem.weight"), p("stem.bias"), 1, 1));
  int64_t ch = stem_ch;
  for (size_t i = 0; i < blocks.size(); ++i) {
    const BlockSpec& bs = blocks[i];
    std::string base = "block" + std::to_string(i);
    Tensor branch = relu(conv_bias(h, p(base + ".conv1.weight"), p(base + ".conv1.bias"),
                                   bs.stride, 1));
    branch = conv_bias(branch, p(base + ".conv2.weight"), p(base + ".conv2.bias"), 1, 1);
    Tensor skip = h;
    if (bs.stride != 1 || bs.channels != ch)
      skip = conv_bias(h, p(base + ".proj.weight"), p(base + ".proj.bias"), bs.stride, 0);
    h = relu(add(branch, skip));
    ch = bs.channels;
  }
  Tensor pooled = global_avg_pool(h);
  return linear_bias(pooled, p("head.weight"), p("head.bias"));
}

std::vector<BlockSpec> resnet_lite_blocks() { return {{16, 1}, {32, 2}}; }

std::vector<BlockSpec> resnet18_blocks() {
  return {{64, 1}, {64, 1}, {128, 2}, {128, 1}, {256, 2}, {256, 1}, {512, 2}, {512, 1}};
}

void check_input_shape(ArchId arch, const Shape& input_shape) {
  if (input_shape.size() != 3)
    throw std::invalid_argument("input_shape must be {C,H,W}, got " + shape_str(input_shape));
  int64_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  if (c < 1) throw std::invalid_argument("input channels must be >= 1");
  int64_t min_side = arch == ArchId::ResNet18 ? 16 : 8;
  if (h < min_side || w < min_side)
    throw std::invalid_argument("input " + shape_str(input_shape) + " too small for " +
                                arch_to_string(arch) + " (needs >= " + std::to_string(min_side) +
                                "x" + std::to_string(min_side) + ")");
}

}  // namespace

TargetModel build_target_model(ArchId arch, const Shape& input_shape, int64_t num_classes,
                               uint64_t seed) {
  check_input_shape(arch, input_shape);
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  ParamBuilder pb(mix_seed(seed, 0x7a26));
  int64_t in_ch = input_shape[0];
  switch (arch) {
    case ArchId::ConvSmall:
      pb.conv("conv1", 8, in_ch, 3);
      pb.bias("conv1", 8);
      pb.conv("conv2", 8, 8, 3);
      pb.bias("conv2", 8);
      pb.linear("head", 8, num_classes);
      pb.bias("head", num_classes);
      break;
    case ArchId::ResNetLite:
      build_resnet_params(pb, in_ch, 16, resnet_lite_blocks(), num_classes);
      break;
    case ArchId::ResNet18:
      build_resnet_params(pb, in_ch, 64, resnet18_blocks(), num_classes);
      break;
  }
  TargetModel m;
  m.arch_id = arch;
  m.input_shape = input_shape;
  m.num_classes = num_classes;
  m.init_seed = seed;
  m.parameters = std::move(pb.params);
  return m;
}

int64_t TargetModel::param_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : parameters) n += t.numel();
  return n;
}

std::vector<double> TargetModel::flat_parameters() const {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(param_count()));
  for (const auto& [name, t] : parameters)
    out.insert(out.end(), t.value().vec().begin(), t.value().vec().end());
  return out;
}

TargetModel TargetModel::with_parameters(const std::vector<NDArray>& values) const {
  if (values.size() != parameters.size())
    throw std::invalid_argument("with_parameters: expected " +
                                std::to_string(parameters.size()) + " arrays");
  TargetModel m;
  m.arch_id = arch_id;
  m.input_shape = input_shape;
  m.num_classes = num_classes;
  m.init_seed = init_seed;
  m.parameters.reserve(parameters.size());
  for (size_t i = 0; i < parameters.size(); ++i) {
    if (values[i].shape() != parameters[i].second.shape())
      throw std::invalid_argument("with_parameters: shape mismatch at " + parameters[i].first);
    m.parameters.emplace_back(parameters[i].first, Tensor::leaf(values[i], true));
  }
  return m;
}

Tensor classify(const TargetModel& model, const Tensor& images) {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != model.input_shape[0] || s[2] != model.input_shape[1] ||
      s[3] != model.input_shape[2])
    throw std::invalid_argument("classify: image shape " + shape_str(s) +
                                " does not match model input " + shape_str(model.input_shape));
  if (s[0] < 1) throw std::invalid_argument("classify: empty batch");
  ParamView p(model.parameters);
  switch (model.arch_id) {
    case ArchId::ConvSmall: {
      Tensor h = relu(conv_bias(images, p("conv1.weight"), p("conv1.bias"), 1, 1));
      h = relu(conv_bias(h, p("conv2.weight"), p("conv2.bias"), 1, 1));
      return linear_bias(global_avg_pool(h), p("head.weight"), p("head.bias"));
    }
    case ArchId::ResNetLite:
      return resnet_forward(p, images, 16, resnet_lite_blocks());
    case ArchId::ResNet18:
      return resnet_forward(p, images, 64, resnet18_blocks());
  }
  throw std::logic_error("bad ArchId");
}

Tensor classify(const TargetModel& model, const ImageBatch& images) {
  return classify(model, Tensor::constant(images.data));
}

Tensor classification_loss(const Tensor& logits, const LabelBatch& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw std::invalid_argument("classification_loss: logits must be [B,K]");
  int64_t b = s[0], k = s[1];
  if (labels.size() != b)
    throw std::invalid_argument("classification_loss: label count != batch size");
  NDArray onehot(Shape{b, k});
  for (int64_t i = 0; i < b; ++i) {
    int64_t y = labels.labels[static_cast<size_t>(i)];
    if (y < 0 || y >= k)
      throw std::invalid_argument("classification_loss: label " + std::to_string(y) +
                                  " out of range [0," + std::to_string(k) + ")");
    onehot[i * k + y] = 1.0;
  }
  Tensor m = rowmax_detached(logits);              // [B,1]
  Tensor z = sub(logits, m);                       // stable shift
  Tensor lse = add(log(sum_axes_keepdim(exp(z), {1})), m);
  Tensor picked = sum_axes_keepdim(mul(logits, Tensor::constant(std::move(onehot))), {1});
  return mean_all(sub(lse, picked));
}

// ---- generator ----

namespace {

struct GenPlan {
  int64_t ups = 0;                  // number of 2x upsampling stages
  std::vector<int64_t> channels;    // channels.size() == ups + 1, starting at 2x2
};

GenPlan generator_plan(const Shape& out_shape) {
  if (out_shape.size() != 3)
    throw std::invalid_argument("generator out_shape must be {C,H,W}");
  int64_t c = out_shape[0], h = out_shape[1], w = out_shape[2];
  if (c < 1) throw std::invalid_argument("generator: channels must be >= 1");
  if (h != w) throw std::invalid_argument("generator: output must be square");
  if (h < 8 || h > 64 || (h & (h - 1)) != 0)
    throw std::invalid_argument("generator: side must be a power of two in [8,64], got " +
                                std::to_string(h));
  GenPlan plan;
  int64_t side = 2;
  while (side < h) {
    side *= 2;
    ++plan.ups;
  }
  for (int64_t i = 0; i <= plan.ups; ++i)
    plan.channels.push_back(std::min<int64_t>(64, 8ll << (plan.ups - i)));
  return plan;
}

}  // namespace

Generator build_generator(int64_t latent_dim, const Shape& out_shape, uint64_t seed) {
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  GenPlan plan = generator_plan(out_shape);
  ParamBuilder pb(mix_seed(seed, 0x93e));
  int64_t d = latent_dim;
  pb.linear("mapping.fc1", d, d);
  pb.bias("mapping.fc1", d);
  pb.linear("mapping.fc2", d, d);
  pb.bias("mapping.fc2", d);
  int64_t c0 = plan.channels[0];
  pb.linear("synthesis.fc", d, c0 * 4);
  pb.bias("synthesis.fc", c0 * 4);
  for (int64_t i = 0; i < plan.ups; ++i) {
    std::string base = "synthesis.up" + std::to_string(i);
    // Transposed conv weight: [in_ch, out_ch, 4, 4].
    pb.weight(base + ".weight", {plan.channels[i], plan.channels[i + 1], 4, 4},
              plan.channels[i] * 4);
    pb.bias(base, plan.channels[i + 1]);
  }
  pb.conv("synthesis.out", out_shape[0], plan.channels.back(), 3);
  pb.bias("synthesis.out", out_shape[0]);

  Generator g;
  g.latent_dim = latent_dim;
  g.out_shape = out_shape;
  g.init_seed = seed;
  g.trained_flag = false;
  g.weights = std::move(pb.params);
  return g;
}

Generator Generator::with_weights(const std::vector<NDArray>& values) const {
  if (values.size() != weights.size())
    throw std::invalid_argument("with_weights: expected " + std::to_string(weights.size()) +
                                " arrays");
  Generator g;
  g.latent_dim = latent_dim;
  g.out_shape = out_shape;
  g.init_seed = init_seed;
  g.trained_flag = trained_flag;
  g.weights.reserve(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    if (values[i].shape() != weights[i].second.shape())
      throw std::invalid_argument("with_weights: shape mismatch at " + weights[i].first);
    g.weights.emplace_back(weights[i].first, Tensor::leaf(values[i], true));
  }
  return g;
}

Tensor generate(const Generator& gen, const Tensor& latents) {
  const Shape& s = latents.shape();
  if (s.size() != 2 || s[1] != gen.latent_dim)
    throw std::invalid_argument("generate: latents " + shape_str(s) + " do not match latent_dim " +
                                std::to_string(gen.latent_dim));
  if (!latents.value().all_finite())
    throw std::invalid_argument("generate: non-finite latent entries");
  GenPlan plan = generator_plan(gen.out_shape);
  ParamView p(gen.weights);
  int64_t b = s[0];

  Tensor style = linear_bias(latents, p("mapping.fc1.weight"), p("mapping.fc1.bias"));
  style = relu(style);
  style = linear_bias(style, p("mapping.fc2.weight"), p("mapping.fc2.bias"));

  Tensor h = relu(linear_bias(style, p("synthesis.fc.weight"), p("synthesis.fc.bias")));
  h = reshape(h, {b, plan.channels[0], 2, 2});
  int64_t side = 2;
  for (int64_t i = 0; i < plan.ups; ++i) {
    std::string base = "synthesis.up" + std::to_string(i);
    side *= 2;
    h = conv_transpose2d(h, p(base + ".weight"), 2, 1, side, side);
    h = relu(add(h, reshape(p(base + ".bias"), {1, plan.channels[i + 1], 1, 1})));
  }
  Tensor out = conv_bias(h, p("synthesis.out.weight"), p("synthesis.out.bias"), 1, 1);
  return sigmoid(out);
}

ImageBatch generate(const Generator& gen, const LatentBatch& latents) {
  return ImageBatch(generate(gen, Tensor::constant(latents.codes)).value());
}

namespace {

std::vector<NDArray> weight_values(const Generator& gen) {
  std::vector<NDArray> vals;
  vals.reserve(gen.weights.size());
  for (const auto& [name, t] : gen.weights) vals.push_back(t.value());
  return vals;
}

}  // namespace

Generator pretrain_generator(const Generator& gen, const ImageBatch& dataset, int64_t epochs,
                             uint64_t seed, double lr) {
  if (dataset.batch() < 1) throw std::invalid_argument("pretrain_generator: empty dataset");
  if (dataset.slot_shape() != gen.out_shape)
    throw std::invalid_argument("pretrain_generator: dataset images " +
                                shape_str(dataset.slot_shape()) + " do not match generator output " +
                                shape_str(gen.out_shape));
  if (epochs < 0) throw std::invalid_argument("pretrain_generator: negative epochs");
  if (epochs == 0) return gen;

  int64_t n = dataset.batch();
  Rng rng(mix_seed(seed, 0x610));
  NDArray codes(Shape{n, gen.latent_dim});
  for (int64_t i = 0; i < codes.numel(); ++i) codes[i] = rng.normal();

  std::vector<NDArray> vals = weight_values(gen);
  std::vector<AdamState> opt;
  for (const auto& v : vals) opt.emplace_back(v.shape());
  AdamState code_opt(codes.shape());
  Tensor target = Tensor::constant(dataset.data);

  for (int64_t e = 0; e < epochs; ++e) {
    Generator cur = gen.with_weights(vals);
    Tensor z = Tensor::leaf(codes, true);
    Tensor loss = mean_all(square(sub(generate(cur, z), target)));
    std::vector<Tensor> wrt;
    for (const auto& [name, t] : cur.weights) wrt.push_back(t);
    wrt.push_back(z);
    std::vector<Tensor> g = grad(loss, wrt);
    for (size_t i = 0; i < vals.size(); ++i) opt[i].step(vals[i], g[i].value(), lr);
    code_opt.step(codes, g.back().value(), lr);
  }

  Generator out = gen.with_weights(vals);
  out.trained_flag = true;
  return out;
}

LatentBatch fit_latents(const Generator& gen, const ImageBatch& targets, int64_t iters,
                        double lr, uint64_t seed) {
  if (targets.slot_shape() != gen.out_shape)
    throw std::invalid_argument("fit_latents: target shape mismatch");
  int64_t b = targets.batch();
  Rng rng(mix_seed(seed, 0xf17));
  NDArray codes(Shape{b, gen.latent_dim});
  for (int64_t i = 0; i < codes.numel(); ++i) codes[i] = rng.normal();
  AdamState opt(codes.shape());
  Tensor target = Tensor::constant(targets.data);
  for (int64_t t = 0; t < iters; ++t) {
    Tensor z = Tensor::leaf(codes, true);
    Tensor loss = mean_all(square(sub(generate(gen, z), target)));
    opt.step(codes, grad(loss, {z})[0].value(), lr);
  }
  return LatentBatch(codes);
}

}  // namespace gradinv
