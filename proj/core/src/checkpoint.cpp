#include "gradinv/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace gradinv {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'G', 'I', 'N', 'V'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_container(const std::filesystem::path& path, const json& manifest,
                     const std::vector<std::pair<std::string, Tensor>>& arrays) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  std::string m = manifest.dump();
  put_u64(os, m.size());
  os.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const auto& [name, t] : arrays) {
    for (double d : t.value().vec()) {
      float f = static_cast<float>(d);
      uint32_t bits = std::bit_cast<uint32_t>(f);
      put_u32(os, bits);
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

struct Container {
  json manifest;
  std::vector<NDArray> arrays;  // shapes from manifest "params"
};

Container read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad container magic in " + path.string());
  uint32_t version = get_u32(is);
  if (version != kVersion)
    throw std::runtime_error("unsupported container version in " + path.string());
  uint64_t mlen = get_u64(is);
  std::string m(mlen, '\0');
  is.read(m.data(), static_cast<std::streamsize>(mlen));
  if (!is) throw std::runtime_error("truncated manifest in " + path.string());

  Container c;
  c.manifest = json::parse(m);
  for (const auto& p : c.manifest.at("params")) {
    Shape shape;
    for (const auto& d : p.at("shape")) shape.push_back(d.get<int64_t>());
    NDArray arr(shape);
    for (int64_t i = 0; i < arr.numel(); ++i) {
      uint32_t bits = get_u32(is);
      arr[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    if (!is) throw std::runtime_error("truncated data in " + path.string());
    c.arrays.push_back(std::move(arr));
  }
  return c;
}

json params_manifest(const std::vector<std::pair<std::string, Tensor>>& arrays) {
  json out = json::array();
  for (const auto& [name, t] : arrays) {
    json p;
    p["name"] = name;
    p["shape"] = t.shape();
    out.push_back(p);
  }
  return out;
}

}  // namespace

void save_model(const std::filesystem::path& path, const TargetModel& model) {
  json m;
  m["kind"] = "model";
  m["version"] = kVersion;
  m["arch_id"] = arch_to_string(model.arch_id);
  m["input_shape"] = model.input_shape;
  m["num_classes"] = model.num_classes;
  m["seed"] = model.init_seed;
  m["params"] = params_manifest(model.parameters);
  write_container(path, m, model.parameters);
}

TargetModel load_model(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.manifest.at("kind") != "model")
    throw std::runtime_error("not a model checkpoint: " + path.string());
  Shape in_shape;
  for (const auto& d : c.manifest.at("input_shape")) in_shape.push_back(d.get<int64_t>());
  TargetModel skeleton =
      build_target_model(arch_from_string(c.manifest.at("arch_id").get<std::string>()), in_shape,
                         c.manifest.at("num_classes").get<int64_t>(),
                         c.manifest.at("seed").get<uint64_t>());
  return skeleton.with_parameters(c.arrays);
}

void save_generator(const std::filesystem::path& path, const Generator& gen) {
  json m;
  m["kind"] = "generator";
  m["version"] = kVersion;
  m["latent_dim"] = gen.latent_dim;
  m["out_shape"] = gen.out_shape;
  m["seed"] = gen.init_seed;
  m["trained"] = gen.trained_flag;
  m["params"] = params_manifest(gen.weights);
  write_container(path, m, gen.weights);
}

Generator load_generator(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.manifest.at("kind") != "generator")
    throw std::runtime_error("not a generator checkpoint: " + path.string());
  Shape out_shape;
  for (const auto& d : c.manifest.at("out_shape")) out_shape.push_back(d.get<int64_t>());
  Generator skeleton = build_generator(c.manifest.at("latent_dim").get<int64_t>(), out_shape,
                                       c.manifest.at("seed").get<uint64_t>());
  Generator out = skeleton.with_weights(c.arrays);
  out.trained_flag = c.manifest.at("trained").get<bool>();
  return out;
}

void save_gradient(const std::filesystem::path& path, const GradientSet& grad) {
  json m;
  m["kind"] = "gradient";
  m["version"] = kVersion;
  m["batch_size_used"] = grad.batch_size_used;
  m["params"] = params_manifest(grad.entries);
  write_container(path, m, grad.entries);
}

GradientSet load_gradient(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.manifest.at("kind") != "gradient")
    throw std::runtime_error("not a gradient export: " + path.string());
  GradientSet out;
  out.batch_size_used = c.manifest.at("batch_size_used").get<int64_t>();
  size_t i = 0;
  for (const auto& p : c.manifest.at("params")) {
    out.entries.emplace_back(p.at("name").get<std::string>(),
                             Tensor::constant(std::move(c.arrays[i])));
    ++i;
  }
  return out;
}

}  // namespace gradinv
