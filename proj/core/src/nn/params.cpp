#include "metabug/nn/params.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "metabug/graph/vocab.hpp"
#include "metabug/util/random.hpp"

namespace metabug::nn {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "metabug-weights";
constexpr int kVersion = 1;

const char* kGruGates[] = {"r", "z", "n"};
const char* kLstmGates[] = {"i", "f", "o", "g"};

}  // namespace

std::map<std::string, std::vector<std::size_t>> parameter_shapes(const ModelConfig& c) {
  auto d = static_cast<std::size_t>(c.d);
  std::map<std::string, std::vector<std::size_t>> s;
  s["embedding"] = {graph::vocabulary().size(), d};
  for (int k = 0; k < kMessageKinds; ++k) {
    s["msg.W." + std::to_string(k)] = {d, d};
    s["msg.b." + std::to_string(k)] = {d};
  }
  for (const char* g : kGruGates) {
    s[std::string("gru.W") + g] = {d, d};
    s[std::string("gru.U") + g] = {d, d};
    s[std::string("gru.b") + g] = {d};
  }
  for (const char* g : kLstmGates) {
    s[std::string("lstm.W") + g] = {2 * d, d};
    s[std::string("lstm.U") + g] = {2 * d, 2 * d};
    s[std::string("lstm.b") + g] = {2 * d};
  }
  s["proj.W"] = {d, 2 * d};
  s["proj.b"] = {d};
  s["meta.H0"] = {d};
  s["meta.c0"] = {2 * d};
  return s;
}

bool ModelParams::trainable(const std::string& name) { return name.rfind("meta.", 0) != 0; }

ModelParams ModelParams::init(const ModelConfig& config) {
  if (config.d < 1 || config.steps < 0 || config.read_steps < 0)
    throw std::invalid_argument("model config needs d >= 1, steps >= 0, read_steps >= 0");
  ModelParams p;
  p.config = config;
  util::Rng rng(util::derive_seed(config.seed, 0x9e11));
  for (const auto& [name, shape] : parameter_shapes(config)) {
    Tensor t(shape);
    bool bias = t.is_vector() && name != "meta.H0" && name != "meta.c0";
    double scale = (name == "embedding" || name == "meta.H0") ? 1.0 : 0.1;
    if (!bias)
      for (double& x : t.data) x = scale * rng.normal();
    p.tensors.emplace(name, std::move(t));
  }
  return p;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("no parameter '" + name + "'");
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("no parameter '" + name + "'");
  return it->second;
}

std::string to_json(const ModelParams& params) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  const ModelConfig& c = params.config;
  j["config"] = {{"d", c.d},
                 {"steps", c.steps},
                 {"read_steps", c.read_steps},
                 {"seed", c.seed},
                 {"global_attention", c.global_attention},
                 {"relational", c.relational}};
  json tensors = json::array();
  for (const auto& [name, t] : params.tensors)
    tensors.push_back({{"name", name}, {"shape", t.shape}, {"data", t.data}});
  j["tensors"] = std::move(tensors);
  return j.dump();
}

ModelParams params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("weights file is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != kFormat || j.value("version", 0) != kVersion)
    throw std::runtime_error("not a metabug weights file (format/version)");
  ModelParams p;
  const json& c = j.at("config");
  p.config.d = c.at("d").get<int>();
  p.config.steps = c.at("steps").get<int>();
  p.config.read_steps = c.at("read_steps").get<int>();
  p.config.seed = c.at("seed").get<std::uint64_t>();
  p.config.global_attention = c.at("global_attention").get<bool>();
  p.config.relational = c.at("relational").get<bool>();
  auto expected = parameter_shapes(p.config);
  for (const json& t : j.at("tensors")) {
    std::string name = t.at("name").get<std::string>();
    auto shape = t.at("shape").get<std::vector<std::size_t>>();
    auto it = expected.find(name);
    if (it == expected.end()) throw ShapeMismatch("unexpected tensor '" + name + "'");
    if (it->second != shape)
      throw ShapeMismatch("tensor '" + name + "' has shape " + shape_string(shape) + ", expected " +
                          shape_string(it->second));
    auto data = t.at("data").get<std::vector<double>>();
    try {
      p.tensors.emplace(name, Tensor(shape, std::move(data)));
    } catch (const std::invalid_argument& e) {
      throw ShapeMismatch("tensor '" + name + "': " + e.what());
    }
  }
  if (p.tensors.size() != expected.size()) throw ShapeMismatch("weights file is missing tensors");
  return p;
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(params) << "\n";
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return params_from_json(ss.str());
}

BoundParams::BoundParams(Tape& tape, const ModelParams& params, bool with_grad)
    : tape_(&tape), config_(params.config) {
  for (const auto& [name, t] : params.tensors)
    vars_.emplace(name, with_grad && ModelParams::trainable(name) ? tape.leaf(t) : tape.constant(t));
}

std::map<std::string, Tensor> BoundParams::gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : vars_)
    if (ModelParams::trainable(name)) out.emplace(name, tape_->grad(v));
  return out;
}

}  // namespace metabug::nn
