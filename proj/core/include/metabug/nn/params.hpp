#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "metabug/nn/autodiff.hpp"
#include "metabug/nn/tensor.hpp"

namespace metabug::nn {

/// Forward kinds of the graph edges plus their reverses; meta links carry no messages.
inline constexpr int kMessageKinds = 14;

struct ModelConfig {
  int d = 64;
  int steps = 6;
  int read_steps = 3;
  std::uint64_t seed = 1;
  /// Ablation switches.
  bool global_attention = true;
  bool relational = true;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class ShapeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named parameter tensors. meta.H0 and meta.c0 are fixed random states and
/// are not trained.
struct ModelParams {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;

  /// Seeded initialization: unit-normal embeddings and initial states,
  /// 0.1-scaled normal weight matrices, zero biases.
  static ModelParams init(const ModelConfig& config);

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  static bool trainable(const std::string& name);
};

/// Expected shape of every tensor for `config`.
std::map<std::string, std::vector<std::size_t>> parameter_shapes(const ModelConfig& config);

/// JSON with a format tag, the config, and a shape manifest next to each tensor.
std::string to_json(const ModelParams& params);
/// Throws ShapeMismatch when a tensor disagrees with the manifest config.
ModelParams params_from_json(const std::string& text);
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

/// Parameters recorded on a tape as leaves (trainable) or constants.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ModelParams& params, bool with_grad);
  Var operator[](const std::string& name) const { return vars_.at(name); }
  const ModelConfig& config() const { return config_; }
  Tape& tape() const { return *tape_; }
  /// Gradients of every trainable tensor after tape.backward().
  std::map<std::string, Tensor> gradients() const;

 private:
  Tape* tape_;
  ModelConfig config_;
  std::map<std::string, Var> vars_;
};

}  // namespace metabug::nn
