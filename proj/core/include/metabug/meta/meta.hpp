#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metabug/nn/gnn.hpp"
#include "metabug/nn/params.hpp"

namespace metabug::meta {

using nn::BoundParams;
using nn::GraphInput;
using nn::ModelParams;
using nn::Tensor;
using nn::Var;

inline constexpr double kDefaultEpsilon = 1.0;

class EmptyRelationSet : public std::invalid_argument {
 public:
  EmptyRelationSet() : std::invalid_argument("relational embedding needs at least one peer") {}
};

class TooFewPrograms : public std::invalid_argument {
 public:
  TooFewPrograms() : std::invalid_argument("ranking needs at least two programs") {}
};

/// δ^k for every row of `raw` (n×d), each row using the other rows as its
/// peer set. k = 0 returns `raw`.
Var relational_embed_all(Var raw, const BoundParams& p, int k);

/// δ^k(x) with peers R (rows of `peers`).
Tensor relational_embed(const Tensor& x, const Tensor& peers, const ModelParams& params, int k);

/// max(‖a−p‖² − ‖a−n‖² + ε, 0).
double triplet_loss(const Tensor& anchor, const Tensor& pos, const Tensor& neg,
                    double epsilon = kDefaultEpsilon);
Var triplet_loss(Var anchor, Var pos, Var neg, double epsilon = kDefaultEpsilon);

/// Σ_{q∈Q} Σ_{p∈P} max(‖r̄−δ(q)‖² − ‖r̄−δ(p)‖² + ε, 0).
double group_loss(const Tensor& rbar, const std::vector<Tensor>& buggy,
                  const std::vector<Tensor>& correct, double epsilon = kDefaultEpsilon);
Var group_loss(Var rbar, const std::vector<Var>& buggy, const std::vector<Var>& correct,
               double epsilon = kDefaultEpsilon);

/// One inconsistency group in graph form.
struct TrainingGroup {
  std::string id;
  std::vector<GraphInput> buggy;
  std::vector<GraphInput> correct;
};

/// The full per-group objective: raw embeddings, r̄ over them, relational
/// embeddings over P ∪ Q, and group_loss.
Var group_objective(const TrainingGroup& group, const BoundParams& p, double epsilon);

/// Σ over groups of the group objective (no gradients).
double total_loss(const std::vector<TrainingGroup>& groups, const ModelParams& params,
                  double epsilon = kDefaultEpsilon);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 200;
  double epsilon = kDefaultEpsilon;
};

struct LogEntry {
  int epoch = 0;
  std::string group;
  double loss = 0;
};

struct TrainHooks {
  std::function<void(const LogEntry&)> on_log;
  /// Called after each finished epoch (1-based count of completed epochs).
  std::function<void(int, const ModelParams&)> on_epoch;
};

/// Plain gradient descent, one step per group per epoch, groups in the given
/// order. Starts at epoch `start_epoch` so a checkpoint can be resumed.
/// NonFinite errors are rethrown naming the epoch and group.
ModelParams train(const std::vector<TrainingGroup>& groups, ModelParams params,
                  const TrainConfig& config, const TrainHooks& hooks = {}, int start_epoch = 0);

struct RankingEntry {
  std::string id;
  double distance = 0;
  int rank = 0;
};

/// Ranks by Euclidean distance of each δ^k (or g_θ when the relational
/// embedding is ablated) from the set's mean, farthest first, ties by id.
std::vector<RankingEntry> rank(const std::vector<std::string>& ids,
                               const std::vector<GraphInput>& graphs, const ModelParams& params);

/// Same, starting from given raw embeddings (rows of `raw`).
std::vector<RankingEntry> rank_embeddings(const std::vector<std::string>& ids, const Tensor& raw,
                                          const ModelParams& params);

}  // namespace metabug::meta
