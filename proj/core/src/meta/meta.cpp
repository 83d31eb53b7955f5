#include "metabug/meta/meta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace metabug::meta {

using nn::Tape;

Var relational_embed_all(Var raw, const BoundParams& p, int k) {
  if (k == 0) return raw;
  std::size_t n = raw.value().rows();
  if (n < 2) throw EmptyRelationSet();
  Var delta = raw;
  Var cell = nn::broadcast_row(p["meta.c0"], n);
  auto gate = [&](const char* name, Var hidden) {
    std::string g(name);
    return nn::add_row(nn::add(nn::matmul_t(raw, p["lstm.W" + g]), nn::matmul_t(hidden, p["lstm.U" + g])),
                       p["lstm.b" + g]);
  };
  for (int step = 0; step < k; ++step) {
    Var weights = nn::softmax_rows_offdiag(nn::matmul_t(delta, delta));
    Var z = nn::matmul(weights, delta);
    Var hidden = nn::concat_cols(delta, z);
    Var i = nn::sigmoid(gate("i", hidden));
    Var f = nn::sigmoid(gate("f", hidden));
    Var o = nn::sigmoid(gate("o", hidden));
    Var g = nn::tanh(gate("g", hidden));
    cell = nn::add(nn::mul(f, cell), nn::mul(i, g));
    Var out = nn::mul(o, nn::tanh(cell));
    delta = nn::add(nn::add_row(nn::matmul_t(out, p["proj.W"]), p["proj.b"]), raw);
  }
  return delta;
}

Tensor relational_embed(const Tensor& x, const Tensor& peers, const ModelParams& params, int k) {
  if (k == 0) return x;
  if (peers.rows() == 0 || !peers.is_matrix()) throw EmptyRelationSet();
  Tape tape;
  BoundParams p(tape, params, false);
  std::size_t d = x.size();
  Tensor all({peers.rows() + 1, d});
  for (std::size_t j = 0; j < d; ++j) all.at(0, j) = x[j];
  for (std::size_t i = 0; i < peers.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) all.at(i + 1, j) = peers.at(i, j);
  return nn::row(relational_embed_all(tape.constant(all), p, k), 0).value();
}

namespace {
double squared_distance(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}
}  // namespace

double triplet_loss(const Tensor& anchor, const Tensor& pos, const Tensor& neg, double epsilon) {
  return std::max(squared_distance(anchor, pos) - squared_distance(anchor, neg) + epsilon, 0.0);
}

Var triplet_loss(Var anchor, Var pos, Var neg, double epsilon) {
  return nn::relu(nn::affine(nn::sub(nn::sqdist(anchor, pos), nn::sqdist(anchor, neg)), 1.0, epsilon));
}

double group_loss(const Tensor& rbar, const std::vector<Tensor>& buggy,
                  const std::vector<Tensor>& correct, double epsilon) {
  double total = 0;
  for (const auto& q : correct)
    for (const auto& p : buggy) total += triplet_loss(rbar, q, p, epsilon);
  return total;
}

Var group_loss(Var rbar, const std::vector<Var>& buggy, const std::vector<Var>& correct,
               double epsilon) {
  Tape& tape = *rbar.tape;
  std::vector<Var> near, far;
  for (Var q : correct) near.push_back(nn::sqdist(rbar, q));
  for (Var p : buggy) far.push_back(nn::sqdist(rbar, p));
  Var total = tape.constant(Tensor::scalar(0.0));
  for (Var dq : near)
    for (Var dp : far) total = nn::add(total, nn::relu(nn::affine(nn::sub(dq, dp), 1.0, epsilon)));
  return total;
}

Var group_objective(const TrainingGroup& group, const BoundParams& p, double epsilon) {
  if (group.buggy.empty() || group.correct.empty())
    throw std::invalid_argument("group '" + group.id + "' needs buggy and correct programs");
  std::vector<Var> raw;
  for (const auto& g : group.buggy) raw.push_back(nn::graph_embed(g, p));
  for (const auto& g : group.correct) raw.push_back(nn::graph_embed(g, p));
  Var stacked = nn::stack_rows(raw);
  Var rbar = nn::mean_rows(stacked);
  int k = p.config().relational ? p.config().read_steps : 0;
  Var delta = relational_embed_all(stacked, p, k);
  std::vector<Var> buggy, correct;
  for (std::size_t i = 0; i < raw.size(); ++i)
    (i < group.buggy.size() ? buggy : correct).push_back(nn::row(delta, i));
  return group_loss(rbar, buggy, correct, epsilon);
}

double total_loss(const std::vector<TrainingGroup>& groups, const ModelParams& params, double epsilon) {
  double total = 0;
  for (const auto& g : groups) {
    Tape tape;
    BoundParams p(tape, params, false);
    total += group_objective(g, p, epsilon).value().item();
  }
  return total;
}

ModelParams train(const std::vector<TrainingGroup>& groups, ModelParams params,
                  const TrainConfig& config, const TrainHooks& hooks, int start_epoch) {
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    for (const auto& group : groups) {
      try {
        Tape tape;
        BoundParams p(tape, params, true);
        Var loss = group_objective(group, p, config.epsilon);
        tape.backward(loss);
        for (auto& [name, g] : p.gradients()) {
          Tensor& t = params.at(name);
          for (std::size_t i = 0; i < t.size(); ++i) t[i] -= config.learning_rate * g[i];
          nn::check_finite(t, "parameter update");
        }
        if (hooks.on_log) hooks.on_log(LogEntry{epoch + 1, group.id, loss.value().item()});
      } catch (const nn::NonFinite& e) {
        throw nn::NonFinite(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) +
                            ", group " + group.id + ")");
      }
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch + 1, params);
  }
  return params;
}

std::vector<RankingEntry> rank_embeddings(const std::vector<std::string>& ids, const Tensor& raw,
                                          const ModelParams& params) {
  if (ids.size() < 2 || raw.rows() != ids.size()) throw TooFewPrograms();
  Tape tape;
  BoundParams p(tape, params, false);
  int k = params.config.relational ? params.config.read_steps : 0;
  Tensor delta = relational_embed_all(tape.constant(raw), p, k).value();
  std::size_t n = delta.rows(), d = delta.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += delta.at(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<RankingEntry> out;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) {
      double x = delta.at(i, j) - mean[j];
      s += x * x;
    }
    out.push_back(RankingEntry{ids[i], std::sqrt(s), 0});
  }
  std::sort(out.begin(), out.end(), [](const RankingEntry& a, const RankingEntry& b) {
    if (a.distance != b.distance) return a.distance > b.distance;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i + 1);
  return out;
}

std::vector<RankingEntry> rank(const std::vector<std::string>& ids,
                               const std::vector<GraphInput>& graphs, const ModelParams& params) {
  if (ids.size() < 2 || graphs.size() != ids.size()) throw TooFewPrograms();
  auto d = static_cast<std::size_t>(params.config.d);
  Tensor raw({graphs.size(), d});
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    Tensor e = nn::embed(graphs[i], params);
    for (std::size_t j = 0; j < d; ++j) raw.at(i, j) = e[j];
  }
  return rank_embeddings(ids, raw, params);
}

}  // namespace metabug::meta
