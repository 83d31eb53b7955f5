#pragma once

#include <array>
#include <utility>
#include <vector>

#include "metabug/graph/pdg.hpp"
#include "metabug/nn/autodiff.hpp"
#include "metabug/nn/params.hpp"

namespace metabug::nn {

/// Native nodes of a graph in index form. Edge lists hold (dst, src) pairs.
struct GraphInput {
  std::vector<int> tokens;
  std::vector<graph::NodeId> node_ids;
  /// Statement each node belongs to (kNoNode for entries and formals).
  std::vector<graph::NodeId> stmt_of;
  std::array<std::vector<std::pair<int, int>>, kMessageKinds> edges;

  std::size_t size() const { return tokens.size(); }
};

/// Drops the meta node and its links; each edge kind also feeds a reverse kind.
GraphInput to_graph_input(const graph::InterproceduralPDG& g);

/// Per round: scores e_n, weights α_n and the meta state after the round.
struct AttentionMap {
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<double>> alpha;
  std::vector<std::vector<double>> meta_states;

  const std::vector<double>& final_alpha() const { return alpha.back(); }
};

struct AttendedPass {
  Var states;  // N×d
  Var meta;    // d
  std::vector<Var> scores;
  std::vector<Var> alphas;
  std::vector<Var> metas;
};

/// Initial states h⁰: token embeddings.
Var initial_states(const GraphInput& g, const BoundParams& p);

/// `steps` rounds of m_n = Σ f_k(h_u) over in-edges, h'_n = GRU(m_n, h_n).
Var message_pass_plain(const GraphInput& g, const BoundParams& p);

/// Rounds gated by global attention against the meta state H:
/// α = softmax(⟨h_n, H⟩), a = min(1, |N|·α), m_n = Σ a_u f_k(h_u), h'_n = GRU(m_n, a_n h_n),
/// H' = Σ α_n h'_n. Uniform attention gates every node by 1. With
/// force_alpha_one every gate is 1 and the meta state is left at H⁰, which
/// reproduces message_pass_plain exactly.
AttendedPass message_pass_attended(const GraphInput& g, const BoundParams& p,
                                   bool force_alpha_one = false);

/// g_θ: the final meta state, or the mean node state when global attention is
/// ablated.
Var graph_embed(const GraphInput& g, const BoundParams& p);

/// Gradient-free conveniences.
Tensor embed(const GraphInput& g, const ModelParams& params);
AttentionMap attention(const GraphInput& g, const ModelParams& params);

/// One GRU update for matrices of inputs and states (rows are nodes).
Var gru_cell(Var x, Var h, const BoundParams& p);

}  // namespace metabug::nn
