#include "metabug/nn/gnn.hpp"

#include <algorithm>

#include "metabug/graph/vocab.hpp"

namespace metabug::nn {

using graph::EdgeKind;
using graph::NodeKind;

GraphInput to_graph_input(const graph::InterproceduralPDG& g) {
  GraphInput in;
  std::map<graph::NodeId, int> index;
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::Meta) continue;
    index[n.id] = static_cast<int>(in.tokens.size());
    in.tokens.push_back(graph::token_index(n.token));
    in.node_ids.push_back(n.id);
    in.stmt_of.push_back(n.stmt);
  }
  constexpr int kForward = kMessageKinds / 2;
  for (const auto& e : g.edges) {
    if (e.kind == EdgeKind::MetaLink) continue;
    auto k = static_cast<int>(e.kind);
    int s = index.at(e.src);
    int d = index.at(e.dst);
    in.edges[static_cast<std::size_t>(k)].emplace_back(d, s);
    in.edges[static_cast<std::size_t>(k + kForward)].emplace_back(s, d);
  }
  for (auto& list : in.edges) std::sort(list.begin(), list.end());
  return in;
}

Var initial_states(const GraphInput& g, const BoundParams& p) {
  if (g.size() == 0) throw std::invalid_argument("graph has no native nodes");
  return gather_rows(p["embedding"], g.tokens);
}

Var gru_cell(Var x, Var h, const BoundParams& p) {
  auto gate = [&](const char* name) {
    std::string n(name);
    return add_row(add(matmul_t(x, p["gru.W" + n]), matmul_t(h, p["gru.U" + n])), p["gru.b" + n]);
  };
  Var r = sigmoid(gate("r"));
  Var z = sigmoid(gate("z"));
  Var cand = tanh(add_row(add(matmul_t(x, p["gru.Wn"]), mul(r, matmul_t(h, p["gru.Un"]))), p["gru.bn"]));
  // h' = (1 - z) ⊙ n + z ⊙ h
  return add(mul(affine(z, -1.0, 1.0), cand), mul(z, h));
}

namespace {

// Σ over edge kinds of the per-kind messages; `alpha` scales each sender.
Var messages(const GraphInput& g, Var h, const Var* alpha, const BoundParams& p) {
  Tape& tape = p.tape();
  std::size_t n = g.size();
  auto d = static_cast<std::size_t>(p.config().d);
  Var total = tape.constant(Tensor({n, d}));
  for (int k = 0; k < kMessageKinds; ++k) {
    const auto& edges = g.edges[static_cast<std::size_t>(k)];
    if (edges.empty()) continue;
    std::string ks = std::to_string(k);
    Var f = add_row(matmul_t(h, p["msg.W." + ks]), p["msg.b." + ks]);
    if (alpha) f = scale_rows(f, *alpha);
    total = add(total, scatter_edges(f, edges, n));
  }
  return total;
}

}  // namespace

Var message_pass_plain(const GraphInput& g, const BoundParams& p) {
  Var h = initial_states(g, p);
  for (int step = 0; step < p.config().steps; ++step) h = gru_cell(messages(g, h, nullptr, p), h, p);
  return h;
}

namespace {

// min(1, |N|·α): uniform attention passes states unchanged, below-average
// attention damps them.
Var attention_gate(Var alpha, std::size_t n) {
  return affine(relu(affine(alpha, -static_cast<double>(n), 1.0)), -1.0, 1.0);
}

}  // namespace

AttendedPass message_pass_attended(const GraphInput& g, const BoundParams& p, bool force_alpha_one) {
  Tape& tape = p.tape();
  AttendedPass out;
  Var h = initial_states(g, p);
  Var meta = p["meta.H0"];
  for (int step = 0; step < p.config().steps; ++step) {
    Var e = matvec(h, meta);
    Var alpha = force_alpha_one ? tape.constant(Tensor({g.size()}, 1.0)) : softmax(e);
    Var gate = force_alpha_one ? alpha : attention_gate(alpha, g.size());
    Var m = messages(g, h, &gate, p);
    h = gru_cell(m, scale_rows(h, gate), p);
    if (!force_alpha_one) meta = vecmat(alpha, h);
    out.scores.push_back(e);
    out.alphas.push_back(alpha);
    out.metas.push_back(meta);
  }
  out.states = h;
  out.meta = meta;
  return out;
}

Var graph_embed(const GraphInput& g, const BoundParams& p) {
  if (!p.config().global_attention) return mean_rows(message_pass_plain(g, p));
  return message_pass_attended(g, p).meta;
}

Tensor embed(const GraphInput& g, const ModelParams& params) {
  Tape tape;
  BoundParams p(tape, params, false);
  return graph_embed(g, p).value();
}

AttentionMap attention(const GraphInput& g, const ModelParams& params) {
  Tape tape;
  BoundParams p(tape, params, false);
  AttentionMap map;
  if (!params.config.global_attention || params.config.steps == 0) {
    // Uniform weights stand in when there is no attention to report.
    std::vector<double> uniform(g.size(), 1.0 / static_cast<double>(g.size()));
    map.scores.push_back(std::vector<double>(g.size(), 0.0));
    map.alpha.push_back(uniform);
    map.meta_states.push_back(params.at("meta.H0").data);
    return map;
  }
  AttendedPass pass = message_pass_attended(g, p);
  for (std::size_t r = 0; r < pass.alphas.size(); ++r) {
    map.scores.push_back(pass.scores[r].value().data);
    map.alpha.push_back(pass.alphas[r].value().data);
    map.meta_states.push_back(pass.metas[r].value().data);
  }
  return map;
}

}  // namespace metabug::nn
