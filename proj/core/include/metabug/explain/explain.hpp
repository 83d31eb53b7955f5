#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "metabug/collectors/collectors.hpp"
#include "metabug/explain/path.hpp"
#include "metabug/explain/symbolic.hpp"
#include "metabug/nn/gnn.hpp"
#include "metabug/synthgen/generator.hpp"

namespace metabug::explain {

struct ExplainOptions {
  std::size_t top_n = 10;
  std::size_t key_steps = 3;
  /// Seeds the choice between arms that hold no top-attended statement.
  std::uint64_t seed = 1;
  /// Subpaths tried per replaced branch.
  std::size_t max_subpaths = 256;
  /// Unrolling combinations tried per feasibility check.
  std::size_t max_unroll_combos = 27;
};

/// Sum of α over each statement's nodes.
StatementScores statement_scores(const nn::GraphInput& g, const std::vector<double>& alpha);

/// Scores from the final attention round of a slice's graph.
StatementScores statement_scores(const nn::GraphInput& g, const nn::AttentionMap& attention);

/// The slice's integral statements.
std::set<NodeId> integral_statements(const collectors::TestSlice& slice);

/// The n best-scored statements of the slice (score descending, then id),
/// followed by the integral statements not among them.
std::vector<NodeId> top_n_attended(const collectors::TestSlice& slice,
                                   const StatementScores& scores, std::size_t n = 10);

/// Decides a path candidate; on success the candidate's loop counts are set to
/// the first of 1..kMaxUnroll iterations per entered loop (fewest in total
/// first) that is feasible.
Feasibility is_path_feasible(const SliceContext& ctx, PathCandidate& path,
                             const ExplainOptions& options = {});

struct TraceLine {
  int n = 0;
  NodeId stmt = kNoNode;
  minilang::SourceLoc loc;
  std::string text;
  bool underlined = false;
  bool boxed = false;
};

struct TraceReport {
  std::string slice_id;
  int rank = 0;
  double distance = 0;
  bool feasible = false;
  std::vector<TraceLine> trace;
  NodeId bug_point = kNoNode;
  std::string constraint;
  std::vector<NodeId> key_steps;
  std::vector<std::string> notes;
  /// Attention of the top-attended statements on the reported path, and on
  /// the highest-scored path the search started from.
  double score = 0;
  double best_score = 0;

  std::vector<NodeId> statements() const;
};

/// Numbers the path in execution order, boxes the last statement and
/// underlines its `key_steps` best-scored statements.
TraceReport decorate_trace(const PathCandidate& path, const collectors::TestSlice& slice,
                           const StatementScores& scores, std::size_t key_steps = 3);

/// The path through the top-attended statements, made feasible by replacing
/// one branch at a time. Without one the highest-scored path is reported
/// with `feasible` false.
TraceReport find_feasible_path(const collectors::TestSlice& slice, const StatementScores& scores,
                               const ExplainOptions& options = {});

/// Index-monotone subsequence: every element of `sub` occurs in `seq` in order.
bool is_subsequence(const std::vector<NodeId>& sub, const std::vector<NodeId>& seq);

/// T̄ ⪯ T' ⪯ T against the minimal and full ground-truth traces.
bool evaluate_trace(const std::vector<NodeId>& trace, const synthgen::GroundTruth& truth);

/// `{slice_id, rank, distance, feasible, trace:[{n, loc, text, underlined}], bug_point, constraint}`.
std::string report_to_json(const TraceReport& report);
TraceReport report_from_json(const std::string& text);
/// Numbered lines; key steps carry `*`, the bug point sits in `[ ]`.
std::string report_to_text(const TraceReport& report);

}  // namespace metabug::explain
