#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metabug/collectors/collectors.hpp"
#include "metabug/minilang/ast.hpp"

namespace metabug::explain {

using minilang::kNoNode;
using minilang::NodeId;

/// Attention mass per statement.
using StatementScores = std::map<NodeId, double>;

/// If: 0 takes the then arm, 1 the else arm (or skips a lone if).
/// While: 0 enters the loop, 1 skips it.
using Decisions = std::map<NodeId, int>;

/// Loop iterations for entered loops; absent loops run once.
using Unrolling = std::map<NodeId, int>;

inline constexpr int kMaxUnroll = 3;

/// One executed statement. `branch` is the outcome of an if or while header.
struct PathStep {
  NodeId stmt = kNoNode;
  std::optional<bool> branch;
  /// Activation the statement runs in.
  int frame = 0;
  /// For an inlined call, the activation of the callee.
  int callee_frame = -1;
  friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct PathCandidate {
  Decisions decisions;
  Unrolling unroll;
  /// Executed statements, cut after the bug point, which is the last step.
  std::vector<PathStep> steps;
  /// False when the decisions never reach a bug point.
  bool reaches_bug = false;
  double score = 0;
  /// Procedure of every activation.
  std::map<int, std::string> frames;

  std::vector<NodeId> statements() const;
  NodeId boxed() const { return reaches_bug ? steps.back().stmt : kNoNode; }
};

/// Structural facts about a slice that path construction needs: where paths
/// start, which statements they must cover and where the bug point sits.
class SliceContext {
 public:
  explicit SliceContext(const collectors::TestSlice& slice);

  const collectors::TestSlice& slice() const { return *slice_; }
  const minilang::Program& program() const { return slice_->program; }
  BugKind kind() const { return slice_->bug_kind; }

  const minilang::Stmt* stmt(NodeId id) const;
  /// Owning procedure; nullptr for globals.
  const minilang::Procedure* procedure_of(NodeId id) const;
  /// True when `id` is inside `block`, directly or through called procedures.
  bool covers(const std::vector<minilang::Stmt>& block, NodeId id) const;
  bool covers_any(const std::vector<minilang::Stmt>& block, const std::set<NodeId>& ids) const;

  /// Statements every path has to execute.
  const std::set<NodeId>& required() const { return required_; }
  /// `close` calls of the leaked handle.
  const std::set<NodeId>& closes() const { return closes_; }
  /// The racing read (the statement boxed for RACE slices).
  NodeId race_access() const { return access_; }
  /// Procedures walked in order; for RACE the first runs up to the access.
  const std::vector<std::string>& roots() const { return roots_; }
  bool reader_first() const { return reader_first_; }
  /// Procedure containing the race access.
  const std::string& reader() const { return reader_; }

 private:
  const collectors::TestSlice* slice_;
  std::map<NodeId, const minilang::Stmt*> stmts_;
  std::map<NodeId, const minilang::Procedure*> owner_;
  std::set<NodeId> required_;
  std::set<NodeId> closes_;
  NodeId access_ = kNoNode;
  std::vector<std::string> roots_;
  std::string reader_;
  bool reader_first_ = true;
  mutable std::map<std::string, std::set<NodeId>> reach_cache_;

  const std::set<NodeId>& reachable_from(const minilang::Procedure& proc) const;
};

/// Builds the path a set of decisions selects: global declarations, then each
/// root procedure with user calls inlined, cut at the bug point.
PathCandidate build_path(const SliceContext& ctx, const Decisions& decisions,
                         const Unrolling& unroll = {});

/// If/while statements reachable from the roots, in pre-order.
std::vector<NodeId> decision_points(const SliceContext& ctx);

/// Decision statements executed on a path, in first-execution order.
std::vector<NodeId> decisions_on(const SliceContext& ctx, const PathCandidate& path);

/// Loops entered on a path, in first-execution order.
std::vector<NodeId> loops_on(const SliceContext& ctx, const PathCandidate& path);

}  // namespace metabug::explain
