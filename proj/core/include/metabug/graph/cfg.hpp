#pragma once

#include <unordered_map>
#include <vector>

#include "metabug/minilang/ast.hpp"

namespace metabug::graph {

using minilang::NodeId;

/// Statement-level control-flow graph of one procedure. Index 0 is the entry,
/// index 1 the exit; every other index is one statement.
struct Cfg {
  static constexpr int kEntry = 0;
  static constexpr int kExit = 1;

  std::vector<const minilang::Stmt*> stmt;  // nullptr for entry/exit
  std::vector<std::vector<int>> succ;
  std::vector<std::vector<int>> pred;
  std::unordered_map<NodeId, int> index_of;

  int size() const { return static_cast<int>(stmt.size()); }
};

/// True when the statement's own expressions call a may_fail builtin.
bool may_fail(const minilang::Stmt& s);

/// Builds the CFG. may_fail statements get an extra edge to the exit, and the
/// entry has an edge to the exit so top-level statements depend on the entry.
Cfg build_cfg(const minilang::Procedure& proc);

/// Immediate post-dominator of every node; the exit maps to -1.
std::vector<int> immediate_postdominators(const Cfg& cfg);

/// (controller, dependent) pairs from post-dominance frontiers, self-loops included.
std::vector<std::pair<int, int>> control_dependences(const Cfg& cfg);

}  // namespace metabug::graph
