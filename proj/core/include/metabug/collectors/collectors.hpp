#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metabug/collectors/bug_kind.hpp"
#include "metabug/graph/pdg.hpp"
#include "metabug/minilang/ast.hpp"

namespace metabug::collectors {

using minilang::NodeId;

/// A bug-kind-specific slice of a program; ids are those of the original program.
struct TestSlice {
  minilang::Program program;
  BugKind bug_kind = BugKind::NPD;
  /// The dereference, array operation, parse call, `open`, or racing write.
  NodeId bug_point = minilang::kNoNode;
  /// Statements every explanation must keep.
  std::set<NodeId> integral;
};

struct SharedVarFinding {
  std::string variable;
  /// Def-use chain inside the writing procedure, in program order, ending at the write.
  std::vector<NodeId> update_sequence;
  NodeId write_point = minilang::kNoNode;
  std::set<std::string> reading_procs;
};

/// One slice per (variable, null assignment, dereference) where the assignment
/// reaches the dereference in the CFG; globals initialized to null reach every
/// dereference of them.
std::vector<TestSlice> collect_npd(const minilang::Program& program);
/// One slice per statement with an array read or write.
std::vector<TestSlice> collect_aio(const minilang::Program& program);
/// One slice per statement calling parseInt.
std::vector<TestSlice> collect_nfe(const minilang::Program& program);
/// One slice per `open` whose handle can reach the procedure exit, early exits
/// included, without passing a `close` of it.
std::vector<TestSlice> collect_leak(const minilang::Program& program);
/// One slice per write to a shared variable that a concurrent procedure reads.
std::vector<TestSlice> collect_race(const minilang::Program& program);

std::vector<TestSlice> collect(const minilang::Program& program, BugKind kind);

/// Shared variables written in one thread context and read in another.
std::vector<SharedVarFinding> find_shared_variables(const minilang::Program& program);

/// The slice the collector of `kind` produces for bug point `point`, if any.
std::optional<TestSlice> slice_at(const minilang::Program& program, BugKind kind, NodeId point);

/// `[{bug_kind, bug_point, integral, source}]` in the given order.
std::string manifest_json(const std::vector<TestSlice>& slices);

}  // namespace metabug::collectors
