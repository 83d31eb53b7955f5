#pragma once

#include <string>
#include <vector>

#include "metabug/explain/path.hpp"
#include "metabug/explain/solver.hpp"

namespace metabug::explain {

struct Feasibility {
  bool feasible = false;
  /// Path condition conjoined with the bug condition at the boxed statement.
  Dnf constraint;
  /// The non-trivial conjuncts, one per constraining step, joined by `&&`.
  std::string rendered;
  /// Terms the decision procedure could not express; they stay unconstrained.
  std::vector<std::string> notes;
};

/// Under-constrained symbolic execution of a path. Inputs, parameters of the
/// first procedure and values produced by unmodelled operations are free.
/// Integers are linear expressions, references carry null predicates and
/// lengths, and every dereference or index on the way must succeed. At the
/// boxed statement the bug condition of the slice's kind is added: a null
/// dereference for NPD and RACE, an out-of-bounds index for AIO, none for NFE
/// and LEAK. Paths that never reach a bug point are infeasible.
Feasibility check_path(const SliceContext& ctx, const PathCandidate& path);

}  // namespace metabug::explain
