#pragma once

#include <set>
#include <string>

#include "metabug/graph/pdg.hpp"

namespace metabug::graph {

struct SliceCriterion {
  NodeId stmt = kNoNode;
  /// Restricts the first dependence step to these variables; empty means all.
  std::set<std::string> variables;
};

struct Slice {
  minilang::Program program;  // original node ids are kept
  NodeId bug_point = kNoNode;
};

/// Statement ids reached backwards from the criterion over control, data, call
/// and parameter edges, together with the procedures whose entries were reached.
struct SliceSet {
  std::set<NodeId> statements;
  std::set<std::string> procedures;
};

SliceSet backward_reach(const InterproceduralPDG& g, const SliceCriterion& c);

/// Keeps the given statements plus what is needed for a well-formed program:
/// enclosing statements, `main`, called procedures and variable declarations.
minilang::Program restrict_program(const minilang::Program& program, const SliceSet& keep);

/// Throws std::invalid_argument when the criterion is not a statement of the graph.
Slice backward_slice(const minilang::Program& program, const InterproceduralPDG& g,
                     const SliceCriterion& c);
Slice backward_slice(const minilang::Program& program, const SliceCriterion& c);

/// Ids of every statement (globals included) in a program.
std::set<NodeId> statement_ids(const minilang::Program& program);

}  // namespace metabug::graph
