#pragma once

#include <string>

#include "metabug/graph/pdg.hpp"

namespace metabug::graph {

/// Deterministic JSON: {"nodes":[...], "edges":[...]} sorted by id.
std::string to_json(const InterproceduralPDG& g);

/// Graphviz rendering; AST edges are drawn dashed.
std::string to_dot(const InterproceduralPDG& g);

}  // namespace metabug::graph
