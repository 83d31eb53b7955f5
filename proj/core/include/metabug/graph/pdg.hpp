#pragma once

#include <compare>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "metabug/minilang/ast.hpp"

namespace metabug::graph {

using minilang::kNoNode;
using minilang::NodeId;

enum class NodeKind {
  AstInternal,
  AstLeaf,
  Entry,
  CallSite,
  ActualIn,
  ActualOut,
  FormalIn,
  FormalOut,
  Meta,
};

enum class EdgeKind {
  AstChild,
  ControlDep,
  DataDep,
  ExecOrder,
  Call,
  ParamIn,
  ParamOut,
  MetaLink,
};

inline constexpr int kEdgeKindCount = 8;

const char* to_string(NodeKind k);
const char* to_string(EdgeKind k);

struct PdgNode {
  NodeId id = kNoNode;
  NodeKind kind = NodeKind::AstLeaf;
  std::string token;
  bool stmt_root = false;
  /// Stmt-root node this node hangs under (itself for roots).
  NodeId unit = kNoNode;
  /// Source statement the node belongs to: the statement itself for AST nodes,
  /// the call statement for actual vertices, kNoNode for entries and formals.
  NodeId stmt = kNoNode;
  /// Owning procedure; empty for global declarations.
  std::string proc;
  /// Variable name for identifier leaves, empty otherwise.
  std::string var;
};

struct PdgEdge {
  NodeId src = kNoNode;
  NodeId dst = kNoNode;
  EdgeKind kind = EdgeKind::AstChild;
  friend auto operator<=>(const PdgEdge&, const PdgEdge&) = default;
};

class AlreadyAttached : public std::logic_error {
 public:
  AlreadyAttached() : std::logic_error("meta node already attached") {}
};

/// Nodes sorted by id, edges sorted by (src, dst, kind), no duplicate edges.
struct InterproceduralPDG {
  std::vector<PdgNode> nodes;
  std::vector<PdgEdge> edges;
  std::map<NodeId, minilang::SourceLoc> origin;

  const PdgNode* find(NodeId id) const;
  bool has_meta() const;
  std::size_t index_of(NodeId id) const;  // throws std::out_of_range
};

/// Whole-program graph: per-procedure PDGs refined down to AST nodes and linked
/// through call-site, actual/formal parameter vertices.
InterproceduralPDG build_ipdg(const minilang::Program& program);

/// The fragment of build_ipdg belonging to one procedure (nodes owned by it and
/// the edges between them).
InterproceduralPDG build_pdg(const minilang::Program& program, const std::string& procedure);

/// Adds one meta node linked to every native node. Throws AlreadyAttached.
InterproceduralPDG attach_meta_node(const InterproceduralPDG& g);
/// Removes the meta node and its links; a no-op without one.
InterproceduralPDG strip_meta_node(const InterproceduralPDG& g);

/// Returns a description of the first violated edge-kind constraint, or empty.
std::string check_edge_constraints(const InterproceduralPDG& g);

}  // namespace metabug::graph
