#include "metabug/graph/export.hpp"

#include <sstream>

#include "json.hpp"

namespace metabug::graph {

std::string to_json(const InterproceduralPDG& g) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes) {
    nlohmann::ordered_json j;
    j["id"] = n.id;
    j["kind"] = to_string(n.kind);
    j["token"] = n.token;
    j["stmt_root"] = n.stmt_root;
    if (auto it = g.origin.find(n.id); it != g.origin.end())
      j["loc"] = {it->second.line, it->second.column};
    nodes.push_back(std::move(j));
  }
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const auto& e : g.edges)
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", to_string(e.kind)}});
  nlohmann::ordered_json root;
  root["nodes"] = std::move(nodes);
  root["edges"] = std::move(edges);
  return root.dump(2);
}

std::string to_dot(const InterproceduralPDG& g) {
  std::ostringstream os;
  os << "digraph pdg {\n  node [shape=box, fontname=\"monospace\"];\n";
  for (const auto& n : g.nodes) {
    os << "  n" << n.id << " [label=\"" << n.id << ": " << n.token << "\"";
    if (!n.stmt_root) os << ", shape=ellipse";
    os << "];\n";
  }
  for (const auto& e : g.edges) {
    os << "  n" << e.src << " -> n" << e.dst << " [label=\"" << to_string(e.kind) << "\"";
    if (e.kind == EdgeKind::AstChild || e.kind == EdgeKind::MetaLink) os << ", style=dashed";
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace metabug::graph
