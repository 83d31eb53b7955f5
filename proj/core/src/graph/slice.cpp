#include "metabug/graph/slice.hpp"

#include <deque>
#include <map>
#include <stdexcept>

namespace metabug::graph {

using minilang::Expr;
using minilang::ExprKind;
using minilang::Procedure;
using minilang::Program;
using minilang::Stmt;
using minilang::StmtKind;

namespace {

bool is_dependence(EdgeKind k) {
  return k == EdgeKind::ControlDep || k == EdgeKind::DataDep || k == EdgeKind::Call ||
         k == EdgeKind::ParamIn || k == EdgeKind::ParamOut;
}

}  // namespace

SliceSet backward_reach(const InterproceduralPDG& g, const SliceCriterion& c) {
  const PdgNode* root = g.find(c.stmt);
  if (!root || !root->stmt_root || root->stmt != c.stmt)
    throw std::invalid_argument("slice criterion " + std::to_string(c.stmt) +
                                " is not a statement");
  std::map<NodeId, std::vector<std::pair<NodeId, const PdgEdge*>>> incoming;  // dst unit -> src unit
  for (const auto& e : g.edges) {
    if (!is_dependence(e.kind)) continue;
    incoming[g.find(e.dst)->unit].emplace_back(g.find(e.src)->unit, &e);
  }
  std::set<NodeId> seen;
  std::deque<NodeId> work;
  auto push = [&](NodeId u) {
    if (seen.insert(u).second) work.push_back(u);
  };
  // Criterion units: the statement root and, for calls, its actual vertices.
  for (const auto& n : g.nodes) {
    if (!n.stmt_root || n.stmt != c.stmt) continue;
    seen.insert(n.id);
    for (const auto& [src, e] : incoming[n.id]) {
      if (!c.variables.empty() && e->kind == EdgeKind::DataDep &&
          !c.variables.count(g.find(e->dst)->var))
        continue;
      push(src);
    }
  }
  while (!work.empty()) {
    NodeId u = work.front();
    work.pop_front();
    for (const auto& [src, e] : incoming[u]) push(src);
  }
  SliceSet out;
  for (NodeId u : seen) {
    const PdgNode* n = g.find(u);
    if (n->stmt != kNoNode) out.statements.insert(n->stmt);
    if (!n->proc.empty()) out.procedures.insert(n->proc);
  }
  return out;
}

namespace {

void collect_vars(const Stmt& s, std::set<std::string>& out) {
  minilang::for_each_own_expr(s, [&](const Expr& e) {
    if (e.kind == ExprKind::Var) out.insert(e.text);
  });
}

// Maps every statement id to its parent statement id (kNoNode at top level).
void record_parents(const std::vector<Stmt>& block, NodeId parent, std::map<NodeId, NodeId>& out) {
  for (const auto& s : block) {
    out[s.id] = parent;
    record_parents(s.then_body, s.id, out);
    record_parents(s.else_body, s.id, out);
  }
}

std::vector<Stmt> filter_block(const std::vector<Stmt>& block, const std::set<NodeId>& keep) {
  std::vector<Stmt> out;
  for (const auto& s : block) {
    if (!keep.count(s.id)) continue;
    Stmt c = s;
    c.then_body = filter_block(s.then_body, keep);
    c.else_body = filter_block(s.else_body, keep);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

Program restrict_program(const Program& program, const SliceSet& keep_in) {
  std::set<NodeId> keep = keep_in.statements;
  std::set<std::string> procs = keep_in.procedures;
  procs.insert(program.entry);

  std::map<NodeId, NodeId> parent;
  std::map<NodeId, std::string> owner;
  record_parents(program.globals, kNoNode, parent);
  for (const auto& proc : program.procedures) {
    record_parents(proc.body, kNoNode, parent);
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) { owner[s.id] = proc.name; });
  }
  std::map<std::string, NodeId> global_decl;
  for (const auto& g : program.globals) global_decl.emplace(g.name, g.id);

  bool changed = true;
  while (changed) {
    changed = false;
    auto add = [&](NodeId id) {
      for (NodeId x = id; x != kNoNode; x = parent.at(x))
        if (keep.insert(x).second) changed = true;
    };
    for (NodeId id : std::set<NodeId>(keep)) add(id);
    for (const auto& proc : program.procedures) {
      std::set<std::string> params;
      for (const auto& p : proc.params) params.insert(p.name);
      std::map<std::string, NodeId> first_decl;
      std::set<std::string> declared, used;
      minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
        if (s.kind == StmtKind::VarDecl) {
          first_decl.emplace(s.name, s.id);
          if (keep.count(s.id)) declared.insert(s.name);
        }
        if (!keep.count(s.id)) return;
        collect_vars(s, used);
        if ((s.kind == StmtKind::Call && !s.value) || s.kind == StmtKind::Spawn) {
          if (procs.insert(s.name).second) changed = true;
        }
      });
      for (const auto& v : used) {
        if (params.count(v) || declared.count(v)) continue;
        if (auto it = first_decl.find(v); it != first_decl.end()) {
          add(it->second);
        } else if (auto g = global_decl.find(v); g != global_decl.end()) {
          add(g->second);
        }
      }
    }
    for (const auto& g : program.globals) {
      if (!keep.count(g.id)) continue;
      std::set<std::string> used;
      collect_vars(g, used);
      for (const auto& v : used)
        if (auto it = global_decl.find(v); it != global_decl.end()) add(it->second);
    }
  }

  Program out;
  out.entry = program.entry;
  out.next_id = program.next_id;
  out.globals = filter_block(program.globals, keep);
  for (const auto& proc : program.procedures) {
    if (!procs.count(proc.name)) continue;
    Procedure p = proc;
    p.body = filter_block(proc.body, keep);
    out.procedures.push_back(std::move(p));
  }
  return out;
}

Slice backward_slice(const Program& program, const InterproceduralPDG& g, const SliceCriterion& c) {
  Slice s;
  s.program = restrict_program(program, backward_reach(g, c));
  s.bug_point = c.stmt;
  return s;
}

Slice backward_slice(const Program& program, const SliceCriterion& c) {
  return backward_slice(program, build_ipdg(program), c);
}

std::set<NodeId> statement_ids(const Program& program) {
  std::set<NodeId> out;
  minilang::for_each_stmt(program, [&](const Stmt& s) { out.insert(s.id); });
  return out;
}

}  // namespace metabug::graph
