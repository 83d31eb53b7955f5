#include "metabug/graph/pdg.hpp"

#include <algorithm>
#include <set>

#include "metabug/graph/cfg.hpp"
#include "metabug/graph/vocab.hpp"

namespace metabug::graph {

using minilang::Expr;
using minilang::ExprKind;
using minilang::Procedure;
using minilang::Program;
using minilang::Stmt;
using minilang::StmtKind;

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::AstInternal: return "ast-internal";
    case NodeKind::AstLeaf: return "ast-leaf";
    case NodeKind::Entry: return "entry";
    case NodeKind::CallSite: return "call-site";
    case NodeKind::ActualIn: return "actual-in";
    case NodeKind::ActualOut: return "actual-out";
    case NodeKind::FormalIn: return "formal-in";
    case NodeKind::FormalOut: return "formal-out";
    case NodeKind::Meta: return "meta";
  }
  return "?";
}

const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::AstChild: return "ast-child";
    case EdgeKind::ControlDep: return "control-dep";
    case EdgeKind::DataDep: return "data-dep";
    case EdgeKind::ExecOrder: return "exec-order";
    case EdgeKind::Call: return "call";
    case EdgeKind::ParamIn: return "param-in";
    case EdgeKind::ParamOut: return "param-out";
    case EdgeKind::MetaLink: return "meta-link";
  }
  return "?";
}

const PdgNode* InterproceduralPDG::find(NodeId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const PdgNode& n, NodeId v) { return n.id < v; });
  return it != nodes.end() && it->id == id ? &*it : nullptr;
}

std::size_t InterproceduralPDG::index_of(NodeId id) const {
  const PdgNode* n = find(id);
  if (!n) throw std::out_of_range("no PDG node " + std::to_string(id));
  return static_cast<std::size_t>(n - nodes.data());
}

bool InterproceduralPDG::has_meta() const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [](const PdgNode& n) { return n.kind == NodeKind::Meta; });
}

namespace {

struct LeafRef {
  NodeId leaf;
  std::string var;
  bool strong = true;
};

struct NodeFacts {
  std::vector<LeafRef> defs;
  std::vector<LeafRef> uses;
};

std::string stmt_token(const Stmt& s, bool global) {
  if (global) return "global";
  switch (s.kind) {
    case StmtKind::VarDecl: return "var";
    case StmtKind::Assign: return "assign";
    case StmtKind::If: return "if";
    case StmtKind::While: return "while";
    case StmtKind::Call: return "call";
    case StmtKind::Return: return "return";
    case StmtKind::Spawn: return "spawn";
  }
  return "unk";
}

class IpdgBuilder {
 public:
  explicit IpdgBuilder(const Program& p) : prog_(p), next_(p.next_id) {}

  InterproceduralPDG build() {
    for (const auto& g : prog_.globals) globals_.insert(g.name);
    minilang::for_each_stmt(prog_, [&](const Stmt& s) {
      if (is_user_call(s)) callee_of_[s.id] = s.name;
    });
    assign_buckets();
    create_proc_vertices();
    for (const auto& g : prog_.globals) add_stmt(g, "", true);
    for (const auto& proc : prog_.procedures)
      for (const auto& s : proc.body) add_stmt_tree(s, proc.name);
    assign_positions();
    for (const auto& proc : prog_.procedures) intraprocedural(proc);
    global_dataflow();
    interprocedural();
    exec_order();
    return finish();
  }

 private:
  struct ProcVertices {
    NodeId entry = kNoNode;
    std::vector<NodeId> fin, fin_leaf, fout, fout_leaf;  // fout entries are kNoNode for by-value
  };
  struct CallVertices {
    std::vector<NodeId> ain, aout, aout_leaf;  // aout entries are kNoNode for by-value
  };

  const Program& prog_;
  NodeId next_;
  std::vector<PdgNode> nodes_;
  std::vector<PdgEdge> edges_;
  std::map<NodeId, minilang::SourceLoc> origin_;
  std::map<std::string, int> bucket_;
  std::set<std::string> globals_;
  std::map<std::string, ProcVertices> procs_;
  std::map<NodeId, CallVertices> calls_;
  std::map<NodeId, int> position_;
  std::vector<std::pair<NodeId, NodeId>> control_;  // controller -> dependent
  std::vector<LeafRef> global_defs_, global_uses_;
  std::map<NodeId, std::string> callee_of_;

  NodeId fresh() { return next_++; }

  void note_name(const std::string& name) {
    if (!bucket_.count(name)) bucket_.emplace(name, static_cast<int>(bucket_.size()));
  }

  std::string name_token(const std::string& name) const {
    int b = bucket_.at(name);
    return b < kIdentifierBuckets ? "id" + std::to_string(b) : "unk";
  }

  void assign_buckets() {
    auto visit_expr = [&](const Expr& e) {
      if (e.kind == ExprKind::Var) note_name(e.text);
    };
    for (const auto& g : prog_.globals) minilang::for_each_own_expr(g, visit_expr);
    for (const auto& proc : prog_.procedures) {
      for (const auto& p : proc.params) note_name(p.name);
      minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
        minilang::for_each_own_expr(s, visit_expr);
      });
    }
  }

  void add_node(NodeId id, NodeKind kind, std::string token, bool root, NodeId unit, NodeId stmt,
                const std::string& proc, minilang::SourceLoc loc, std::string var = {}) {
    PdgNode n;
    n.id = id;
    n.kind = kind;
    n.token = std::move(token);
    n.stmt_root = root;
    n.unit = unit;
    n.stmt = stmt;
    n.proc = proc;
    n.var = std::move(var);
    nodes_.push_back(std::move(n));
    origin_[id] = loc;
  }

  void edge(NodeId a, NodeId b, EdgeKind k) { edges_.push_back({a, b, k}); }

  void create_proc_vertices() {
    for (const auto& proc : prog_.procedures) {
      ProcVertices v;
      v.entry = proc.id;
      add_node(proc.id, NodeKind::Entry, "entry", true, proc.id, kNoNode, proc.name, proc.loc);
      for (const auto& p : proc.params) {
        NodeId fin = fresh();
        add_node(fin, NodeKind::FormalIn, "formal-in", true, fin, kNoNode, proc.name, p.loc);
        add_node(p.id, NodeKind::AstLeaf, name_token(p.name), false, fin, kNoNode, proc.name, p.loc,
                 p.name);
        edge(fin, p.id, EdgeKind::AstChild);
        v.fin.push_back(fin);
        v.fin_leaf.push_back(p.id);
      }
      for (const auto& p : proc.params) {
        if (!p.by_ref) {
          v.fout.push_back(kNoNode);
          v.fout_leaf.push_back(kNoNode);
          continue;
        }
        NodeId fout = fresh();
        NodeId leaf = fresh();
        add_node(fout, NodeKind::FormalOut, "formal-out", true, fout, kNoNode, proc.name, p.loc);
        add_node(leaf, NodeKind::AstLeaf, name_token(p.name), false, fout, kNoNode, proc.name, p.loc,
                 p.name);
        edge(fout, leaf, EdgeKind::AstChild);
        v.fout.push_back(fout);
        v.fout_leaf.push_back(leaf);
      }
      procs_.emplace(proc.name, std::move(v));
    }
  }

  std::string expr_token(const Expr& e) const {
    switch (e.kind) {
      case ExprKind::IntLit: return literal_token(e.int_value);
      case ExprKind::StrLit: return e.text.empty() ? "str_empty" : "str";
      case ExprKind::Null: return "null";
      case ExprKind::Var: return name_token(e.text);
      case ExprKind::Index: return "index";
      case ExprKind::Binary: return e.text;
      case ExprKind::Unary: return e.text == "-" ? "neg" : "not";
      case ExprKind::Builtin: return e.text;
      case ExprKind::NewArray: return "new";
    }
    return "unk";
  }

  void add_expr(const Expr& e, NodeId parent, NodeId unit, NodeId stmt, const std::string& proc) {
    NodeKind kind = e.args.empty() ? NodeKind::AstLeaf : NodeKind::AstInternal;
    add_node(e.id, kind, expr_token(e), false, unit, stmt, proc, e.loc,
             e.kind == ExprKind::Var ? e.text : std::string());
    edge(parent, e.id, EdgeKind::AstChild);
    for (const auto& a : e.args) add_expr(a, e.id, unit, stmt, proc);
  }

  static bool is_user_call(const Stmt& s) {
    return (s.kind == StmtKind::Call && !s.value) || s.kind == StmtKind::Spawn;
  }

  void add_stmt(const Stmt& s, const std::string& proc, bool global) {
    bool user_call = is_user_call(s);
    add_node(s.id, user_call ? NodeKind::CallSite : NodeKind::AstInternal, stmt_token(s, global),
             true, s.id, s.id, proc, s.loc);
    if (s.target) add_expr(*s.target, s.id, s.id, s.id, proc);
    if (s.value) add_expr(*s.value, s.id, s.id, s.id, proc);
    if (!user_call) {
      for (const auto& a : s.args) add_expr(a, s.id, s.id, s.id, proc);
      return;
    }
    const Procedure* callee = prog_.find_procedure(s.name);
    CallVertices cv;
    for (const auto& a : s.args) {
      NodeId ain = fresh();
      add_node(ain, NodeKind::ActualIn, "actual-in", true, ain, s.id, proc, a.loc);
      add_expr(a, ain, ain, s.id, proc);
      control_.emplace_back(s.id, ain);
      cv.ain.push_back(ain);
    }
    for (std::size_t i = 0; i < s.args.size(); ++i) {
      if (!callee->params[i].by_ref) {
        cv.aout.push_back(kNoNode);
        cv.aout_leaf.push_back(kNoNode);
        continue;
      }
      const Expr& a = s.args[i];
      NodeId aout = fresh();
      NodeId leaf = fresh();
      add_node(aout, NodeKind::ActualOut, "actual-out", true, aout, s.id, proc, a.loc);
      add_node(leaf, NodeKind::AstLeaf, name_token(a.text), false, aout, s.id, proc, a.loc, a.text);
      edge(aout, leaf, EdgeKind::AstChild);
      control_.emplace_back(s.id, aout);
      cv.aout.push_back(aout);
      cv.aout_leaf.push_back(leaf);
    }
    calls_.emplace(s.id, std::move(cv));
  }

  void add_stmt_tree(const Stmt& s, const std::string& proc) {
    add_stmt(s, proc, false);
    for (const auto& c : s.then_body) add_stmt_tree(c, proc);
    for (const auto& c : s.else_body) add_stmt_tree(c, proc);
  }

  void assign_positions() {
    int pos = 0;
    for (const auto& g : prog_.globals) position_[g.id] = pos++;
    for (const auto& proc : prog_.procedures) {
      const auto& v = procs_.at(proc.name);
      position_[v.entry] = pos++;
      for (NodeId f : v.fin) position_[f] = pos++;
      minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
        position_[s.id] = pos++;
        auto it = calls_.find(s.id);
        if (it == calls_.end()) return;
        for (NodeId a : it->second.ain) position_[a] = pos++;
        for (NodeId a : it->second.aout)
          if (a != kNoNode) position_[a] = pos++;
      });
      for (NodeId f : v.fout)
        if (f != kNoNode) position_[f] = pos++;
    }
  }

  // Collects variable leaves of `e` as uses.
  void uses_of(const Expr& e, std::vector<LeafRef>& out) {
    minilang::for_each_expr(e, [&](const Expr& x) {
      if (x.kind == ExprKind::Var) out.push_back({x.id, x.text, true});
    });
  }

  NodeFacts facts_of(const Stmt& s) {
    NodeFacts f;
    if (s.target) {
      const Expr& t = *s.target;
      if (t.kind == ExprKind::Var) {
        f.defs.push_back({t.id, t.text, true});
      } else {
        const Expr& base = t.args[0];
        f.defs.push_back({base.id, base.text, false});
        f.uses.push_back({base.id, base.text, true});
        uses_of(t.args[1], f.uses);
      }
    }
    if (s.value) uses_of(*s.value, f.uses);
    for (const auto& a : s.args) uses_of(a, f.uses);
    auto it = calls_.find(s.id);
    if (it != calls_.end()) {
      for (std::size_t i = 0; i < s.args.size(); ++i)
        if (it->second.aout_leaf[i] != kNoNode)
          f.defs.push_back({it->second.aout_leaf[i], s.args[i].text, true});
    }
    return f;
  }

  void intraprocedural(const Procedure& proc) {
    Cfg cfg = build_cfg(proc);
    const auto& pv = procs_.at(proc.name);
    auto id_of = [&](int idx) { return idx == Cfg::kEntry ? pv.entry : cfg.stmt[idx]->id; };

    for (auto [a, b] : control_dependences(cfg)) {
      if (b == Cfg::kExit || b == Cfg::kEntry || a == b) continue;
      control_.emplace_back(id_of(a), id_of(b));
    }
    for (NodeId f : pv.fin) control_.emplace_back(pv.entry, f);
    for (NodeId f : pv.fout)
      if (f != kNoNode) control_.emplace_back(pv.entry, f);
    if (proc.name == prog_.entry)
      for (const auto& g : prog_.globals) control_.emplace_back(pv.entry, g.id);

    std::set<std::string> locals;
    for (const auto& p : proc.params) locals.insert(p.name);
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
      if (s.kind == StmtKind::VarDecl) locals.insert(s.name);
    });
    auto is_global = [&](const std::string& v) { return !locals.count(v) && globals_.count(v); };

    // Per-CFG-node facts; globals are routed to the flow-insensitive lists.
    const int n = cfg.size();
    std::vector<NodeFacts> facts(n);
    for (std::size_t i = 0; i < proc.params.size(); ++i)
      facts[Cfg::kEntry].defs.push_back({pv.fin_leaf[i], proc.params[i].name, true});
    for (std::size_t i = 0; i < proc.params.size(); ++i)
      if (pv.fout_leaf[i] != kNoNode)
        facts[Cfg::kExit].uses.push_back({pv.fout_leaf[i], proc.params[i].name, true});
    for (int i = 2; i < n; ++i) {
      NodeFacts raw = facts_of(*cfg.stmt[i]);
      for (auto& d : raw.defs) (is_global(d.var) ? global_defs_ : facts[i].defs).push_back(d);
      for (auto& u : raw.uses) (is_global(u.var) ? global_uses_ : facts[i].uses).push_back(u);
    }

    // Reaching definitions over the CFG, iterated to a fixed point.
    std::vector<LeafRef> all_defs;
    std::vector<std::vector<int>> gen(n);
    for (int i = 0; i < n; ++i)
      for (const auto& d : facts[i].defs) {
        gen[i].push_back(static_cast<int>(all_defs.size()));
        all_defs.push_back(d);
      }
    const std::size_t m = all_defs.size();
    std::vector<std::vector<bool>> in(n, std::vector<bool>(m)), out(n, std::vector<bool>(m));
    auto transfer = [&](int i) {
      std::vector<bool> o = in[i];
      for (int di : gen[i]) {
        if (!all_defs[di].strong) continue;
        for (std::size_t k = 0; k < m; ++k)
          if (all_defs[k].var == all_defs[di].var) o[k] = false;
      }
      for (int di : gen[i]) o[di] = true;
      return o;
    };
    bool changed = true;
    while (changed) {
      changed = false;
      for (int i = 0; i < n; ++i) {
        std::vector<bool> nin(m);
        for (int p : cfg.pred[i])
          for (std::size_t k = 0; k < m; ++k) nin[k] = nin[k] || out[p][k];
        in[i] = nin;
        auto nout = transfer(i);
        if (nout != out[i]) {
          out[i] = std::move(nout);
          changed = true;
        }
      }
    }
    for (int i = 0; i < n; ++i)
      for (const auto& u : facts[i].uses)
        for (std::size_t k = 0; k < m; ++k)
          if (in[i][k] && all_defs[k].var == u.var && all_defs[k].leaf != u.leaf)
            edge(all_defs[k].leaf, u.leaf, EdgeKind::DataDep);
  }

  void global_dataflow() {
    for (const auto& g : prog_.globals) {
      global_defs_.push_back({g.target->id, g.name, true});
      if (g.value) uses_of(*g.value, global_uses_);
    }
    for (const auto& d : global_defs_)
      for (const auto& u : global_uses_)
        if (d.var == u.var && d.leaf != u.leaf) edge(d.leaf, u.leaf, EdgeKind::DataDep);
  }

  void interprocedural() {
    for (const auto& [site, cv] : calls_) {
      const std::string& callee = callee_of_.at(site);
      const auto& pv = procs_.at(callee);
      edge(site, pv.entry, EdgeKind::Call);
      for (std::size_t i = 0; i < cv.ain.size(); ++i) {
        edge(cv.ain[i], pv.fin[i], EdgeKind::ParamIn);
        if (cv.aout[i] != kNoNode) edge(pv.fout[i], cv.aout[i], EdgeKind::ParamOut);
      }
    }
  }

  void exec_order() {
    std::map<NodeId, std::vector<NodeId>> children;
    for (auto [a, b] : control_) {
      edge(a, b, EdgeKind::ControlDep);
      children[a].push_back(b);
    }
    for (auto& [ctl, kids] : children) {
      std::sort(kids.begin(), kids.end(),
                [&](NodeId x, NodeId y) { return position_.at(x) < position_.at(y); });
      kids.erase(std::unique(kids.begin(), kids.end()), kids.end());
      for (std::size_t i = 0; i + 1 < kids.size(); ++i)
        edge(kids[i], kids[i + 1], EdgeKind::ExecOrder);
    }
  }

  InterproceduralPDG finish() {
    InterproceduralPDG g;
    std::sort(nodes_.begin(), nodes_.end(),
              [](const PdgNode& a, const PdgNode& b) { return a.id < b.id; });
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    g.nodes = std::move(nodes_);
    g.edges = std::move(edges_);
    g.origin = std::move(origin_);
    return g;
  }
};

}  // namespace

InterproceduralPDG build_ipdg(const Program& program) {
  return IpdgBuilder(program).build();
}

InterproceduralPDG build_pdg(const Program& program, const std::string& procedure) {
  InterproceduralPDG whole = build_ipdg(program);
  InterproceduralPDG g;
  std::set<NodeId> keep;
  for (const auto& n : whole.nodes)
    if (n.proc == procedure) {
      keep.insert(n.id);
      g.nodes.push_back(n);
      g.origin[n.id] = whole.origin.at(n.id);
    }
  for (const auto& e : whole.edges)
    if (keep.count(e.src) && keep.count(e.dst)) g.edges.push_back(e);
  return g;
}

InterproceduralPDG attach_meta_node(const InterproceduralPDG& g) {
  if (g.has_meta()) throw AlreadyAttached();
  InterproceduralPDG out = g;
  NodeId meta = g.nodes.empty() ? 0 : g.nodes.back().id + 1;
  PdgNode m;
  m.id = meta;
  m.kind = NodeKind::Meta;
  m.token = "meta";
  m.unit = meta;
  out.nodes.push_back(m);
  for (const auto& n : g.nodes) out.edges.push_back({meta, n.id, EdgeKind::MetaLink});
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

InterproceduralPDG strip_meta_node(const InterproceduralPDG& g) {
  InterproceduralPDG out;
  out.origin = g.origin;
  for (const auto& n : g.nodes)
    if (n.kind != NodeKind::Meta) out.nodes.push_back(n);
  for (const auto& e : g.edges)
    if (e.kind != EdgeKind::MetaLink) out.edges.push_back(e);
  return out;
}

std::string check_edge_constraints(const InterproceduralPDG& g) {
  auto describe = [](const PdgEdge& e) {
    return std::string(to_string(e.kind)) + " " + std::to_string(e.src) + "->" +
           std::to_string(e.dst);
  };
  for (const auto& e : g.edges) {
    const PdgNode* s = g.find(e.src);
    const PdgNode* d = g.find(e.dst);
    if (!s || !d) return "dangling edge " + describe(e);
    switch (e.kind) {
      case EdgeKind::ControlDep:
      case EdgeKind::ExecOrder:
        if (!s->stmt_root || !d->stmt_root) return "non-root endpoint on " + describe(e);
        break;
      case EdgeKind::DataDep:
        if (s->kind != NodeKind::AstLeaf || d->kind != NodeKind::AstLeaf)
          return "non-leaf endpoint on " + describe(e);
        break;
      case EdgeKind::Call:
        if (s->kind != NodeKind::CallSite || d->kind != NodeKind::Entry) return "bad " + describe(e);
        break;
      case EdgeKind::ParamIn:
        if (s->kind != NodeKind::ActualIn || d->kind != NodeKind::FormalIn)
          return "bad " + describe(e);
        break;
      case EdgeKind::ParamOut:
        if (s->kind != NodeKind::FormalOut || d->kind != NodeKind::ActualOut)
          return "bad " + describe(e);
        break;
      case EdgeKind::MetaLink:
        if (s->kind != NodeKind::Meta) return "bad " + describe(e);
        break;
      case EdgeKind::AstChild:
        break;
    }
  }
  return {};
}

}  // namespace metabug::graph
