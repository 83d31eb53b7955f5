#include "metabug/collectors/collectors.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <json.hpp>
#include <map>

#include "metabug/graph/cfg.hpp"
#include "metabug/graph/slice.hpp"
#include "metabug/minilang/parser.hpp"

namespace metabug::collectors {

using graph::Cfg;
using graph::EdgeKind;
using graph::InterproceduralPDG;
using minilang::Expr;
using minilang::ExprKind;
using minilang::kNoNode;
using minilang::Procedure;
using minilang::Program;
using minilang::Stmt;
using minilang::StmtKind;

namespace {

/// Shared state for the collectors of one program.
class Analysis {
 public:
  explicit Analysis(const Program& p) : program(p), pdg(graph::build_ipdg(p)) {
    for (const auto& e : pdg.edges) {
      if (e.kind != EdgeKind::DataDep) continue;
      const auto* src = pdg.find(e.src);
      const auto* dst = pdg.find(e.dst);
      if (src->stmt != kNoNode && dst->stmt != kNoNode)
        reaching_[{dst->stmt, dst->var}].insert(src->stmt);
    }
  }

  /// Statements whose definitions of `var` reach a use in `stmt`.
  std::set<NodeId> reaching_defs(NodeId stmt, const std::string& var) const {
    auto it = reaching_.find({stmt, var});
    return it == reaching_.end() ? std::set<NodeId>{} : it->second;
  }

  graph::SliceSet reach(std::initializer_list<NodeId> criteria) const { return reach(std::vector<NodeId>(criteria)); }

  graph::SliceSet reach(const std::vector<NodeId>& criteria) const {
    graph::SliceSet all;
    for (NodeId c : criteria) {
      graph::SliceSet s = graph::backward_reach(pdg, graph::SliceCriterion{c, {}});
      all.statements.insert(s.statements.begin(), s.statements.end());
      all.procedures.insert(s.procedures.begin(), s.procedures.end());
    }
    return all;
  }

  TestSlice make(BugKind kind, NodeId point, const std::vector<NodeId>& criteria,
                 std::set<NodeId> integral) const {
    TestSlice t;
    t.program = graph::restrict_program(program, reach(criteria));
    t.bug_kind = kind;
    t.bug_point = point;
    t.integral = std::move(integral);
    return t;
  }

  const Program& program;
  InterproceduralPDG pdg;

 private:
  std::map<std::pair<NodeId, std::string>, std::set<NodeId>> reaching_;
};

/// Statements of every procedure, with the owning procedure.
void for_each_proc_stmt(const Program& p, const std::function<void(const Procedure&, const Stmt&)>& f) {
  for (const auto& proc : p.procedures)
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) { f(proc, s); });
}

bool assigns_var(const Stmt& s, std::string* name) {
  if ((s.kind == StmtKind::VarDecl || s.kind == StmtKind::Assign) && s.target &&
      s.target->kind == ExprKind::Var) {
    if (name) *name = s.target->text;
    return true;
  }
  return false;
}

/// Variables dereferenced by a statement: length(x), x[...], close(x).
std::set<std::string> dereferenced(const Stmt& s) {
  std::set<std::string> out;
  minilang::for_each_own_expr(s, [&](const Expr& e) {
    if (e.kind == ExprKind::Index && e.args[0].kind == ExprKind::Var) out.insert(e.args[0].text);
    if (e.kind == ExprKind::Builtin && (e.text == "length" || e.text == "close") &&
        e.args[0].kind == ExprKind::Var)
      out.insert(e.args[0].text);
  });
  return out;
}

bool calls_builtin(const Stmt& s, const std::string& name, std::string* arg_var = nullptr) {
  bool found = false;
  minilang::for_each_own_expr(s, [&](const Expr& e) {
    if (found || e.kind != ExprKind::Builtin || e.text != name) return;
    found = true;
    if (arg_var && !e.args.empty() && e.args[0].kind == ExprKind::Var) *arg_var = e.args[0].text;
  });
  return found;
}

/// CFG nodes reachable from `from` in one or more steps.
std::set<int> reachable_from(const Cfg& cfg, int from) {
  std::set<int> seen;
  std::deque<int> work(cfg.succ[static_cast<std::size_t>(from)].begin(),
                       cfg.succ[static_cast<std::size_t>(from)].end());
  while (!work.empty()) {
    int n = work.front();
    work.pop_front();
    if (!seen.insert(n).second) continue;
    for (int m : cfg.succ[static_cast<std::size_t>(n)]) work.push_back(m);
  }
  return seen;
}

void sort_slices(std::vector<TestSlice>& v) {
  std::stable_sort(v.begin(), v.end(),
                   [](const TestSlice& a, const TestSlice& b) { return a.bug_point < b.bug_point; });
}

}  // namespace

std::vector<TestSlice> collect_npd(const Program& program) {
  Analysis a(program);
  std::vector<TestSlice> out;
  std::set<std::tuple<std::string, NodeId, NodeId>> seen;
  auto emit = [&](const std::string& var, NodeId l1, NodeId l2) {
    if (!seen.insert({var, l1, l2}).second) return;
    out.push_back(a.make(BugKind::NPD, l2, {l2, l1}, {l1, l2}));
  };
  std::map<std::string, NodeId> null_globals;
  for (const auto& g : program.globals)
    if (g.value && g.value->kind == ExprKind::Null) null_globals.emplace(g.name, g.id);
  for (const auto& proc : program.procedures) {
    Cfg cfg = graph::build_cfg(proc);
    std::set<std::string> locals;
    for (const auto& p : proc.params) locals.insert(p.name);
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
      if (s.kind == StmtKind::VarDecl) locals.insert(s.name);
    });
    for (int i = 2; i < cfg.size(); ++i) {
      const Stmt& s = *cfg.stmt[static_cast<std::size_t>(i)];
      std::string var;
      if (!assigns_var(s, &var) || !s.value || s.value->kind != ExprKind::Null) continue;
      for (int j : reachable_from(cfg, i)) {
        if (j < 2) continue;
        const Stmt& d = *cfg.stmt[static_cast<std::size_t>(j)];
        if (dereferenced(d).count(var)) emit(var, s.id, d.id);
      }
    }
    // Globals initialized to null reach every dereference that is not shadowed.
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
      for (const auto& v : dereferenced(s))
        if (!locals.count(v) && null_globals.count(v)) emit(v, null_globals.at(v), s.id);
    });
  }
  sort_slices(out);
  return out;
}

std::vector<TestSlice> collect_aio(const Program& program) {
  Analysis a(program);
  std::vector<TestSlice> out;
  for_each_proc_stmt(program, [&](const Procedure&, const Stmt& s) {
    std::set<std::string> arrays;
    bool has_index = false;
    minilang::for_each_own_expr(s, [&](const Expr& e) {
      if (e.kind != ExprKind::Index) return;
      has_index = true;
      if (e.args[0].kind == ExprKind::Var) arrays.insert(e.args[0].text);
    });
    if (!has_index) return;
    std::set<NodeId> integral = {s.id};
    for (const auto& arr : arrays)
      for (NodeId def : a.reaching_defs(s.id, arr)) {
        const Stmt* d = minilang::find_stmt(program, def);
        if (d && d->value && d->value->kind == ExprKind::NewArray) integral.insert(def);
      }
    std::vector<NodeId> criteria(integral.begin(), integral.end());
    out.push_back(a.make(BugKind::AIO, s.id, criteria, integral));
  });
  sort_slices(out);
  return out;
}

std::vector<TestSlice> collect_nfe(const Program& program) {
  Analysis a(program);
  std::vector<TestSlice> out;
  for_each_proc_stmt(program, [&](const Procedure&, const Stmt& s) {
    std::string arg;
    if (!calls_builtin(s, "parseInt", &arg)) return;
    std::set<NodeId> integral = {s.id};
    if (!arg.empty())
      for (NodeId def : a.reaching_defs(s.id, arg)) integral.insert(def);
    std::vector<NodeId> criteria(integral.begin(), integral.end());
    out.push_back(a.make(BugKind::NFE, s.id, criteria, integral));
  });
  sort_slices(out);
  return out;
}

std::vector<TestSlice> collect_leak(const Program& program) {
  Analysis a(program);
  std::vector<TestSlice> out;
  for (const auto& proc : program.procedures) {
    Cfg cfg = graph::build_cfg(proc);
    for (int i = 2; i < cfg.size(); ++i) {
      const Stmt& s = *cfg.stmt[static_cast<std::size_t>(i)];
      std::string handle;
      if (!calls_builtin(s, "open") || !assigns_var(s, &handle)) continue;
      std::set<int> closes;
      for (int j = 2; j < cfg.size(); ++j) {
        std::string closed;
        if (calls_builtin(*cfg.stmt[static_cast<std::size_t>(j)], "close", &closed) && closed == handle)
          closes.insert(j);
      }
      // The open's own exit edge is its failure, which leaves nothing to leak,
      // unless the exit is also where control goes next.
      std::vector<int> start = cfg.succ[static_cast<std::size_t>(i)];
      if (start.size() > 1) start.erase(std::remove(start.begin(), start.end(), Cfg::kExit), start.end());
      // Forward search avoiding closes; loops are traversed once.
      std::set<int> seen;
      std::deque<int> work(start.begin(), start.end());
      while (!work.empty()) {
        int n = work.front();
        work.pop_front();
        if (closes.count(n) || n == i || !seen.insert(n).second) continue;
        for (int m : cfg.succ[static_cast<std::size_t>(n)]) work.push_back(m);
      }
      if (!seen.count(Cfg::kExit)) continue;
      std::set<NodeId> integral = {s.id};
      for (int c : closes) integral.insert(cfg.stmt[static_cast<std::size_t>(c)]->id);
      std::vector<NodeId> criteria(integral.begin(), integral.end());
      // Early exits on leaking paths explain how the closes are skipped.
      for (int n : seen)
        if (n >= 2 && graph::may_fail(*cfg.stmt[static_cast<std::size_t>(n)]))
          criteria.push_back(cfg.stmt[static_cast<std::size_t>(n)]->id);
      out.push_back(a.make(BugKind::LEAK, s.id, criteria, integral));
    }
  }
  sort_slices(out);
  return out;
}

namespace {

/// Union-find over storage locations "proc::var" and "::global".
class Locations {
 public:
  std::string find(const std::string& x) {
    auto it = parent_.find(x);
    if (it == parent_.end() || it->second == x) return x;
    std::string r = find(it->second);
    parent_[x] = r;
    return r;
  }
  void unite(const std::string& a, const std::string& b) {
    std::string ra = find(a), rb = find(b);
    if (ra != rb) parent_[std::max(ra, rb)] = std::min(ra, rb);
  }

 private:
  std::map<std::string, std::string> parent_;
};

struct Access {
  NodeId stmt;
  std::string proc;
  std::string var;
};

struct SharedAnalysis {
  std::vector<SharedVarFinding> findings;
  std::map<NodeId, std::vector<NodeId>> reads_of_write;  // write -> concurrent reads
};

SharedAnalysis analyze_shared(const Program& program, const Analysis& a) {
  std::set<std::string> globals;
  for (const auto& g : program.globals) globals.insert(g.name);
  std::map<std::string, std::set<std::string>> locals;  // proc -> local names
  for (const auto& proc : program.procedures) {
    for (const auto& p : proc.params) locals[proc.name].insert(p.name);
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
      if (s.kind == StmtKind::VarDecl) locals[proc.name].insert(s.name);
    });
  }
  auto location = [&](const std::string& proc, const std::string& var) {
    return locals[proc].count(var) || !globals.count(var) ? proc + "::" + var : "::" + var;
  };

  Locations loc;
  // Thread contexts: main plus each spawn target; a context holds every
  // procedure reachable through plain calls.
  std::map<std::string, std::set<std::string>> callees;
  std::map<std::string, int> spawn_count;
  for (const auto& proc : program.procedures) {
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
      bool user_call = s.kind == StmtKind::Call && !s.value;
      if (!user_call && s.kind != StmtKind::Spawn) return;
      if (user_call) callees[proc.name].insert(s.name);
      if (s.kind == StmtKind::Spawn) spawn_count[s.name] += 1;
      const Procedure* callee = program.find_procedure(s.name);
      for (std::size_t i = 0; callee && i < s.args.size() && i < callee->params.size(); ++i)
        if (callee->params[i].by_ref && s.args[i].kind == ExprKind::Var)
          loc.unite(location(proc.name, s.args[i].text), location(callee->name, callee->params[i].name));
    });
  }
  // A spawn inside a loop can start the same target more than once.
  for (const auto& proc : program.procedures)
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
      if (s.kind != StmtKind::While) return;
      minilang::for_each_stmt(s.then_body, [&](const Stmt& inner) {
        if (inner.kind == StmtKind::Spawn) spawn_count[inner.name] += 2;
      });
    });
  if (spawn_count.empty()) return {};
  std::vector<std::pair<std::string, std::set<std::string>>> contexts;
  auto closure = [&](const std::string& root) {
    std::set<std::string> out;
    std::deque<std::string> work = {root};
    while (!work.empty()) {
      std::string p = work.front();
      work.pop_front();
      if (!out.insert(p).second) continue;
      for (const auto& c : callees[p]) work.push_back(c);
    }
    return out;
  };
  contexts.emplace_back(program.entry, closure(program.entry));
  for (const auto& [target, count] : spawn_count) {
    contexts.emplace_back(target, closure(target));
    if (count > 1) contexts.emplace_back(target + "#2", closure(target));
  }
  auto concurrent = [&](const std::string& p, const std::string& q) {
    for (std::size_t i = 0; i < contexts.size(); ++i)
      for (std::size_t j = 0; j < contexts.size(); ++j)
        if (i != j && contexts[i].second.count(p) && contexts[j].second.count(q)) return true;
    return false;
  };

  std::vector<Access> writes, reads;
  for (const auto& proc : program.procedures) {
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
      std::string var;
      if (s.kind == StmtKind::Assign && assigns_var(s, &var))
        writes.push_back({s.id, proc.name, loc.find(location(proc.name, var))});
      for (const auto& v : minilang::used_variables(s))
        reads.push_back({s.id, proc.name, loc.find(location(proc.name, v))});
    });
  }
  SharedAnalysis out;
  for (const auto& w : writes) {
    SharedVarFinding f;
    std::vector<NodeId> concurrent_reads;
    for (const auto& r : reads) {
      if (r.var != w.var || !concurrent(w.proc, r.proc)) continue;
      f.reading_procs.insert(r.proc);
      if (std::find(concurrent_reads.begin(), concurrent_reads.end(), r.stmt) == concurrent_reads.end())
        concurrent_reads.push_back(r.stmt);
    }
    if (f.reading_procs.empty()) continue;
    f.variable = w.var.substr(w.var.find("::") + 2);
    f.write_point = w.stmt;
    // Def-use chain feeding the written value, within the writing procedure.
    std::set<NodeId> chain = {w.stmt};
    std::deque<NodeId> work = {w.stmt};
    while (!work.empty()) {
      NodeId s = work.front();
      work.pop_front();
      const Stmt* st = minilang::find_stmt(program, s);
      std::vector<std::string> used;
      if (st->value)
        minilang::for_each_expr(*st->value, [&](const Expr& e) {
          if (e.kind == ExprKind::Var) used.push_back(e.text);
        });
      for (const auto& v : used)
        for (NodeId d : a.reaching_defs(s, v))
          if (minilang::owning_procedure(program, d) == w.proc && chain.insert(d).second) work.push_back(d);
    }
    f.update_sequence.assign(chain.begin(), chain.end());
    std::sort(concurrent_reads.begin(), concurrent_reads.end());
    out.reads_of_write[w.stmt] = concurrent_reads;
    out.findings.push_back(std::move(f));
  }
  std::sort(out.findings.begin(), out.findings.end(),
            [](const SharedVarFinding& x, const SharedVarFinding& y) { return x.write_point < y.write_point; });
  return out;
}

}  // namespace

std::vector<SharedVarFinding> find_shared_variables(const Program& program) {
  Analysis a(program);
  return analyze_shared(program, a).findings;
}

std::vector<TestSlice> collect_race(const Program& program) {
  Analysis a(program);
  SharedAnalysis shared = analyze_shared(program, a);
  std::vector<TestSlice> out;
  for (const auto& f : shared.findings) {
    const auto& reads = shared.reads_of_write.at(f.write_point);
    std::set<NodeId> integral(reads.begin(), reads.end());
    integral.insert(f.write_point);
    std::vector<NodeId> criteria = {f.write_point};
    criteria.insert(criteria.end(), reads.begin(), reads.end());
    out.push_back(a.make(BugKind::RACE, f.write_point, criteria, integral));
  }
  sort_slices(out);
  return out;
}

std::vector<TestSlice> collect(const Program& program, BugKind kind) {
  switch (kind) {
    case BugKind::NPD: return collect_npd(program);
    case BugKind::AIO: return collect_aio(program);
    case BugKind::NFE: return collect_nfe(program);
    case BugKind::LEAK: return collect_leak(program);
    case BugKind::RACE: return collect_race(program);
  }
  return {};
}

std::optional<TestSlice> slice_at(const Program& program, BugKind kind, NodeId point) {
  for (auto& s : collect(program, kind))
    if (s.bug_point == point) return std::move(s);
  return std::nullopt;
}

std::string manifest_json(const std::vector<TestSlice>& slices) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& s : slices)
    j.push_back({{"bug_kind", to_string(s.bug_kind)},
                 {"bug_point", s.bug_point},
                 {"integral", std::vector<NodeId>(s.integral.begin(), s.integral.end())},
                 {"source", minilang::pretty_print(s.program)}});
  return j.dump(2);
}

}  // namespace metabug::collectors
