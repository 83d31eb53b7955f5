#include "metabug/graph/cfg.hpp"

#include <algorithm>

#include "metabug/minilang/builtins.hpp"

namespace metabug::graph {

using minilang::Expr;
using minilang::ExprKind;
using minilang::Stmt;
using minilang::StmtKind;

bool may_fail(const Stmt& s) {
  bool fails = false;
  minilang::for_each_own_expr(s, [&](const Expr& e) {
    if (e.kind == ExprKind::Builtin) {
      auto sig = minilang::find_builtin(e.text);
      if (sig && sig->may_fail) fails = true;
    }
  });
  return fails;
}

namespace {

class CfgBuilder {
 public:
  Cfg cfg;

  void add_edge(int a, int b) {
    auto& s = cfg.succ[a];
    if (std::find(s.begin(), s.end(), b) != s.end()) return;
    s.push_back(b);
    cfg.pred[b].push_back(a);
  }

  void number(const std::vector<Stmt>& block) {
    for (const auto& s : block) {
      cfg.index_of[s.id] = cfg.size();
      cfg.stmt.push_back(&s);
      cfg.succ.emplace_back();
      cfg.pred.emplace_back();
      number(s.then_body);
      number(s.else_body);
    }
  }

  int first_of(const std::vector<Stmt>& block, int follow) const {
    return block.empty() ? follow : cfg.index_of.at(block.front().id);
  }

  void link(const std::vector<Stmt>& block, int follow) {
    for (std::size_t i = 0; i < block.size(); ++i) {
      const Stmt& s = block[i];
      int me = cfg.index_of.at(s.id);
      int next = i + 1 < block.size() ? cfg.index_of.at(block[i + 1].id) : follow;
      switch (s.kind) {
        case StmtKind::If:
          add_edge(me, first_of(s.then_body, next));
          add_edge(me, first_of(s.else_body, next));
          link(s.then_body, next);
          link(s.else_body, next);
          break;
        case StmtKind::While:
          add_edge(me, first_of(s.then_body, me));
          add_edge(me, next);
          link(s.then_body, me);
          break;
        case StmtKind::Return:
          add_edge(me, Cfg::kExit);
          break;
        default:
          add_edge(me, next);
          break;
      }
      if (may_fail(s)) add_edge(me, Cfg::kExit);
    }
  }
};

}  // namespace

Cfg build_cfg(const minilang::Procedure& proc) {
  CfgBuilder b;
  b.cfg.stmt = {nullptr, nullptr};
  b.cfg.succ.resize(2);
  b.cfg.pred.resize(2);
  b.number(proc.body);
  b.add_edge(Cfg::kEntry, b.first_of(proc.body, Cfg::kExit));
  b.link(proc.body, Cfg::kExit);
  b.add_edge(Cfg::kEntry, Cfg::kExit);
  return b.cfg;
}

std::vector<int> immediate_postdominators(const Cfg& cfg) {
  const int n = cfg.size();
  // Iterative set-based post-dominance; graphs here are small.
  std::vector<std::vector<bool>> pdom(n, std::vector<bool>(n, true));
  pdom[Cfg::kExit].assign(n, false);
  pdom[Cfg::kExit][Cfg::kExit] = true;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int v = n - 1; v >= 0; --v) {
      if (v == Cfg::kExit) continue;
      std::vector<bool> next(n, true);
      if (cfg.succ[v].empty()) next.assign(n, false);
      for (int s : cfg.succ[v])
        for (int i = 0; i < n; ++i) next[i] = next[i] && pdom[s][i];
      next[v] = true;
      if (next != pdom[v]) {
        pdom[v] = std::move(next);
        changed = true;
      }
    }
  }
  std::vector<int> ipdom(n, -1);
  for (int v = 0; v < n; ++v) {
    if (v == Cfg::kExit) continue;
    // The immediate post-dominator is the strict post-dominator that all others post-dominate.
    for (int c = 0; c < n; ++c) {
      if (c == v || !pdom[v][c]) continue;
      bool immediate = true;
      for (int o = 0; o < n && immediate; ++o)
        if (o != v && o != c && pdom[v][o] && !pdom[c][o]) immediate = false;
      if (immediate) {
        ipdom[v] = c;
        break;
      }
    }
  }
  return ipdom;
}

std::vector<std::pair<int, int>> control_dependences(const Cfg& cfg) {
  auto ipdom = immediate_postdominators(cfg);
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < cfg.size(); ++a) {
    for (int b : cfg.succ[a]) {
      // Walk the post-dominator tree from b up to (excluding) ipdom(a).
      int stop = ipdom[a];
      for (int y = b; y != -1 && y != stop; y = ipdom[y]) out.emplace_back(a, y);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace metabug::graph
