#include "metabug/explain/explain.hpp"

#include <algorithm>
#include <functional>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "metabug/graph/slice.hpp"
#include "metabug/minilang/parser.hpp"
#include "metabug/util/random.hpp"

namespace metabug::explain {

using minilang::Stmt;
using minilang::StmtKind;
using nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxEnumerated = 4096;

bool by_score(const StatementScores& scores, NodeId a, NodeId b) {
  auto get = [&](NodeId id) {
    auto it = scores.find(id);
    return it == scores.end() ? 0.0 : it->second;
  };
  double sa = get(a), sb = get(b);
  if (sa != sb) return sa > sb;
  return a < b;
}

struct Subpath {
  Decisions decisions;
  double score = 0;
};

class Planner {
 public:
  Planner(const SliceContext& ctx, const StatementScores& scores, const ExplainOptions& opt)
      : ctx_(ctx), scores_(scores), opt_(opt) {
    for (NodeId id : top_n_attended(ctx.slice(), scores, opt.top_n)) top_.insert(id);
  }

  double own(NodeId id) const {
    if (!top_.count(id)) return 0;
    auto it = scores_.find(id);
    return it == scores_.end() ? 0.0 : it->second;
  }

  double block_score(const std::vector<Stmt>& block) const {
    std::vector<std::string> stack;
    return block_score(block, stack);
  }

  double arm_score(NodeId id, int arm) const {
    const Stmt* s = ctx_.stmt(id);
    if (s->kind == StmtKind::While) return arm == 0 ? block_score(s->then_body) : 0.0;
    return block_score(arm == 0 ? s->then_body : s->else_body);
  }

  const std::vector<Stmt>& arm(NodeId id, int which) const {
    static const std::vector<Stmt> kEmpty;
    const Stmt* s = ctx_.stmt(id);
    if (s->kind == StmtKind::While) return which == 0 ? s->then_body : kEmpty;
    return which == 0 ? s->then_body : s->else_body;
  }

  bool forced(NodeId id, int which) const { return ctx_.covers_any(arm(id, which), ctx_.required()); }

  /// The forced arm, or -1.
  int forced_arm(NodeId id) const {
    bool a = forced(id, 0), b = forced(id, 1);
    if (a == b) return -1;
    return a ? 0 : 1;
  }

  Decisions initial() const {
    Decisions d;
    util::Rng rng(util::derive_seed(opt_.seed, static_cast<std::uint64_t>(ctx_.slice().bug_point)));
    for (NodeId id : decision_points(ctx_)) {
      int f = forced_arm(id);
      if (f >= 0) {
        d[id] = f;
        continue;
      }
      double s0 = arm_score(id, 0), s1 = arm_score(id, 1);
      if (s0 == 0 && s1 == 0 && !forced(id, 0)) {
        d[id] = static_cast<int>(rng.below(2));
      } else {
        d[id] = s1 > s0 ? 1 : 0;
      }
    }
    return d;
  }

  double path_score(const PathCandidate& p) const {
    std::set<NodeId> seen;
    double s = 0;
    for (const auto& st : p.steps)
      if (seen.insert(st.stmt).second) s += own(st.stmt);
    return s;
  }

  /// Every decision assignment inside `block`, keeping forced arms.
  std::vector<Subpath> enumerate(const std::vector<Stmt>& block) const {
    std::vector<Subpath> acc{Subpath{}};
    for (const auto& s : block) {
      for (auto& a : acc) a.score += own(s.id);
      if (s.kind != StmtKind::If && s.kind != StmtKind::While) continue;
      std::vector<Subpath> options;
      int f = forced_arm(s.id);
      for (int which = 0; which < 2; ++which) {
        if (f >= 0 && which != f) continue;
        for (auto sub : enumerate(arm(s.id, which))) {
          sub.decisions[s.id] = which;
          options.push_back(std::move(sub));
        }
      }
      std::vector<Subpath> next;
      for (const auto& a : acc)
        for (const auto& o : options) {
          Subpath m = a;
          m.score += o.score;
          m.decisions.insert(o.decisions.begin(), o.decisions.end());
          next.push_back(std::move(m));
        }
      if (next.size() > kMaxEnumerated) {
        std::stable_sort(next.begin(), next.end(),
                         [](const Subpath& x, const Subpath& y) { return x.score > y.score; });
        next.resize(kMaxEnumerated);
      }
      acc = std::move(next);
    }
    return acc;
  }

 private:
  const SliceContext& ctx_;
  const StatementScores& scores_;
  const ExplainOptions& opt_;
  std::set<NodeId> top_;

  double block_score(const std::vector<Stmt>& block, std::vector<std::string>& stack) const {
    double total = 0;
    for (const auto& s : block) {
      total += own(s.id);
      switch (s.kind) {
        case StmtKind::If:
          total += std::max(block_score(s.then_body, stack), block_score(s.else_body, stack));
          break;
        case StmtKind::While: total += block_score(s.then_body, stack); break;
        case StmtKind::Call: {
          const minilang::Procedure* callee = ctx_.program().find_procedure(s.name);
          if (s.value || !callee || std::count(stack.begin(), stack.end(), s.name)) break;
          stack.push_back(s.name);
          total += block_score(callee->body, stack);
          stack.pop_back();
          break;
        }
        default: break;
      }
    }
    return total;
  }
};

// Loop-count vectors over {1..kMaxUnroll}, fewest total iterations first.
std::vector<std::vector<int>> unroll_combos(std::size_t loops, std::size_t cap) {
  std::vector<std::vector<int>> out;
  if (loops == 0) return {{}};
  std::vector<int> cur(loops, 1);
  const int max_total = static_cast<int>(loops) * kMaxUnroll;
  for (int total = static_cast<int>(loops); total <= max_total && out.size() < cap; ++total) {
    // Lexicographic enumeration of vectors with the given sum.
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
      if (out.size() >= cap) return;
      std::size_t rest = loops - i - 1;
      if (i + 1 == loops) {
        if (left >= 1 && left <= kMaxUnroll) {
          cur[i] = left;
          out.push_back(cur);
        }
        return;
      }
      for (int v = 1; v <= kMaxUnroll; ++v) {
        int remain = left - v;
        if (remain < static_cast<int>(rest) || remain > static_cast<int>(rest) * kMaxUnroll) continue;
        cur[i] = v;
        rec(i + 1, remain);
      }
    };
    rec(0, total);
  }
  return out;
}

}  // namespace

StatementScores statement_scores(const nn::GraphInput& g, const std::vector<double>& alpha) {
  StatementScores out;
  for (std::size_t i = 0; i < g.size() && i < alpha.size(); ++i)
    if (g.stmt_of[i] != kNoNode) out[g.stmt_of[i]] += alpha[i];
  return out;
}

StatementScores statement_scores(const nn::GraphInput& g, const nn::AttentionMap& attention) {
  if (attention.alpha.empty()) return {};
  return statement_scores(g, attention.final_alpha());
}

std::set<NodeId> integral_statements(const collectors::TestSlice& slice) { return slice.integral; }

std::vector<NodeId> top_n_attended(const collectors::TestSlice& slice,
                                   const StatementScores& scores, std::size_t n) {
  std::set<NodeId> ids = graph::statement_ids(slice.program);
  std::vector<NodeId> all(ids.begin(), ids.end());
  std::stable_sort(all.begin(), all.end(),
                   [&](NodeId a, NodeId b) { return by_score(scores, a, b); });
  if (all.size() > n) all.resize(n);
  for (NodeId id : slice.integral)
    if (std::find(all.begin(), all.end(), id) == all.end()) all.push_back(id);
  return all;
}

Feasibility is_path_feasible(const SliceContext& ctx, PathCandidate& path,
                             const ExplainOptions& options) {
  PathCandidate base = build_path(ctx, path.decisions);
  std::vector<NodeId> loops = loops_on(ctx, base);
  Feasibility first;
  bool have_first = false;
  for (const auto& combo : unroll_combos(loops.size(), options.max_unroll_combos)) {
    Unrolling u;
    for (std::size_t i = 0; i < loops.size(); ++i) u[loops[i]] = combo[i];
    PathCandidate cand = loops.empty() ? base : build_path(ctx, path.decisions, u);
    Feasibility f = check_path(ctx, cand);
    if (f.feasible) {
      cand.score = path.score;
      path = std::move(cand);
      return f;
    }
    if (!have_first) {
      first = std::move(f);
      have_first = true;
    }
  }
  base.score = path.score;
  path = std::move(base);
  return first;
}

std::vector<NodeId> TraceReport::statements() const {
  std::vector<NodeId> out;
  for (const auto& l : trace) out.push_back(l.stmt);
  return out;
}

TraceReport decorate_trace(const PathCandidate& path, const collectors::TestSlice& slice,
                           const StatementScores& scores, std::size_t key_steps) {
  SliceContext ctx(slice);
  TraceReport r;
  std::vector<NodeId> distinct;
  for (const auto& st : path.steps)
    if (std::find(distinct.begin(), distinct.end(), st.stmt) == distinct.end())
      distinct.push_back(st.stmt);
  std::stable_sort(distinct.begin(), distinct.end(),
                   [&](NodeId a, NodeId b) { return by_score(scores, a, b); });
  if (distinct.size() > key_steps) distinct.resize(key_steps);
  std::sort(distinct.begin(), distinct.end());
  r.key_steps = distinct;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const PathStep& st = path.steps[i];
    const Stmt* s = ctx.stmt(st.stmt);
    TraceLine line;
    line.n = static_cast<int>(i) + 1;
    line.stmt = st.stmt;
    line.loc = s ? s->loc : minilang::SourceLoc{};
    line.text = s ? minilang::print_stmt_header(*s) : "?";
    if (st.branch) line.text += *st.branch ? " => true" : " => false";
    line.underlined = std::binary_search(distinct.begin(), distinct.end(), st.stmt);
    line.boxed = path.reaches_bug && i + 1 == path.steps.size();
    r.trace.push_back(std::move(line));
  }
  r.bug_point = path.boxed();
  return r;
}

TraceReport find_feasible_path(const collectors::TestSlice& slice, const StatementScores& scores,
                               const ExplainOptions& options) {
  SliceContext ctx(slice);
  Planner planner(ctx, scores, options);

  PathCandidate path = build_path(ctx, planner.initial());
  path.score = planner.path_score(path);
  PathCandidate cand = path;
  Feasibility feas = is_path_feasible(ctx, cand, options);

  struct Branch {
    NodeId id;
    int taken;
    double score;
    std::size_t order;
  };
  std::vector<Branch> branches;
  {
    std::vector<NodeId> on = decisions_on(ctx, path);
    for (std::size_t i = 0; i < on.size(); ++i) {
      NodeId id = on[i];
      int taken = path.decisions.count(id) ? path.decisions.at(id) : 1;
      if (planner.forced(id, taken)) continue;
      branches.push_back({id, taken, planner.arm_score(id, taken), i});
    }
    std::sort(branches.begin(), branches.end(), [](const Branch& a, const Branch& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.order > b.order;
    });
  }

  while (!feas.feasible && !branches.empty()) {
    Branch b = branches.back();
    branches.pop_back();
    int other = 1 - b.taken;
    const auto& opposite = planner.arm(b.id, other);
    if (opposite.empty()) {
      cand = path;
      cand.decisions[b.id] = other;
      feas = is_path_feasible(ctx, cand, options);
      continue;
    }
    std::vector<Subpath> subs = planner.enumerate(opposite);
    std::stable_sort(subs.begin(), subs.end(),
                     [](const Subpath& x, const Subpath& y) { return x.score > y.score; });
    if (subs.size() > options.max_subpaths) subs.resize(options.max_subpaths);
    for (const auto& sub : subs) {
      PathCandidate trial = path;
      trial.decisions[b.id] = other;
      for (const auto& [id, v] : sub.decisions) trial.decisions[id] = v;
      Feasibility f = is_path_feasible(ctx, trial, options);
      if (f.feasible) {
        cand = std::move(trial);
        feas = std::move(f);
        break;
      }
    }
  }
  if (!feas.feasible) {
    cand = path;
    feas = is_path_feasible(ctx, cand, options);
  }
  cand.score = planner.path_score(cand);

  TraceReport r = decorate_trace(cand, slice, scores, options.key_steps);
  r.feasible = feas.feasible;
  r.constraint = feas.rendered;
  r.notes = feas.notes;
  r.score = cand.score;
  r.best_score = path.score;
  return r;
}

bool is_subsequence(const std::vector<NodeId>& sub, const std::vector<NodeId>& seq) {
  std::size_t j = 0;
  for (NodeId x : seq)
    if (j < sub.size() && sub[j] == x) ++j;
  return j == sub.size();
}

bool evaluate_trace(const std::vector<NodeId>& trace, const synthgen::GroundTruth& truth) {
  return is_subsequence(truth.minimal_trace, trace) && is_subsequence(trace, truth.full_trace);
}

std::string report_to_json(const TraceReport& report) {
  ordered_json trace = ordered_json::array();
  for (const auto& l : report.trace)
    trace.push_back({{"n", l.n},
                     {"stmt", l.stmt},
                     {"loc", std::to_string(l.loc.line) + ":" + std::to_string(l.loc.column)},
                     {"text", l.text},
                     {"underlined", l.underlined}});
  ordered_json j = {{"slice_id", report.slice_id},
                    {"rank", report.rank},
                    {"distance", report.distance},
                    {"feasible", report.feasible},
                    {"trace", trace},
                    {"bug_point", report.bug_point},
                    {"constraint", report.constraint},
                    {"notes", report.notes}};
  return j.dump(2);
}

TraceReport report_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  TraceReport r;
  r.slice_id = j.at("slice_id").get<std::string>();
  r.rank = j.at("rank").get<int>();
  r.distance = j.at("distance").get<double>();
  r.feasible = j.at("feasible").get<bool>();
  r.bug_point = j.at("bug_point").get<NodeId>();
  r.constraint = j.at("constraint").get<std::string>();
  if (j.contains("notes")) r.notes = j.at("notes").get<std::vector<std::string>>();
  const auto& trace = j.at("trace");
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& t = trace[i];
    TraceLine l;
    l.n = t.at("n").get<int>();
    if (t.contains("stmt")) l.stmt = t.at("stmt").get<NodeId>();
    std::string loc = t.at("loc").get<std::string>();
    auto colon = loc.find(':');
    l.loc.line = std::stoi(loc.substr(0, colon));
    l.loc.column = std::stoi(loc.substr(colon + 1));
    l.text = t.at("text").get<std::string>();
    l.underlined = t.at("underlined").get<bool>();
    l.boxed = r.bug_point != kNoNode && i + 1 == trace.size();
    r.trace.push_back(std::move(l));
  }
  return r;
}

std::string report_to_text(const TraceReport& report) {
  std::ostringstream os;
  os << "slice " << report.slice_id << "  rank " << report.rank << "  distance "
     << std::fixed << std::setprecision(4) << report.distance << "  "
     << (report.feasible ? "feasible" : "no feasible path") << "\n";
  for (const auto& l : report.trace) {
    os << std::setw(4) << l.n << " " << (l.underlined ? '*' : ' ') << " ";
    if (l.boxed) {
      os << "[ " << l.text << " ]";
    } else {
      os << l.text;
    }
    os << "    @" << l.loc.line << ":" << l.loc.column << "\n";
  }
  os << "constraint: " << report.constraint << "\n";
  for (const auto& n : report.notes) os << "note: " << n << "\n";
  return os.str();
}

}  // namespace metabug::explain
