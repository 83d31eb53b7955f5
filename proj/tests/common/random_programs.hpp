#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "metabug/collectors/collectors.hpp"
#include "metabug/explain/explain.hpp"
#include "metabug/minilang/parser.hpp"
#include "metabug/synthgen/interpreter.hpp"
#include "metabug/util/random.hpp"

namespace metabug::testutil {

struct RandomSlice {
  std::string source;
  collectors::TestSlice slice;
  /// The statement inside the planted contradiction, or kNoNode.
  minilang::NodeId planted = minilang::kNoNode;
  /// Ids of the `read_input` expressions, in source order.
  std::vector<minilang::NodeId> reads;
};

/// Integer code over three inputs with at most `max_branches` if/while
/// statements, ending in a dereference of `a`, which starts out null. With
/// `plant`, a nested pair of contradictory guards around `w := 77;` is added.
/// A `benign` slice guards every branch on its own unmodified input and never
/// assigns `a` a fresh array, so the plant is its only infeasible branch.
inline RandomSlice random_npd_slice(util::Rng& rng, int max_branches, bool plant = false,
                                    bool benign = false) {
  const std::vector<std::string> vars = {"x", "y", "z"};
  int branches = 0;
  int loops = 0;
  auto var = [&] { return rng.pick(vars); };
  auto lit = [&](int lo, int hi) { return std::to_string(rng.range(lo, hi)); };
  auto fresh = [&] { return "u" + std::to_string(branches); };
  auto cond = [&]() -> std::string {
    if (benign) return fresh() + (rng.chance(0.5) ? " > " : " <= ") + lit(-3, 3);
    switch (rng.below(6)) {
      case 0: return var() + " > " + lit(-3, 3);
      case 1: return var() + " <= " + var();
      case 2: return var() + " == " + lit(-2, 2);
      case 3: return rng.chance(0.5) ? "a != null" : "a == null";
      case 4: return var() + " > " + lit(-3, 3) + " && " + var() + " < " + lit(-3, 3);
      default: return "!(" + var() + " < " + lit(-3, 3) + ")";
    }
  };
  auto simple = [&]() -> std::string {
    if (benign) {
      switch (rng.below(3)) {
        case 0: return "w := w + " + var() + "; ";
        case 1: return "a := null; ";
        default: return "w := " + var() + " - " + lit(-2, 2) + "; ";
      }
    }
    switch (rng.below(5)) {
      case 0: return "a := new[abs(" + var() + ") + 1]; ";
      case 1: return "a := null; ";
      case 2: return var() + " := " + var() + " - " + var() + "; ";
      case 3: return var() + " := " + lit(-4, 4) + "; ";
      default: return var() + " := " + var() + " + " + lit(-2, 2) + "; ";
    }
  };
  std::function<std::string(int, int)> block = [&](int depth, int len) {
    std::string out;
    for (int i = 0; i < len; ++i) {
      int roll = static_cast<int>(rng.below(9));
      if (roll <= 1 && branches < max_branches && depth < 3) {
        std::string c = cond();
        ++branches;
        out += "if (" + c + ") { " + block(depth + 1, 1 + static_cast<int>(rng.below(2))) + "} ";
        if (rng.chance(0.5)) out.insert(out.size() - 1, " else { " + block(depth + 1, 1) + "}");
      } else if (roll == 2 && branches < max_branches && depth < 2) {
        std::string bound = benign ? fresh() : rng.chance(0.5) ? lit(1, 3) : var();
        ++branches;
        std::string i_var = "i" + std::to_string(loops++);
        out += "var " + i_var + " := 0; while (" + i_var + " < " + bound + ") { " +
               block(depth + 1, 1) + i_var + " := " + i_var + " + 1; } ";
      } else {
        out += simple();
      }
    }
    return out;
  };
  std::string body = block(0, 3 + static_cast<int>(rng.below(4)));
  if (plant) {
    std::string c = lit(-2, 2);
    std::string v = benign ? "x" : var();
    std::string inner_else = rng.chance(0.5) ? " else { w := 1; }" : "";
    std::string trap = "if (" + v + " > " + c + ") { if (" + v + " < " + c + ") { w := 77; }" +
                       inner_else + " } ";
    body = rng.chance(0.5) ? trap + body : body + trap;
  }
  RandomSlice out;
  out.source = "proc main() { var x := read_input(); var y := read_input(); var z := read_input(); ";
  if (benign)
    for (int i = 0; i < branches; ++i)
      out.source += "var u" + std::to_string(i) + " := read_input(); ";
  out.source += "var w := 0; var a := null; " + body + "var n := length(a); }";
  minilang::Program p = minilang::parse_program(out.source);
  const auto& main = p.procedures.back();
  minilang::NodeId null_decl = minilang::kNoNode, deref = main.body.back().id;
  minilang::for_each_stmt(main.body, [&](const minilang::Stmt& s) {
    std::string h = minilang::print_stmt_header(s);
    if (h == "var a := null;") null_decl = s.id;
    if (h == "w := 77;") out.planted = s.id;
    minilang::for_each_own_expr(s, [&](const minilang::Expr& e) {
      if (e.kind == minilang::ExprKind::Builtin && e.text == "read_input") out.reads.push_back(e.id);
    });
  });
  out.slice.program = std::move(p);
  out.slice.bug_kind = BugKind::NPD;
  out.slice.bug_point = deref;
  out.slice.integral = {null_decl, deref};
  return out;
}

/// Statement traces of every run over all inputs in [lo, hi]^reads that ends
/// in a null dereference at the slice's bug point. Runs that exhaust the
/// interpreter's step budget are skipped.
inline std::set<std::vector<minilang::NodeId>> concrete_bug_traces(const RandomSlice& r, int lo,
                                                                   int hi) {
  std::set<std::vector<minilang::NodeId>> out;
  std::vector<std::int64_t> vals(r.reads.size(), lo);
  while (true) {
    synthgen::ProgramInput in;
    for (std::size_t i = 0; i < r.reads.size(); ++i) in.reads[r.reads[i]] = {vals[i]};
    synthgen::Execution ex;
    try {
      ex = synthgen::interpret(r.slice.program, in, 500);
    } catch (const std::exception&) {
      ex.outcome.kind = synthgen::OutcomeKind::RuntimeError;
    }
    if (ex.outcome.kind == synthgen::OutcomeKind::NullDeref && ex.outcome.at == r.slice.bug_point)
      out.insert(ex.trace);
    std::size_t k = 0;
    while (k < vals.size() && vals[k] == hi) vals[k++] = lo;
    if (k == vals.size()) break;
    ++vals[k];
  }
  return out;
}

/// Every decision assignment over the slice's branch statements.
inline std::vector<explain::Decisions> all_decisions(const explain::SliceContext& ctx) {
  std::vector<explain::Decisions> out{{}};
  for (minilang::NodeId id : explain::decision_points(ctx)) {
    std::vector<explain::Decisions> next;
    for (const auto& d : out)
      for (int v = 0; v < 2; ++v) {
        auto e = d;
        e[id] = v;
        next.push_back(std::move(e));
      }
    out = std::move(next);
  }
  return out;
}

}  // namespace metabug::testutil
