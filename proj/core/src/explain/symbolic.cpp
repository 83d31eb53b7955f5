#include "metabug/explain/symbolic.hpp"

#include <algorithm>
#include <optional>
#include <set>

namespace metabug::explain {

using minilang::Expr;
using minilang::ExprKind;
using minilang::Procedure;
using minilang::Stmt;
using minilang::StmtKind;

namespace {

enum class Shape { Unknown, Int, Str, Ref, Null };

struct Obj {
  Shape shape = Shape::Unknown;
  std::optional<LinExpr> num;
  std::optional<LinExpr> len;
  /// Unknown values that may hold a null reference get a null atom on demand.
  bool maybe_null = false;
  int null_atom = -1;
  std::string origin;
};

std::string at(const minilang::SourceLoc& loc) {
  return std::to_string(loc.line) + ":" + std::to_string(loc.column);
}

std::set<std::string> locals_of(const Procedure& proc) {
  std::set<std::string> out;
  for (const auto& p : proc.params) out.insert(p.name);
  minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
    if (s.kind == StmtKind::VarDecl) out.insert(s.name);
  });
  return out;
}

class Executor {
 public:
  explicit Executor(const SliceContext& ctx) : ctx_(ctx) {
    for (const auto& p : ctx.program().procedures) locals_[p.name] = locals_of(p);
    null_ = make({Shape::Null, {}, {}, false, -1, "null"});
  }

  Feasibility run(const PathCandidate& path) {
    Feasibility out;
    frames_ = path.frames;
    const std::size_t n = path.steps.size();
    for (std::size_t i = 0; i < n; ++i) {
      const PathStep& st = path.steps[i];
      const Stmt* s = ctx_.stmt(st.stmt);
      if (!s) continue;
      frame_ = st.frame;
      if (path.reaches_bug && i + 1 == n) {
        add_piece(bug_condition(st, *s));
      } else {
        exec(st, *s);
      }
      if (pc_.is_false()) break;
    }
    if (!path.reaches_bug) pc_ = Dnf::falsity();
    out.constraint = pc_;
    out.feasible = path.reaches_bug && satisfiable(pc_);
    out.notes = notes_;
    std::string text;
    std::set<std::string> shown;
    for (const auto& p : pieces_) {
      std::string r = render(p, [&](int v) { return var_names_.at(v); },
                             [&](int a) { return atom_names_.at(a); });
      if (!shown.insert(r).second) continue;
      bool wrap = p.terms.size() > 1 && pieces_.size() > 1;
      text += (text.empty() ? "" : " && ") + (wrap ? "(" + r + ")" : r);
    }
    out.rendered = text.empty() ? "true" : text;
    if (!path.reaches_bug) out.rendered = "false";
    return out;
  }

 private:
  const SliceContext& ctx_;
  std::map<std::string, std::set<std::string>> locals_;
  std::map<int, std::string> frames_;
  std::vector<Obj> objs_;
  std::vector<int> slots_;
  std::map<std::string, int> globals_;
  std::map<int, std::map<std::string, int>> envs_;
  std::vector<std::string> var_names_, atom_names_;
  std::set<std::string> used_names_;
  std::vector<std::string> notes_;
  Dnf pc_ = Dnf::truth();
  std::vector<Dnf> pieces_;
  Dnf* side_ = nullptr;
  int frame_ = -1;
  int null_ = 0;
  minilang::SourceLoc loc_;

  // Box mode: faults of the collected kinds are gathered instead of excluded.
  bool collect_null_ = false;
  bool collect_oob_ = false;
  Dnf fault_ = Dnf::falsity();
  bool fault_site_ = false;

  std::string unique(std::string name) {
    std::string n = name;
    for (int k = 1; !used_names_.insert(n).second; ++k) n = name + "#" + std::to_string(k);
    return n;
  }

  int new_var(const std::string& name) {
    var_names_.push_back(unique(name));
    return static_cast<int>(var_names_.size()) - 1;
  }

  int new_atom(const std::string& name) {
    atom_names_.push_back(unique(name));
    return static_cast<int>(atom_names_.size()) - 1;
  }

  int make(Obj o) {
    objs_.push_back(std::move(o));
    return static_cast<int>(objs_.size()) - 1;
  }

  int make_int(LinExpr e) { return make({Shape::Int, std::move(e), {}, false, -1, ""}); }

  int unknown(const std::string& origin, bool maybe_null) {
    return make({Shape::Unknown, {}, {}, maybe_null, -1, origin});
  }

  int new_slot(int obj) {
    slots_.push_back(obj);
    return static_cast<int>(slots_.size()) - 1;
  }

  void note(const std::string& what) {
    std::string n = what + " at " + at(loc_) + " left unconstrained";
    if (std::find(notes_.begin(), notes_.end(), n) == notes_.end()) notes_.push_back(n);
  }

  void add_piece(const Dnf& d) {
    if (d.is_true() && d.exact) return;
    pieces_.push_back(d);
    pc_ = conj(pc_, d);
  }

  void require(const Dnf& d) {
    if (side_) {
      *side_ = conj(*side_, d);
    } else {
      add_piece(d);
    }
  }

  // Facts that hold whatever branch is taken.
  void fact(const Dnf& d) { add_piece(d); }

  template <typename F>
  Dnf collect(F&& f) {
    Dnf acc = Dnf::truth();
    Dnf* saved = side_;
    side_ = &acc;
    f();
    side_ = saved;
    return acc;
  }

  bool is_local(const std::string& name) const {
    auto it = frames_.find(frame_);
    if (it == frames_.end()) return false;
    return locals_.at(it->second).count(name) > 0;
  }

  int slot_of(const std::string& name) {
    if (is_local(name)) {
      auto& env = envs_[frame_];
      auto it = env.find(name);
      if (it != env.end()) return it->second;
      return env[name] = new_slot(unknown(name, true));
    }
    auto it = globals_.find(name);
    if (it != globals_.end()) return it->second;
    return globals_[name] = new_slot(unknown(name, true));
  }

  LinExpr int_of(int o) {
    Obj& obj = objs_[static_cast<std::size_t>(o)];
    if (obj.num) return *obj.num;
    if (obj.shape != Shape::Unknown) note("non-integer operand");
    LinExpr v = LinExpr::var(new_var(obj.origin.empty() ? "v" : obj.origin));
    objs_[static_cast<std::size_t>(o)].num = v;
    return v;
  }

  LinExpr len_of(int o) {
    Obj& obj = objs_[static_cast<std::size_t>(o)];
    if (obj.len) return *obj.len;
    if (obj.shape == Shape::Null) return LinExpr::num(0);
    std::string origin = obj.origin.empty() ? "seq" : obj.origin;
    LinExpr v = LinExpr::var(new_var("len(" + origin + ")"));
    objs_[static_cast<std::size_t>(o)].len = v;
    fact(Dnf::ge(v));
    return v;
  }

  Dnf is_null(int o) {
    Obj& obj = objs_[static_cast<std::size_t>(o)];
    switch (obj.shape) {
      case Shape::Null: return Dnf::truth();
      case Shape::Unknown:
        if (!obj.maybe_null) return Dnf::falsity();
        if (obj.null_atom < 0) {
          int a = new_atom("null(" + obj.origin + ")");
          objs_[static_cast<std::size_t>(o)].null_atom = a;
        }
        return Dnf::atom(objs_[static_cast<std::size_t>(o)].null_atom, true);
      default: return Dnf::falsity();
    }
  }

  void deref(int o) {
    Dnf n = is_null(o);
    if (collect_null_) {
      fault_ = disj(fault_, n);
      fault_site_ = true;
      return;
    }
    require(negate(n));
  }

  void index_check(int base, const LinExpr& i) {
    LinExpr len = len_of(base);
    Dnf oob = disj(Dnf::ge(i * -1 - LinExpr::num(1)), Dnf::ge(i - len));
    if (collect_oob_) {
      fault_ = disj(fault_, oob);
      fault_site_ = true;
      return;
    }
    require(disj(is_null(base), negate(oob)));
  }

  Dnf equal(int a, int b) {
    const Obj& x = objs_[static_cast<std::size_t>(a)];
    const Obj& y = objs_[static_cast<std::size_t>(b)];
    if (x.shape == Shape::Null) return is_null(b);
    if (y.shape == Shape::Null) return is_null(a);
    if (a == b) return Dnf::truth();
    bool x_int = x.shape == Shape::Int || (x.shape == Shape::Unknown && !x.maybe_null);
    bool y_int = y.shape == Shape::Int || (y.shape == Shape::Unknown && !y.maybe_null);
    if (x_int && y_int) return Dnf::eq(int_of(a) - int_of(b));
    if (x.shape == Shape::Ref && y.shape == Shape::Ref) return Dnf::falsity();
    if ((x.shape == Shape::Int && y.shape != Shape::Unknown) ||
        (y.shape == Shape::Int && x.shape != Shape::Unknown))
      return Dnf::falsity();
    return Dnf::atom(new_atom("eq@" + at(loc_)), true);
  }

  Dnf cond(const Expr& e) {
    if (e.kind == ExprKind::Unary && e.text == "!") return negate(cond(e.args[0]));
    if (e.kind == ExprKind::Binary) {
      const std::string& op = e.text;
      if (op == "&&" || op == "||") {
        Dnf l = cond(e.args[0]);
        Dnf r;
        Dnf req = collect([&] { r = cond(e.args[1]); });
        bool is_and = op == "&&";
        require(disj(is_and ? negate(l) : l, req));
        return is_and ? conj(l, r) : disj(l, r);
      }
      if (op == "==" || op == "!=") {
        int a = eval(e.args[0]);
        int b = eval(e.args[1]);
        Dnf eq = equal(a, b);
        return op == "==" ? eq : negate(eq);
      }
      if (op == "<" || op == "<=" || op == ">" || op == ">=") {
        LinExpr a = int_of(eval(e.args[0]));
        LinExpr b = int_of(eval(e.args[1]));
        if (op == "<") return Dnf::ge(b - a - LinExpr::num(1));
        if (op == "<=") return Dnf::ge(b - a);
        if (op == ">") return Dnf::ge(a - b - LinExpr::num(1));
        return Dnf::ge(a - b);
      }
    }
    int v = eval(e);
    const Obj& obj = objs_[static_cast<std::size_t>(v)];
    switch (obj.shape) {
      case Shape::Null: return Dnf::falsity();
      case Shape::Ref:
      case Shape::Str: return Dnf::truth();
      default: return Dnf::ne(int_of(v));
    }
  }

  // 0/1 integer mirroring a condition.
  int boolean(const Expr& e) {
    Dnf c = cond(e);
    LinExpr b = LinExpr::var(new_var("b@" + at(e.loc)));
    fact(disj(conj(Dnf::eq(b - LinExpr::num(1)), c), conj(Dnf::eq(b), negate(c))));
    return make_int(b);
  }

  int eval(const Expr& e) {
    switch (e.kind) {
      case ExprKind::IntLit: return make_int(LinExpr::num(e.int_value));
      case ExprKind::StrLit:
        return make({Shape::Str, {}, LinExpr::num(static_cast<std::int64_t>(e.text.size())), false,
                     -1, "str"});
      case ExprKind::Null: return null_;
      case ExprKind::Var: return slots_[static_cast<std::size_t>(slot_of(e.text))];
      case ExprKind::Index: {
        int base = eval(e.args[0]);
        deref(base);
        index_check(base, int_of(eval(e.args[1])));
        return make_int(LinExpr::var(new_var("elem@" + at(e.loc))));
      }
      case ExprKind::Unary:
        if (e.text == "!") return boolean(e);
        return make_int(int_of(eval(e.args[0])) * -1);
      case ExprKind::Binary: {
        const std::string& op = e.text;
        if (op == "+" || op == "-" || op == "*" || op == "/" || op == "%") {
          LinExpr a = int_of(eval(e.args[0]));
          LinExpr b = int_of(eval(e.args[1]));
          if (op == "+") return make_int(a + b);
          if (op == "-") return make_int(a - b);
          if (op == "*" && a.is_constant()) return make_int(b * a.constant);
          if (op == "*" && b.is_constant()) return make_int(a * b.constant);
          if ((op == "/" || op == "%") && b.is_constant() && b.constant == 1)
            return make_int(op == "/" ? a : LinExpr::num(0));
          note("nonlinear term");
          return make_int(LinExpr::var(new_var(op + "@" + at(e.loc))));
        }
        return boolean(e);
      }
      case ExprKind::NewArray: {
        LinExpr n = int_of(eval(e.args[0]));
        require(Dnf::ge(n));
        return make({Shape::Ref, {}, n, false, -1, "new@" + at(e.loc)});
      }
      case ExprKind::Builtin: return builtin(e);
    }
    return unknown("?", true);
  }

  int builtin(const Expr& e) {
    const std::string& f = e.text;
    if (f == "read_input") return unknown("in@" + at(e.loc), false);
    if (f == "open") {
      eval(e.args[0]);
      return make({Shape::Ref, {}, {}, false, -1, "handle@" + at(e.loc)});
    }
    if (f == "close") {
      deref(eval(e.args[0]));
      return null_;
    }
    if (f == "length") {
      int v = eval(e.args[0]);
      deref(v);
      return make_int(len_of(v));
    }
    if (f == "parseInt") {
      eval(e.args[0]);
      return make_int(LinExpr::var(new_var("parse@" + at(e.loc))));
    }
    if (f == "abs") {
      LinExpr x = int_of(eval(e.args[0]));
      LinExpr v = LinExpr::var(new_var("abs@" + at(e.loc)));
      fact(conj(Dnf::ge(v), disj(Dnf::eq(v - x), Dnf::eq(v + x))));
      return make_int(v);
    }
    for (const auto& a : e.args) eval(a);
    note("call of " + f);
    return unknown(f + "@" + at(e.loc), true);
  }

  void havoc_globals() {
    for (auto& [name, slot] : globals_) slots_[static_cast<std::size_t>(slot)] = unknown(name, true);
  }

  void exec(const PathStep& st, const Stmt& s) {
    loc_ = s.loc;
    switch (s.kind) {
      case StmtKind::VarDecl: {
        int v = s.value ? eval(*s.value) : null_;
        int slot = new_slot(v);
        if (frame_ < 0) {
          globals_[s.name] = slot;
        } else {
          envs_[frame_][s.name] = slot;
        }
        return;
      }
      case StmtKind::Assign: {
        int v = eval(*s.value);
        const Expr& t = *s.target;
        if (t.kind == ExprKind::Var) {
          slots_[static_cast<std::size_t>(slot_of(t.text))] = v;
        } else {
          int base = eval(t.args[0]);
          deref(base);
          index_check(base, int_of(eval(t.args[1])));
        }
        return;
      }
      case StmtKind::If:
      case StmtKind::While: {
        Dnf c = cond(*s.value);
        add_piece(st.branch.value_or(true) ? c : negate(c));
        return;
      }
      case StmtKind::Return:
        if (s.value) eval(*s.value);
        return;
      case StmtKind::Call:
      case StmtKind::Spawn: break;
    }
    if (s.value) {
      eval(*s.value);
      return;
    }
    const Procedure* callee = ctx_.program().find_procedure(s.name);
    if (s.kind == StmtKind::Call && callee && st.callee_frame >= 0) {
      auto& env = envs_[st.callee_frame];
      for (std::size_t i = 0; i < callee->params.size() && i < s.args.size(); ++i) {
        const auto& p = callee->params[i];
        const Expr& a = s.args[i];
        if (p.by_ref && a.kind == ExprKind::Var) {
          env[p.name] = slot_of(a.text);
        } else {
          env[p.name] = new_slot(eval(a));
        }
      }
      return;
    }
    for (std::size_t i = 0; i < s.args.size(); ++i) {
      const Expr& a = s.args[i];
      eval(a);
      bool by_ref = callee && i < callee->params.size() && callee->params[i].by_ref;
      if (by_ref && a.kind == ExprKind::Var)
        slots_[static_cast<std::size_t>(slot_of(a.text))] = unknown(a.text, true);
    }
    // The other thread of a race is walked explicitly.
    if (s.kind == StmtKind::Call || ctx_.kind() != BugKind::RACE) havoc_globals();
  }

  Dnf bug_condition(const PathStep& step, const Stmt& s) {
    loc_ = s.loc;
    switch (ctx_.kind()) {
      case BugKind::NFE:
      case BugKind::LEAK: {
        exec(step, s);
        return Dnf::truth();
      }
      case BugKind::NPD:
      case BugKind::RACE: collect_null_ = true; break;
      case BugKind::AIO: collect_oob_ = true; break;
    }
    fault_ = Dnf::falsity();
    fault_site_ = false;
    PathStep plain{s.id, std::nullopt, frame_, -1};
    Stmt copy = s;
    // Nested bodies are not part of the boxed statement.
    copy.then_body.clear();
    copy.else_body.clear();
    if (s.kind == StmtKind::If || s.kind == StmtKind::While) {
      cond(*s.value);
    } else {
      exec(plain, copy);
    }
    collect_null_ = collect_oob_ = false;
    return fault_site_ ? fault_ : Dnf::truth();
  }
};

}  // namespace

Feasibility check_path(const SliceContext& ctx, const PathCandidate& path) {
  return Executor(ctx).run(path);
}

}  // namespace metabug::explain
