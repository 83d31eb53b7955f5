#include "metabug/synthgen/interpreter.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <set>

#include "metabug/minilang/builtins.hpp"

namespace metabug::synthgen {

using minilang::Expr;
using minilang::ExprKind;
using minilang::Procedure;
using minilang::Program;
using minilang::Stmt;
using minilang::StmtKind;

const char* to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Ok: return "ok";
    case OutcomeKind::NullDeref: return "null-deref";
    case OutcomeKind::IndexOob: return "index-oob";
    case OutcomeKind::ParseFail: return "parse-fail";
    case OutcomeKind::Leak: return "leak";
    case OutcomeKind::RaceWindow: return "race-window";
    case OutcomeKind::RuntimeError: return "runtime-error";
  }
  return "?";
}

std::string Outcome::describe() const {
  std::string s = to_string(kind);
  if (at != kNoNode) s += "@" + std::to_string(at);
  if (other != kNoNode) s += "," + std::to_string(other);
  if (!detail.empty()) s += " (" + detail + ")";
  return s;
}

bool reproduces(const Outcome& got, const Outcome& want) {
  return got.kind == want.kind && got.at == want.at;
}

namespace {

struct HandleV {
  int id;
};
using ArrayV = std::shared_ptr<std::vector<std::int64_t>>;
using Value = std::variant<std::monostate, std::int64_t, std::string, HandleV, ArrayV>;

struct Cell {
  Value v;
  bool defined = false;
  NodeId writer = kNoNode;
  int writer_thread = -1;
  bool from_global_decl = false;
};
using CellPtr = std::shared_ptr<Cell>;

struct Fault {
  OutcomeKind kind;
  std::string detail;
  NodeId writer = kNoNode;
};
struct EarlyExit {};

constexpr std::int64_t kMaxArray = 1 << 20;

bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

std::int64_t as_int(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw Fault{OutcomeKind::RuntimeError, "integer expected"};
}

bool truthy(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i != 0;
  return !is_null(v);
}

bool values_equal(const Value& a, const Value& b) {
  if (a.index() != b.index()) return false;
  switch (a.index()) {
    case 0: return true;
    case 1: return std::get<1>(a) == std::get<1>(b);
    case 2: return std::get<2>(a) == std::get<2>(b);
    case 3: return std::get<3>(a).id == std::get<3>(b).id;
    default: return std::get<4>(a) == std::get<4>(b);
  }
}

bool parse_numeral(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  std::size_t i = s[0] == '-' ? 1 : 0;
  if (i == s.size() || s.size() > 18) return false;
  for (std::size_t k = i; k < s.size(); ++k)
    if (s[k] < '0' || s[k] > '9') return false;
  out = std::stoll(s);
  return true;
}

std::int64_t wrap(__int128 v) { return static_cast<std::int64_t>(static_cast<std::uint64_t>(v)); }

/// Expression semantics shared by the interpreter and the trace replayer.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  Value eval(const Expr& e) {
    switch (e.kind) {
      case ExprKind::IntLit: return e.int_value;
      case ExprKind::StrLit: return e.text;
      case ExprKind::Null: return std::monostate{};
      case ExprKind::Var: return read_var(e.text);
      case ExprKind::Index: {
        Value base = deref(e.args[0]);
        std::int64_t i = as_int(eval(e.args[1]));
        auto arr = as_array(base);
        if (i < 0 || i >= static_cast<std::int64_t>(arr->size()))
          throw Fault{OutcomeKind::IndexOob, "index " + std::to_string(i) + " of length " +
                                                 std::to_string(arr->size())};
        return (*arr)[static_cast<std::size_t>(i)];
      }
      case ExprKind::Binary: return binary(e);
      case ExprKind::Unary: {
        Value v = eval(e.args[0]);
        if (e.text == "!") return std::int64_t{truthy(v) ? 0 : 1};
        return wrap(-static_cast<__int128>(as_int(v)));
      }
      case ExprKind::Builtin: return builtin(e);
      case ExprKind::NewArray: {
        std::int64_t n = as_int(eval(e.args[0]));
        if (n < 0 || n > kMaxArray) throw Fault{OutcomeKind::RuntimeError, "bad array length"};
        return std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(n), 0);
      }
    }
    throw Fault{OutcomeKind::RuntimeError, "unknown expression"};
  }

  /// Performs `target := value` for a Var or Index lvalue.
  void assign(const Expr& target, const Value& v) {
    if (target.kind == ExprKind::Var) {
      CellPtr c = write_cell(target.text);
      c->v = v;
      stamp(*c);
      return;
    }
    Value base = deref(target.args[0]);
    std::int64_t i = as_int(eval(target.args[1]));
    auto arr = as_array(base);
    if (i < 0 || i >= static_cast<std::int64_t>(arr->size()))
      throw Fault{OutcomeKind::IndexOob,
                  "index " + std::to_string(i) + " of length " + std::to_string(arr->size())};
    (*arr)[static_cast<std::size_t>(i)] = as_int(v);
  }

  void stamp(Cell& c) {
    c.defined = true;
    c.writer = current_stmt_;
    c.writer_thread = current_thread_;
    c.from_global_decl = in_global_decl_;
  }

 protected:
  NodeId current_stmt_ = kNoNode;
  int current_thread_ = 0;
  bool in_global_decl_ = false;
  struct HandleState {
    NodeId open_stmt;
    bool open;
  };
  std::vector<HandleState> handles_;
  std::map<NodeId, std::size_t> read_pos_, open_pos_;
  const ProgramInput* input_ = nullptr;

  /// Cell for reading; nullptr when the variable has no value yet.
  virtual CellPtr find_cell(const std::string& name) = 0;
  /// Cell for writing, created on demand.
  virtual CellPtr write_cell(const std::string& name) = 0;

  Value read_var(const std::string& name) {
    CellPtr c = find_cell(name);
    if (!c || !c->defined) throw Fault{OutcomeKind::RuntimeError, "undefined variable " + name};
    return c->v;
  }

  // Evaluates an operand of a null-strict operation.
  Value deref(const Expr& e) {
    Value v = eval(e);
    if (!is_null(v)) return v;
    if (e.kind == ExprKind::Var) {
      CellPtr c = find_cell(e.text);
      if (c && c->writer != kNoNode && !c->from_global_decl && c->writer_thread != current_thread_)
        throw Fault{OutcomeKind::RaceWindow, "null written concurrently to " + e.text, c->writer};
    }
    throw Fault{OutcomeKind::NullDeref, "null dereference"};
  }

  static ArrayV as_array(const Value& v) {
    if (auto* a = std::get_if<ArrayV>(&v)) return *a;
    throw Fault{OutcomeKind::RuntimeError, "array expected"};
  }

  Value binary(const Expr& e) {
    const std::string& op = e.text;
    if (op == "&&") {
      if (!truthy(eval(e.args[0]))) return std::int64_t{0};
      return std::int64_t{truthy(eval(e.args[1])) ? 1 : 0};
    }
    if (op == "||") {
      if (truthy(eval(e.args[0]))) return std::int64_t{1};
      return std::int64_t{truthy(eval(e.args[1])) ? 1 : 0};
    }
    Value a = eval(e.args[0]);
    Value b = eval(e.args[1]);
    if (op == "==") return std::int64_t{values_equal(a, b) ? 1 : 0};
    if (op == "!=") return std::int64_t{values_equal(a, b) ? 0 : 1};
    std::int64_t x = as_int(a), y = as_int(b);
    if (op == "<") return std::int64_t{x < y};
    if (op == "<=") return std::int64_t{x <= y};
    if (op == ">") return std::int64_t{x > y};
    if (op == ">=") return std::int64_t{x >= y};
    if (op == "+") return wrap(static_cast<__int128>(x) + y);
    if (op == "-") return wrap(static_cast<__int128>(x) - y);
    if (op == "*") return wrap(static_cast<__int128>(x) * y);
    if (y == 0) throw Fault{OutcomeKind::RuntimeError, "division by zero"};
    if (x == INT64_MIN && y == -1) return op == "/" ? x : 0;
    if (op == "/") return x / y;
    return x % y;
  }

  Value builtin(const Expr& e) {
    const std::string& f = e.text;
    if (f == "read_input") {
      std::size_t& pos = read_pos_[e.id];
      auto it = input_->reads.find(e.id);
      if (it == input_->reads.end() || pos >= it->second.size()) return std::int64_t{0};
      const InputValue& iv = it->second[pos++];
      if (auto* i = std::get_if<std::int64_t>(&iv)) return *i;
      return std::get<std::string>(iv);
    }
    if (f == "open") {
      eval(e.args[0]);
      std::size_t& pos = open_pos_[e.id];
      auto it = input_->open_fails.find(e.id);
      bool fails = it != input_->open_fails.end() && pos < it->second.size() && it->second[pos];
      ++pos;
      if (fails) throw EarlyExit{};
      handles_.push_back({current_stmt_, true});
      return HandleV{static_cast<int>(handles_.size()) - 1};
    }
    if (f == "close") {
      Value h = deref(e.args[0]);
      auto* hv = std::get_if<HandleV>(&h);
      if (!hv) throw Fault{OutcomeKind::RuntimeError, "handle expected"};
      handles_[static_cast<std::size_t>(hv->id)].open = false;
      return std::monostate{};
    }
    if (f == "length") {
      Value v = deref(e.args[0]);
      if (auto* a = std::get_if<ArrayV>(&v)) return static_cast<std::int64_t>((*a)->size());
      if (auto* s = std::get_if<std::string>(&v)) return static_cast<std::int64_t>(s->size());
      throw Fault{OutcomeKind::RuntimeError, "length of non-sequence"};
    }
    if (f == "parseInt") {
      Value v = eval(e.args[0]);
      auto* s = std::get_if<std::string>(&v);
      if (!s) throw Fault{OutcomeKind::RuntimeError, "string expected"};
      std::int64_t out;
      if (!parse_numeral(*s, out))
        throw Fault{OutcomeKind::ParseFail, "cannot parse \"" + *s + "\""};
      return out;
    }
    if (f == "abs") {
      std::int64_t x = as_int(eval(e.args[0]));
      return x < 0 ? wrap(-static_cast<__int128>(x)) : x;
    }
    throw Fault{OutcomeKind::RuntimeError, "unknown builtin " + f};
  }

  Outcome leak_outcome() const {
    for (const auto& h : handles_)
      if (h.open) return Outcome{OutcomeKind::Leak, h.open_stmt, kNoNode, "handle never closed"};
    return Outcome{};
  }

  Outcome fault_outcome(const Fault& f) const {
    Outcome o;
    o.kind = f.kind;
    o.at = current_stmt_;
    o.detail = f.detail;
    if (f.kind == OutcomeKind::RaceWindow) o.other = f.writer;
    return o;
  }
};

std::set<std::string> locals_of(const Procedure& proc) {
  std::set<std::string> out;
  for (const auto& p : proc.params) out.insert(p.name);
  minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
    if (s.kind == StmtKind::VarDecl) out.insert(s.name);
  });
  return out;
}

bool is_user_call(const Stmt& s) {
  return (s.kind == StmtKind::Call && !s.value) || s.kind == StmtKind::Spawn;
}

// ---------------------------------------------------------------------------

class Machine : public Evaluator {
 public:
  Machine(const Program& p, const ProgramInput& in, std::size_t budget) : prog_(p), budget_(budget) {
    input_ = &in;
    for (const auto& proc : p.procedures) locals_[&proc] = locals_of(proc);
  }

  Execution run() {
    Execution ex;
    in_global_decl_ = true;
    for (const auto& g : prog_.globals) {
      current_stmt_ = g.id;
      ex.trace.push_back(g.id);
      try {
        Value v = g.value ? eval(*g.value) : Value{};
        CellPtr& c = globals_[g.name];
        if (!c) c = std::make_shared<Cell>();
        c->v = v;
        stamp(*c);
      } catch (const Fault& f) {
        ex.outcome = fault_outcome(f);
        return ex;
      } catch (const EarlyExit&) {
        ex.outcome = Outcome{OutcomeKind::RuntimeError, g.id, kNoNode, "open failed in global"};
        return ex;
      }
    }
    in_global_decl_ = false;
    const Procedure* main = prog_.find_procedure(prog_.entry);
    threads_.push_back(Thread{0, {}});
    threads_.back().frames.push_back(make_frame(main));

    std::size_t steps = 0, sched = 0;
    while (true) {
      std::vector<std::size_t> live;
      for (std::size_t t = 0; t < threads_.size(); ++t) {
        normalize(threads_[t]);
        if (!threads_[t].frames.empty()) live.push_back(t);
      }
      if (live.empty()) break;
      std::size_t pick = live.front();
      if (sched < input_->schedule.size()) {
        int s = input_->schedule[sched++];
        pick = live[static_cast<std::size_t>(std::max(s, 0)) % live.size()];
      }
      if (steps++ >= budget_) throw StepBudgetExceeded();
      current_thread_ = threads_[pick].id;
      if (auto out = step(pick, ex.trace)) {
        ex.outcome = *out;
        return ex;
      }
    }
    ex.outcome = leak_outcome();
    return ex;
  }

 private:
  struct Cursor {
    const std::vector<Stmt>* block;
    std::size_t idx;
  };
  struct Frame {
    const Procedure* proc;
    std::map<std::string, CellPtr> env;
    std::vector<Cursor> cursors;
  };
  struct Thread {
    int id;
    std::vector<Frame> frames;
  };

  const Program& prog_;
  std::size_t budget_;
  std::map<const Procedure*, std::set<std::string>> locals_;
  std::map<std::string, CellPtr> globals_;
  std::vector<Thread> threads_;
  std::size_t active_ = 0;

  Frame make_frame(const Procedure* proc) {
    Frame f;
    f.proc = proc;
    f.cursors.push_back({&proc->body, 0});
    return f;
  }

  static void normalize(Thread& t) {
    while (!t.frames.empty()) {
      Frame& f = t.frames.back();
      while (!f.cursors.empty() && f.cursors.back().idx >= f.cursors.back().block->size())
        f.cursors.pop_back();
      if (!f.cursors.empty()) return;
      t.frames.pop_back();
    }
  }

  Frame& frame() { return threads_[active_].frames.back(); }

  CellPtr find_cell(const std::string& name) override {
    Frame& f = frame();
    if (locals_.at(f.proc).count(name)) {
      auto it = f.env.find(name);
      return it == f.env.end() ? nullptr : it->second;
    }
    auto it = globals_.find(name);
    return it == globals_.end() ? nullptr : it->second;
  }

  CellPtr write_cell(const std::string& name) override {
    Frame& f = frame();
    auto& slot = locals_.at(f.proc).count(name) ? f.env[name] : globals_[name];
    if (!slot) slot = std::make_shared<Cell>();
    return slot;
  }

  // Binds a callee frame's parameters from the call's arguments.
  Frame bind_call(const Stmt& s, int thread) {
    const Procedure* callee = prog_.find_procedure(s.name);
    Frame nf = make_frame(callee);
    for (std::size_t i = 0; i < s.args.size(); ++i) {
      const auto& param = callee->params[i];
      if (param.by_ref) {
        nf.env[param.name] = write_cell(s.args[i].text);
      } else {
        auto c = std::make_shared<Cell>();
        c->v = eval(s.args[i]);
        stamp(*c);
        c->writer_thread = thread;
        nf.env[param.name] = c;
      }
    }
    return nf;
  }

  std::optional<Outcome> step(std::size_t t, std::vector<NodeId>& trace) {
    active_ = t;
    Frame& f = frame();
    Cursor& cur = f.cursors.back();
    const Stmt& s = (*cur.block)[cur.idx];
    current_stmt_ = s.id;
    trace.push_back(s.id);
    try {
      switch (s.kind) {
        case StmtKind::VarDecl:
        case StmtKind::Assign: {
          Value v = eval(*s.value);
          assign(*s.target, v);
          ++cur.idx;
          break;
        }
        case StmtKind::If: {
          bool c = truthy(eval(*s.value));
          ++cur.idx;
          const auto& body = c ? s.then_body : s.else_body;
          if (!body.empty()) f.cursors.push_back({&body, 0});
          break;
        }
        case StmtKind::While: {
          if (truthy(eval(*s.value))) {
            if (!s.then_body.empty()) f.cursors.push_back({&s.then_body, 0});
          } else {
            ++cur.idx;
          }
          break;
        }
        case StmtKind::Call:
          if (s.value) {
            eval(*s.value);
            ++cur.idx;
          } else {
            Frame nf = bind_call(s, threads_[t].id);
            ++cur.idx;
            threads_[t].frames.push_back(std::move(nf));
          }
          break;
        case StmtKind::Spawn: {
          Frame nf = bind_call(s, static_cast<int>(threads_.size()));
          ++cur.idx;
          Thread th{static_cast<int>(threads_.size()), {}};
          th.frames.push_back(std::move(nf));
          threads_.push_back(std::move(th));
          break;
        }
        case StmtKind::Return:
          if (s.value) eval(*s.value);
          threads_[t].frames.pop_back();
          break;
      }
    } catch (const Fault& fault) {
      return fault_outcome(fault);
    } catch (const EarlyExit&) {
      threads_[t].frames.pop_back();
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------

class Replayer : public Evaluator {
 public:
  Replayer(const Program& p, const ProgramInput& in) : prog_(p) {
    input_ = &in;
    for (const auto& proc : p.procedures) {
      locals_[proc.name] = locals_of(proc);
      minilang::for_each_stmt(proc.body, [&](const Stmt& s) { where_[s.id] = {&s, &proc}; });
    }
    for (const auto& g : p.globals) where_[g.id] = {&g, nullptr};
    // Threads are static here: a spawn target and everything it calls run on
    // their own thread, the rest on main's.
    int next_thread = 1;
    minilang::for_each_stmt(p, [&](const Stmt& s) {
      if (s.kind == StmtKind::Spawn && !thread_of_.count(s.name)) mark_thread(s.name, next_thread++);
    });
  }

  Outcome run(const std::vector<NodeId>& trace) {
    for (NodeId id : trace) {
      auto it = where_.find(id);
      if (it == where_.end()) return Outcome{OutcomeKind::RuntimeError, id, kNoNode, "unknown statement"};
      const Stmt& s = *it->second.first;
      proc_ = it->second.second;
      current_stmt_ = s.id;
      current_thread_ = proc_ ? thread_of(proc_->name) : 0;
      in_global_decl_ = proc_ == nullptr;
      try {
        exec(s);
      } catch (const Fault& f) {
        return fault_outcome(f);
      } catch (const EarlyExit&) {
        // The statement is abandoned; the replay continues with the next one.
      }
    }
    return leak_outcome();
  }

 private:
  const Program& prog_;
  std::map<NodeId, std::pair<const Stmt*, const Procedure*>> where_;
  std::map<std::string, std::set<std::string>> locals_;
  std::map<std::string, std::map<std::string, CellPtr>> env_;
  std::map<std::string, CellPtr> globals_;
  std::map<std::string, int> thread_of_;
  const Procedure* proc_ = nullptr;

  void mark_thread(const std::string& proc, int thread) {
    if (thread_of_.count(proc)) return;
    thread_of_[proc] = thread;
    const Procedure* p = prog_.find_procedure(proc);
    if (!p) return;
    minilang::for_each_stmt(p->body, [&](const Stmt& s) {
      if (s.kind == StmtKind::Call && !s.value) mark_thread(s.name, thread);
    });
  }

  int thread_of(const std::string& proc) const {
    auto it = thread_of_.find(proc);
    return it == thread_of_.end() ? 0 : it->second;
  }

  CellPtr& slot(const std::string& proc, const std::string& name) {
    if (locals_.at(proc).count(name)) return env_[proc][name];
    return globals_[name];
  }

  CellPtr find_cell(const std::string& name) override {
    if (!proc_) {
      auto it = globals_.find(name);
      return it == globals_.end() ? nullptr : it->second;
    }
    return slot(proc_->name, name);
  }

  CellPtr write_cell(const std::string& name) override {
    CellPtr& c = proc_ ? slot(proc_->name, name) : globals_[name];
    if (!c) c = std::make_shared<Cell>();
    return c;
  }

  void exec(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::VarDecl:
      case StmtKind::Assign: {
        Value v = s.value ? eval(*s.value) : Value{};
        assign(*s.target, v);
        break;
      }
      case StmtKind::If:
      case StmtKind::While:
        eval(*s.value);
        break;
      case StmtKind::Return:
        if (s.value) eval(*s.value);
        break;
      case StmtKind::Call:
      case StmtKind::Spawn:
        if (s.value) {
          eval(*s.value);
          break;
        }
        bind(s);
        break;
    }
  }

  void bind(const Stmt& s) {
    const Procedure* callee = prog_.find_procedure(s.name);
    for (std::size_t i = 0; i < s.args.size(); ++i) {
      const auto& param = callee->params[i];
      if (param.by_ref) {
        env_[callee->name][param.name] = write_cell(s.args[i].text);
      } else {
        auto c = std::make_shared<Cell>();
        c->v = eval(s.args[i]);
        c->defined = true;
        c->writer = s.id;
        c->writer_thread = thread_of(callee->name);
        env_[callee->name][param.name] = c;
      }
    }
  }
};

}  // namespace

Execution interpret(const Program& program, const ProgramInput& input, std::size_t step_budget) {
  return Machine(program, input, step_budget).run();
}

Outcome execute_trace(const Program& program, const std::vector<NodeId>& trace,
                      const ProgramInput& input) {
  return Replayer(program, input).run(trace);
}

std::vector<NodeId> minimize_trace(const Program& program, const std::vector<NodeId>& trace,
                                   const ProgramInput& input, const Outcome& target) {
  std::vector<NodeId> cur = trace;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < cur.size();) {
      std::vector<NodeId> cand = cur;
      cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(i));
      if (reproduces(execute_trace(program, cand, input), target)) {
        cur = std::move(cand);
        changed = true;
      } else {
        ++i;
      }
    }
  }
  return cur;
}

}  // namespace metabug::synthgen
