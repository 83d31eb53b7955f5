#include "metabug/synthgen/generator.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "metabug/minilang/parser.hpp"

namespace metabug::synthgen {

using minilang::Expr;
using minilang::ExprKind;
using minilang::Program;
using minilang::Stmt;
using minilang::StmtKind;
using util::Rng;

const char* to_string(GroupKind k) {
  switch (k) {
    case GroupKind::NpdOrder: return "npd-order";
    case GroupKind::NpdMissingCheck: return "npd-missing-check";
    case GroupKind::AioOffByOne: return "aio-off-by-one";
    case GroupKind::NfeMissingGuard: return "nfe-missing-guard";
    case GroupKind::LeakMisplacedClose: return "leak-misplaced-close";
    case GroupKind::RaceUnguardedWrite: return "race-unguarded-write";
  }
  return "?";
}

GroupKind parse_group_kind(std::string_view name) {
  for (GroupKind k : kAllGroupKinds)
    if (name == to_string(k)) return k;
  throw InvalidConfig("unknown group kind '" + std::string(name) + "'");
}

BugKind bug_kind_of(GroupKind k) {
  switch (k) {
    case GroupKind::NpdOrder:
    case GroupKind::NpdMissingCheck: return BugKind::NPD;
    case GroupKind::AioOffByOne: return BugKind::AIO;
    case GroupKind::NfeMissingGuard: return BugKind::NFE;
    case GroupKind::LeakMisplacedClose: return BugKind::LEAK;
    case GroupKind::RaceUnguardedWrite: return BugKind::RACE;
  }
  return BugKind::NPD;
}

namespace {

using Item = std::vector<std::string>;

struct ProcSpec {
  std::string signature;
  std::vector<Item> items;
  bool noise_ok = false;
};

struct Anchor {
  std::string proc;
  std::string header;
};

struct Spec {
  std::vector<std::string> globals;
  std::vector<ProcSpec> procs;  // main last
  std::optional<Anchor> point;
  std::optional<Anchor> access;
  std::vector<std::pair<Anchor, InputValue>> reads;
  std::vector<Anchor> failing_opens;
};

std::string pick_name(Rng& r, const std::vector<std::string>& pool) { return r.pick(pool); }

std::string lit(Rng& r, int lo, int hi) { return std::to_string(r.range(lo, hi)); }

ProcSpec& main_of(Spec& s) { return s.procs.back(); }

Spec npd_template(Rng& r, bool buggy, bool order) {
  std::string k = pick_name(r, {"k", "key", "count", "num", "size"});
  std::string a = pick_name(r, {"a", "buf", "data", "arr", "items"});
  std::string n = pick_name(r, {"n", "len", "width", "sz"});
  std::string cond = r.pick(std::vector<std::string>{k + " > 0", k + " >= 1", "0 < " + k});
  std::vector<Item> items;
  Item read = {"var " + k + " := read_input();"};
  Item init = {"var " + a + " := null;"};
  if (r.chance(0.5)) {
    items = {read, init};
  } else {
    items = {init, read};
  }
  std::string len = k;
  if (r.chance(0.3)) {
    std::string m = pick_name(r, {"m", "cap"});
    items.push_back({"var " + m + " := " + k + " + 1;"});
    len = m;
  } else {
    len = r.pick(std::vector<std::string>{k, k + " + 1", k + " * 2"});
  }
  items.push_back({"if (" + cond + ") {", a + " := new[" + len + "];", "}"});
  std::string deref = n + " := length(" + a + ");";
  std::string store = a + "[0] := " + r.pick(std::vector<std::string>{"1", n}) + ";";
  std::string check = r.chance(0.8) ? "if (" + a + " != null) {" : "if (null != " + a + ") {";
  Spec s;
  if (buggy) {
    items.push_back({"var " + deref});
    if (order) items.push_back({check, store, "}"});
  } else {
    items.push_back({"var " + n + " := 0;"});
    if (order) {
      items.push_back({check, deref, store, "}"});
    } else {
      items.push_back({check, deref, "}"});
    }
  }
  if (r.chance(0.4)) items.push_back({n + " := " + n + " + 1;"});
  s.procs.push_back({"proc main()", items, true});
  s.point = Anchor{"main", buggy ? "var " + deref : deref};
  s.reads.push_back({Anchor{"main", "var " + k + " := read_input();"}, std::int64_t{0}});
  return s;
}

Spec aio_template(Rng& r, bool buggy) {
  std::string n = pick_name(r, {"n", "size", "count", "num"});
  std::string a = pick_name(r, {"a", "buf", "vals", "arr"});
  std::string i = pick_name(r, {"i", "j", "pos", "idx"});
  std::vector<Item> items;
  items.push_back({"var " + n + " := read_input();"});
  items.push_back({"var " + a + " := new[" +
                   r.pick(std::vector<std::string>{"abs(" + n + ")", "abs(" + n + ") + 1"}) + "];"});
  items.push_back({"var " + i + " := 0;"});
  std::string bound = "length(" + a + ")";
  if (r.chance(0.4)) {
    std::string len = pick_name(r, {"len", "lim"});
    items.push_back({"var " + len + " := length(" + a + ");"});
    bound = len;
  }
  std::string body = r.pick(std::vector<std::string>{a + "[" + i + "] := " + i + ";",
                                                     a + "[" + i + "] := " + i + " * 2;",
                                                     a + "[" + i + "] := 0;"});
  std::string op = buggy ? " <= " : " < ";
  items.push_back({"while (" + i + op + bound + ") {", body, i + " := " + i + " + 1;", "}"});
  if (r.chance(0.3)) items.push_back({"var last := " + i + ";"});
  Spec s;
  s.procs.push_back({"proc main()", items, true});
  s.point = Anchor{"main", body};
  s.reads.push_back({Anchor{"main", "var " + n + " := read_input();"}, std::int64_t{0}});
  return s;
}

Spec nfe_template(Rng& r, bool buggy) {
  std::string str = pick_name(r, {"s", "text", "str", "input"});
  std::string v = pick_name(r, {"v", "val", "num", "parsed"});
  std::vector<Item> items;
  items.push_back({"var " + str + " := read_input();"});
  items.push_back({"var " + v + " := " + lit(r, 0, 2) + ";"});
  std::string guard = r.pick(std::vector<std::string>{"length(" + str + ") > 0",
                                                      "length(" + str + ") != 0",
                                                      "0 < length(" + str + ")"});
  std::string parse = v + " := parseInt(" + str + ");";
  if (buggy) {
    items.push_back({parse});
  } else {
    items.push_back({"if (" + guard + ") {", parse, "}"});
  }
  if (r.chance(0.5))
    items.push_back({v + " := " + v + r.pick(std::vector<std::string>{" + 1;", " * 2;"})});
  Spec s;
  s.procs.push_back({"proc main()", items, true});
  s.point = Anchor{"main", parse};
  s.reads.push_back({Anchor{"main", "var " + str + " := read_input();"}, std::string()});
  return s;
}

Spec leak_template(Rng& r, bool buggy) {
  std::string p = pick_name(r, {"p", "path", "name", "fname"});
  std::string q = pick_name(r, {"q", "path2", "other", "dst"});
  std::string h = pick_name(r, {"h", "zis", "fh", "src"});
  std::string g = pick_name(r, {"g", "out", "fh2", "zos"});
  auto close_of = [&](const std::string& x) {
    std::string check = r.chance(0.8) ? "if (" + x + " != null) {" : "if (null != " + x + ") {";
    return Item{check, "close(" + x + ");", "}"};
  };
  Item read_p = {"var " + p + " := read_input();"};
  Item open_h = {"var " + h + " := open(" + p + ");"};
  Item read_q = {"var " + q + " := read_input();"};
  Item open_g = {"var " + g + " := open(" + q + ");"};
  Item close_h = close_of(h);
  Item close_g = close_of(g);
  std::vector<Item> items;
  if (buggy) {
    items = {read_p, open_h, read_q, open_g};
    if (r.chance(0.5)) {
      items.push_back(close_h);
      items.push_back(close_g);
    } else {
      items.push_back(close_g);
      items.push_back(close_h);
    }
  } else {
    items = {read_p, open_h, close_h, read_q, open_g, close_g};
  }
  if (r.chance(0.5)) {
    auto at = std::find(items.begin(), items.end(), read_q);
    items.erase(at);
    items.insert(items.begin() + 1, read_q);
  }
  Spec s;
  s.procs.push_back({"proc main()", items, true});
  s.point = Anchor{"main", "var " + h + " := open(" + p + ");"};
  s.failing_opens.push_back(Anchor{"main", "var " + g + " := open(" + q + ");"});
  return s;
}

Spec race_template(Rng& r, bool buggy) {
  std::string g = pick_name(r, {"g", "shared", "cur", "obj"});
  std::string t = pick_name(r, {"t", "fresh", "nv", "next"});
  std::string mode = pick_name(r, {"mode", "flag", "sel"});
  std::string n = pick_name(r, {"n", "len", "sz"});
  std::string worker = pick_name(r, {"worker", "producer", "updater"});
  Spec s;
  s.globals.push_back("global " + g + " := null;");
  std::vector<Item> w;
  w.push_back({"var " + mode + " := read_input();"});
  w.push_back({"var " + t + " := null;"});
  std::string cond = r.pick(std::vector<std::string>{mode + " > 0", mode + " >= 1"});
  w.push_back({"if (" + cond + ") {", t + " := new[" + lit(r, 2, 3) + "];", "}"});
  std::string write = g + " := " + t + ";";
  if (buggy) {
    w.push_back({write});
  } else {
    w.push_back({"if (" + t + " != null) {", write, "}"});
  }
  s.procs.push_back({"proc " + worker + "()", w, false});
  std::string access = r.chance(0.7) ? "var " + n + " := length(" + g + ");"
                                     : "var " + n + " := " + g + "[0];";
  std::vector<Item> m;
  m.push_back({g + " := new[" + lit(r, 4, 6) + "];"});
  m.push_back({"spawn " + worker + "();"});
  m.push_back({"if (" + g + " != null) {", access, "}"});
  s.procs.push_back({"proc main()", m, true});
  s.point = Anchor{worker, write};
  s.access = Anchor{"main", access};
  s.reads.push_back({Anchor{worker, "var " + mode + " := read_input();"}, std::int64_t{0}});
  return s;
}

Spec noise_template(GroupKind kind) {
  Spec s;
  std::vector<Item> items;
  switch (bug_kind_of(kind)) {
    case BugKind::NPD:
      items = {{"var k := read_input();"}, {"var a := new[abs(k) + 1];"}, {"var n := length(a);"}};
      break;
    case BugKind::AIO:
      items = {{"var n := read_input();"},
               {"var s := 0;"},
               {"var i := 0;"},
               {"while (i < abs(n)) {", "s := s + i;", "i := i + 1;", "}"}};
      break;
    case BugKind::NFE:
      items = {{"var s := read_input();"}, {"var v := s + 1;"}};
      break;
    case BugKind::LEAK:
      items = {{"var p := read_input();"}, {"var q := p * 2;"}};
      break;
    case BugKind::RACE:
      s.globals.push_back("global g := 0;");
      s.procs.push_back({"proc worker()", {{"var t := 1;"}}, false});
      items = {{"g := 1;"}, {"spawn worker();"}, {"var n := g + 1;"}};
      break;
  }
  s.procs.push_back({"proc main()", items, true});
  return s;
}

Item noise_item(Rng& r, const std::string& v, bool& uses_bump) {
  switch (r.below(5)) {
    case 0: return {"var " + v + " := " + lit(r, 0, 5) + ";", v + " := " + v + " + " + lit(r, 1, 3) + ";"};
    case 1:
      return {"var " + v + " := read_input();", "if (" + v + " > " + lit(r, 0, 3) + ") {",
              v + " := " + v + " - 1;", "}"};
    case 2:
      return {"var " + v + " := 0;", "while (" + v + " < " + lit(r, 1, 3) + ") {",
              v + " := " + v + " + 1;", "}"};
    case 3:
      uses_bump = true;
      return {"var " + v + " := " + lit(r, 0, 5) + ";", "bump(" + v + ");"};
    default: return {"var " + v + " := " + lit(r, 1, 4) + " * 2;", v + " := " + v + " + 0;"};
  }
}

// Inserts independent no-op computations at random positions of main.
void add_noise(Spec& s, Rng& r) {
  std::vector<std::string> pool = {"acc", "tmp", "cnt", "step", "flag", "w1", "x1", "y1", "z1"};
  r.shuffle(pool);
  int count = static_cast<int>(r.below(4));
  bool uses_bump = false;
  ProcSpec& m = main_of(s);
  for (int i = 0; i < count; ++i) {
    Item it = noise_item(r, pool[static_cast<std::size_t>(i)], uses_bump);
    auto pos = static_cast<std::ptrdiff_t>(r.below(m.items.size() + 1));
    m.items.insert(m.items.begin() + pos, std::move(it));
  }
  if (uses_bump) s.procs.insert(s.procs.begin(), ProcSpec{"proc bump(ref c0: int)", {{"c0 := c0 + 1;"}}, false});
}

std::string render(const Spec& s) {
  std::ostringstream os;
  for (const auto& g : s.globals) os << g << "\n";
  for (const auto& p : s.procs) {
    os << p.signature << " {\n";
    for (const auto& item : p.items)
      for (const auto& line : item) os << line << "\n";
    os << "}\n";
  }
  return os.str();
}

const Stmt* find_by_header(const Program& p, const Anchor& a) {
  const auto* proc = p.find_procedure(a.proc);
  if (!proc) return nullptr;
  const Stmt* found = nullptr;
  minilang::for_each_stmt(proc->body, [&](const Stmt& s) {
    if (!found && minilang::print_stmt_header(s) == a.header) found = &s;
  });
  return found;
}

const Stmt& require(const Program& p, const Anchor& a) {
  const Stmt* s = find_by_header(p, a);
  if (!s) throw std::logic_error("generator anchor not found: " + a.proc + ": " + a.header);
  return *s;
}

NodeId builtin_in(const Stmt& s, const std::string& name) {
  NodeId id = kNoNode;
  minilang::for_each_own_expr(s, [&](const Expr& e) {
    if (id == kNoNode && e.kind == ExprKind::Builtin && e.text == name) id = e.id;
  });
  if (id == kNoNode) throw std::logic_error("no " + name + " call in anchor statement");
  return id;
}

OutcomeKind expected_outcome(BugKind k) {
  switch (k) {
    case BugKind::NPD: return OutcomeKind::NullDeref;
    case BugKind::AIO: return OutcomeKind::IndexOob;
    case BugKind::NFE: return OutcomeKind::ParseFail;
    case BugKind::LEAK: return OutcomeKind::Leak;
    case BugKind::RACE: return OutcomeKind::RaceWindow;
  }
  return OutcomeKind::Ok;
}

bool triggers(const Outcome& o, BugKind kind, NodeId bug_point) {
  if (o.kind != expected_outcome(kind)) return false;
  return kind == BugKind::RACE ? o.other == bug_point : o.at == bug_point;
}

GeneratedProgram realize(const Spec& spec, GroupKind kind, bool buggy) {
  GeneratedProgram out;
  Program parsed = minilang::parse_program(render(spec));
  out.source = minilang::pretty_print(parsed);
  out.program = minilang::parse_program(out.source);
  const Program& p = out.program;
  if (!spec.point) {
    out.noise = true;
    return out;
  }
  out.idiom_point = require(p, *spec.point).id;
  if (!buggy) return out;

  ProgramInput input;
  for (const auto& [anchor, value] : spec.reads)
    input.reads[builtin_in(require(p, anchor), "read_input")].push_back(value);
  for (const auto& anchor : spec.failing_opens)
    input.open_fails[builtin_in(require(p, anchor), "open")].push_back(true);
  BugKind bk = bug_kind_of(kind);
  if (bk == BugKind::RACE) {
    // Run main up to its check, then the whole worker, then main again.
    bool found = false;
    for (int m = 1; m <= 60 && !found; ++m) {
      for (int w = 1; w <= 30 && !found; ++w) {
        ProgramInput trial = input;
        trial.schedule.assign(static_cast<std::size_t>(m), 0);
        trial.schedule.insert(trial.schedule.end(), static_cast<std::size_t>(w), 1);
        if (triggers(interpret(p, trial).outcome, bk, out.idiom_point)) {
          input = trial;
          found = true;
        }
      }
    }
    if (!found) throw std::logic_error("no racing schedule found");
  }
  out.truth = derive_truth(p, bk, input, out.idiom_point);
  return out;
}

GeneratedProgram make_program(GroupKind kind, Rng& r, bool buggy, bool noise) {
  Spec s;
  if (noise) {
    s = noise_template(kind);
  } else {
    switch (kind) {
      case GroupKind::NpdOrder: s = npd_template(r, buggy, true); break;
      case GroupKind::NpdMissingCheck: s = npd_template(r, buggy, false); break;
      case GroupKind::AioOffByOne: s = aio_template(r, buggy); break;
      case GroupKind::NfeMissingGuard: s = nfe_template(r, buggy); break;
      case GroupKind::LeakMisplacedClose: s = leak_template(r, buggy); break;
      case GroupKind::RaceUnguardedWrite: s = race_template(r, buggy); break;
    }
  }
  add_noise(s, r);
  return realize(s, kind, buggy);
}

}  // namespace

GroundTruth derive_truth(const Program& program, BugKind kind, const ProgramInput& input,
                         NodeId bug_point) {
  Execution ex = interpret(program, input);
  if (!triggers(ex.outcome, kind, bug_point))
    throw std::logic_error(std::string("trigger input gives ") + ex.outcome.describe() +
                           ", expected " + to_string(kind) + " at " + std::to_string(bug_point));
  GroundTruth t;
  t.bug_kind = kind;
  t.bug_point = bug_point;
  t.full_trace = ex.trace;
  t.minimal_trace = minimize_trace(program, ex.trace, input, ex.outcome);
  t.trigger_input = input;
  t.outcome = ex.outcome;
  return t;
}

InconsistencyGroup generate_group(GroupKind kind, std::uint64_t seed, int n_buggy, int ratio,
                                  double noise) {
  if (n_buggy < 1) throw InvalidConfig("n_buggy must be at least 1");
  if (ratio < 2) throw InvalidConfig("ratio must be at least 2");
  if (noise < 0 || noise > 1) throw InvalidConfig("noise must be within [0, 1]");
  InconsistencyGroup g;
  g.kind = kind;
  g.seed = seed;
  g.id = std::string(to_string(kind)) + "-" + std::to_string(seed);
  for (int i = 0; i < n_buggy; ++i) {
    Rng r(util::derive_seed(seed, static_cast<std::uint64_t>(i)));
    g.buggy.push_back(make_program(kind, r, true, false));
  }
  for (int j = 0; j < n_buggy * ratio; ++j) {
    Rng r(util::derive_seed(seed, 1000000 + static_cast<std::uint64_t>(j)));
    bool is_noise = r.chance(noise);
    g.correct.push_back(make_program(kind, r, false, is_noise));
  }
  return g;
}

ProgramInput random_input(const Program& program, Rng& rng) {
  // A read is string-typed when the variable it initializes reaches parseInt.
  std::set<std::string> parsed_vars;
  minilang::for_each_stmt(program, [&](const Stmt& s) {
    minilang::for_each_own_expr(s, [&](const Expr& e) {
      if (e.kind == ExprKind::Builtin && e.text == "parseInt" && e.args[0].kind == ExprKind::Var)
        parsed_vars.insert(e.args[0].text);
    });
  });
  ProgramInput in;
  minilang::for_each_stmt(program, [&](const Stmt& s) {
    bool stringy = s.target && s.target->kind == ExprKind::Var && parsed_vars.count(s.target->text);
    minilang::for_each_own_expr(s, [&](const Expr& e) {
      if (e.kind != ExprKind::Builtin) return;
      if (e.text == "read_input") {
        auto& q = in.reads[e.id];
        for (int i = 0; i < 4; ++i) {
          if (stringy) {
            q.push_back(rng.chance(0.3) ? std::string() : std::to_string(rng.range(-3, 99)));
          } else {
            q.push_back(rng.range(-3, 8));
          }
        }
      } else if (e.text == "open") {
        auto& q = in.open_fails[e.id];
        for (int i = 0; i < 4; ++i) q.push_back(rng.chance(0.3));
      }
    });
  });
  std::size_t len = rng.below(41);
  for (std::size_t i = 0; i < len; ++i) in.schedule.push_back(static_cast<int>(rng.below(4)));
  return in;
}

}  // namespace metabug::synthgen
