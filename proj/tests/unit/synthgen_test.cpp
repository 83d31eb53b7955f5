#include <gtest/gtest.h>

#include <algorithm>

#include "metabug/minilang/parser.hpp"
#include "metabug/synthgen/generator.hpp"
#include "metabug/synthgen/interpreter.hpp"

using namespace metabug;
using namespace metabug::synthgen;
using minilang::Expr;
using minilang::ExprKind;
using minilang::parse_program;
using minilang::Program;
using minilang::Stmt;

namespace {

NodeId builtin_site(const Program& p, const std::string& name, int nth = 0) {
  NodeId id = kNoNode;
  int seen = 0;
  minilang::for_each_stmt(p, [&](const Stmt& s) {
    minilang::for_each_own_expr(s, [&](const Expr& e) {
      if (e.kind == ExprKind::Builtin && e.text == name && seen++ == nth) id = e.id;
    });
  });
  return id;
}

bool is_subsequence(const std::vector<NodeId>& sub, const std::vector<NodeId>& full) {
  auto it = full.begin();
  for (NodeId x : sub) {
    it = std::find(it, full.end(), x);
    if (it == full.end()) return false;
    ++it;
  }
  return true;
}

// A map lookup that misses yields null; the lookup result is dereferenced.
const char* kLookupBug = R"(
proc main() {
  var cmd := read_input();
  var handler := null;
  if (cmd == 1) {
    handler := new[4];
  }
  var n := length(handler);
  if (handler != null) {
    handler[0] := n;
  }
}
)";

const char* kLookupCorrect = R"(
proc main() {
  var cmd := read_input();
  var handler := null;
  if (cmd == 1) {
    handler := new[4];
  }
  var n := 0;
  if (handler != null) {
    n := length(handler);
    handler[0] := n;
  }
}
)";

}  // namespace

TEST(Interpreter, MissingLookupDereferencesNull) {
  Program p = parse_program(kLookupBug);
  ProgramInput in;
  in.reads[builtin_site(p, "read_input")] = {std::int64_t{7}};
  Execution ex = interpret(p, in);
  EXPECT_EQ(ex.outcome.kind, OutcomeKind::NullDeref);
  EXPECT_EQ(ex.outcome.at, p.find_procedure("main")->body[3].id);
}

TEST(Interpreter, CorrectLookupUnderSameInputIsOk) {
  Program p = parse_program(kLookupCorrect);
  ProgramInput in;
  in.reads[builtin_site(p, "read_input")] = {std::int64_t{7}};
  EXPECT_EQ(interpret(p, in).outcome.kind, OutcomeKind::Ok);
}

TEST(Interpreter, ZeroBudgetThrows) {
  Program p = parse_program("proc main() { var x := 1; }");
  EXPECT_THROW(interpret(p, {}, 0), StepBudgetExceeded);
}

TEST(Interpreter, NonTerminatingLoopHitsBudget) {
  Program p = parse_program("proc main() { var x := 0; while (x == 0) { x := 0; } }");
  EXPECT_THROW(interpret(p, {}, 500), StepBudgetExceeded);
}

TEST(Interpreter, OutcomeKinds) {
  {
    Program p = parse_program("proc main() { var a := new[2]; a[2] := 1; }");
    EXPECT_EQ(interpret(p, {}).outcome.kind, OutcomeKind::IndexOob);
  }
  {
    Program p = parse_program("proc main() { var s := read_input(); var v := parseInt(s); }");
    ProgramInput in;
    in.reads[builtin_site(p, "read_input")] = {std::string("x1")};
    EXPECT_EQ(interpret(p, in).outcome.kind, OutcomeKind::ParseFail);
    in.reads[builtin_site(p, "read_input")] = {std::string("-12")};
    EXPECT_EQ(interpret(p, in).outcome.kind, OutcomeKind::Ok);
  }
  {
    Program p = parse_program("proc main() { var h := open(\"f\"); }");
    Execution ex = interpret(p, {});
    EXPECT_EQ(ex.outcome.kind, OutcomeKind::Leak);
    EXPECT_EQ(ex.outcome.at, p.find_procedure("main")->body[0].id);
  }
}

TEST(Interpreter, Deterministic) {
  Program p = parse_program(kLookupBug);
  util::Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    ProgramInput in = random_input(p, rng);
    Execution a = interpret(p, in);
    Execution b = interpret(p, in);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.outcome.kind, b.outcome.kind);
  }
}

TEST(Generator, RejectsInvalidConfig) {
  EXPECT_THROW(generate_group(GroupKind::NpdOrder, 1, 0, 10), InvalidConfig);
  EXPECT_THROW(generate_group(GroupKind::NpdOrder, 1, 3, 1), InvalidConfig);
  EXPECT_THROW(parse_group_kind("npd"), InvalidConfig);
  for (GroupKind k : kAllGroupKinds) EXPECT_EQ(parse_group_kind(to_string(k)), k);
}

TEST(Generator, SizesFollowRatio) {
  InconsistencyGroup g = generate_group(GroupKind::NpdOrder, 7, 3, 10);
  EXPECT_EQ(g.buggy.size(), 3u);
  EXPECT_EQ(g.correct.size(), 30u);
}

TEST(Generator, SameSeedIsByteIdentical) {
  for (GroupKind k : kAllGroupKinds) {
    InconsistencyGroup a = generate_group(k, 11, 4, 5);
    InconsistencyGroup b = generate_group(k, 11, 4, 5);
    ASSERT_EQ(a.correct.size(), b.correct.size());
    for (std::size_t i = 0; i < a.buggy.size(); ++i) {
      EXPECT_EQ(a.buggy[i].source, b.buggy[i].source);
      EXPECT_EQ(a.buggy[i].truth->minimal_trace, b.buggy[i].truth->minimal_trace);
      EXPECT_EQ(a.buggy[i].truth->trigger_input, b.buggy[i].truth->trigger_input);
    }
    for (std::size_t i = 0; i < a.correct.size(); ++i)
      EXPECT_EQ(a.correct[i].source, b.correct[i].source);
  }
}

TEST(Generator, SourcesRoundTrip) {
  for (GroupKind k : kAllGroupKinds) {
    InconsistencyGroup g = generate_group(k, 5, 3, 3);
    for (const auto& gp : g.buggy) {
      EXPECT_EQ(minilang::pretty_print(parse_program(gp.source)), gp.source);
      EXPECT_TRUE(minilang::structurally_equal(parse_program(gp.source), gp.program));
    }
  }
}

class GroupProperties : public ::testing::TestWithParam<GroupKind> {};

TEST_P(GroupProperties, EveryBuggyProgramTriggersItsBug) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    InconsistencyGroup g = generate_group(GetParam(), seed, 5, 2);
    for (const auto& gp : g.buggy) {
      ASSERT_TRUE(gp.truth.has_value());
      const GroundTruth& t = *gp.truth;
      EXPECT_EQ(t.bug_kind, bug_kind_of(GetParam()));
      Outcome o = interpret(gp.program, t.trigger_input).outcome;
      EXPECT_TRUE(o.is_bug()) << gp.source;
      EXPECT_TRUE(reproduces(o, t.outcome));
      EXPECT_EQ(gp.idiom_point, t.bug_point);
    }
  }
}

TEST_P(GroupProperties, MinimalTraceIsOneMinimalSubsequence) {
  InconsistencyGroup g = generate_group(GetParam(), 21, 6, 2);
  for (const auto& gp : g.buggy) {
    const GroundTruth& t = *gp.truth;
    EXPECT_TRUE(is_subsequence(t.minimal_trace, t.full_trace));
    EXPECT_TRUE(reproduces(execute_trace(gp.program, t.minimal_trace, t.trigger_input), t.outcome))
        << gp.source;
    for (std::size_t i = 0; i < t.minimal_trace.size(); ++i) {
      std::vector<NodeId> shorter = t.minimal_trace;
      shorter.erase(shorter.begin() + static_cast<std::ptrdiff_t>(i));
      EXPECT_FALSE(reproduces(execute_trace(gp.program, shorter, t.trigger_input), t.outcome))
          << "removable statement " << t.minimal_trace[i] << " in\n" << gp.source;
    }
  }
}

TEST_P(GroupProperties, CorrectProgramsNeverFailOnBattery) {
  InconsistencyGroup g = generate_group(GetParam(), 33, 5, 10);
  util::Rng rng(99);
  for (const auto& gp : g.correct) {
    EXPECT_EQ(gp.noise, gp.idiom_point == kNoNode);
    for (int i = 0; i < 50; ++i) {
      ProgramInput in = random_input(gp.program, rng);
      Outcome o = interpret(gp.program, in).outcome;
      ASSERT_FALSE(o.is_bug()) << o.describe() << "\n" << gp.source;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, GroupProperties, ::testing::ValuesIn(kAllGroupKinds),
                         [](const auto& info) {
                           std::string s = to_string(info.param);
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

// Enumerates every combination of open failures and reports whether any leaks.
bool some_failure_pattern_leaks(const Program& p) {
  std::vector<NodeId> opens;
  for (int i = 0; builtin_site(p, "open", i) != kNoNode; ++i) opens.push_back(builtin_site(p, "open", i));
  for (unsigned mask = 0; mask < (1u << opens.size()); ++mask) {
    ProgramInput in;
    for (std::size_t i = 0; i < opens.size(); ++i) in.open_fails[opens[i]] = {((mask >> i) & 1u) != 0};
    if (interpret(p, in).outcome.kind == OutcomeKind::Leak) return true;
  }
  return false;
}

TEST(Generator, LeakGroupsLeakOnlyWhenBuggy) {
  InconsistencyGroup g = generate_group(GroupKind::LeakMisplacedClose, 4, 6, 5);
  for (const auto& gp : g.buggy) EXPECT_TRUE(some_failure_pattern_leaks(gp.program)) << gp.source;
  for (const auto& gp : g.correct) EXPECT_FALSE(some_failure_pattern_leaks(gp.program)) << gp.source;
}

TEST(Generator, DeriveTruthRejectsNonTriggeringInput) {
  Program p = parse_program(kLookupBug);
  ProgramInput in;
  in.reads[builtin_site(p, "read_input")] = {std::int64_t{1}};
  EXPECT_THROW(derive_truth(p, BugKind::NPD, in, p.find_procedure("main")->body[3].id),
               std::logic_error);
}
