#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <json.hpp>
#include <set>

#include "metabug/collectors/collectors.hpp"
#include "metabug/graph/slice.hpp"
#include "metabug/minilang/parser.hpp"
#include "metabug/synthgen/generator.hpp"
#include "metabug/util/random.hpp"

using namespace metabug;
using namespace metabug::collectors;
using minilang::parse_program;
using minilang::Program;
using minilang::Stmt;
using minilang::StmtKind;

namespace {

NodeId stmt_id(const Program& p, const std::string& header) {
  NodeId found = minilang::kNoNode;
  minilang::for_each_stmt(p, [&](const Stmt& s) {
    if (minilang::print_stmt_header(s) == header) found = s.id;
  });
  EXPECT_NE(found, minilang::kNoNode) << header;
  return found;
}

bool slice_has(const TestSlice& s, const Program& original, const std::string& header) {
  return graph::statement_ids(s.program).count(stmt_id(original, header)) > 0;
}

void expect_well_formed(const TestSlice& s) {
  auto ids = graph::statement_ids(s.program);
  EXPECT_TRUE(ids.count(s.bug_point));
  EXPECT_TRUE(s.integral.count(s.bug_point));
  for (NodeId i : s.integral) EXPECT_TRUE(ids.count(i)) << i;
  EXPECT_NO_THROW(minilang::resolve(s.program));
}

}  // namespace

TEST(Npd, DirectPattern) {
  Program p = parse_program("proc main() { var x := null; var y := length(x); }");
  auto slices = collect_npd(p);
  ASSERT_EQ(slices.size(), 1u);
  EXPECT_EQ(slices[0].bug_point, stmt_id(p, "var y := length(x);"));
  EXPECT_EQ(slices[0].integral,
            (std::set<NodeId>{stmt_id(p, "var x := null;"), stmt_id(p, "var y := length(x);")}));
  expect_well_formed(slices[0]);
}

TEST(Npd, FeasibilityIgnored) {
  Program p = parse_program(
      "proc main() { var x := null; x := new[3]; var y := x[0]; close(x); }");
  auto slices = collect_npd(p);
  ASSERT_EQ(slices.size(), 2u);
  for (const auto& s : slices) {
    EXPECT_TRUE(s.integral.count(stmt_id(p, "var x := null;")));
    expect_well_formed(s);
  }
}

TEST(Npd, NoNullLiteralGivesNothing) {
  Program p = parse_program("proc main() { var x := new[2]; var y := length(x); }");
  EXPECT_TRUE(collect_npd(p).empty());
}

TEST(Npd, NullGlobalReachesOtherProcedures) {
  Program p = parse_program(
      "global g := null;\n"
      "proc use() { var n := length(g); }\n"
      "proc main() { use(); }");
  auto slices = collect_npd(p);
  ASSERT_EQ(slices.size(), 1u);
  EXPECT_TRUE(slices[0].integral.count(p.globals[0].id));
  expect_well_formed(slices[0]);
}

TEST(Npd, DereferenceBeforeNullIsNotCollected) {
  Program p = parse_program("proc main() { var x := new[1]; var n := length(x); x := null; }");
  EXPECT_TRUE(collect_npd(p).empty());
}

TEST(Aio, OneReadKeepsArrayAndIndexDefinitions) {
  Program p = parse_program(
      "proc main() { var a := new[4]; var i := read_input(); var z := 7; var v := a[i]; }");
  auto slices = collect_aio(p);
  ASSERT_EQ(slices.size(), 1u);
  EXPECT_TRUE(slice_has(slices[0], p, "var a := new[4];"));
  EXPECT_TRUE(slice_has(slices[0], p, "var i := read_input();"));
  EXPECT_FALSE(slice_has(slices[0], p, "var z := 7;"));
  EXPECT_EQ(slices[0].integral,
            (std::set<NodeId>{stmt_id(p, "var a := new[4];"), stmt_id(p, "var v := a[i];")}));
  expect_well_formed(slices[0]);
}

TEST(Aio, NoArrayOperationsGivesNothing) {
  EXPECT_TRUE(collect_aio(parse_program("proc main() { var x := 1; }")).empty());
}

TEST(Aio, LoopCarriedIndexKeepsIncrement) {
  Program p = parse_program(
      "proc main() { var a := new[3]; var i := 0; var s := 0;"
      " while (i < 5) { s := a[i]; i := i + 1; } }");
  auto slices = collect_aio(p);
  ASSERT_EQ(slices.size(), 1u);
  EXPECT_TRUE(slice_has(slices[0], p, "i := i + 1;"));
}

TEST(Aio, WritesAreOperationsToo) {
  Program p = parse_program("proc main() { var a := new[2]; a[2] := 1; var b := a[0]; }");
  EXPECT_EQ(collect_aio(p).size(), 2u);
}

TEST(Nfe, DirectPatternAndEmpty) {
  Program p = parse_program("proc main() { var s := read_input(); var v := parseInt(s); }");
  auto slices = collect_nfe(p);
  ASSERT_EQ(slices.size(), 1u);
  EXPECT_EQ(slices[0].integral,
            (std::set<NodeId>{stmt_id(p, "var s := read_input();"), stmt_id(p, "var v := parseInt(s);")}));
  EXPECT_TRUE(collect_nfe(parse_program("proc main() { var s := 1; }")).empty());
}

TEST(Nfe, DefinitionsFromBothBranches) {
  Program p = parse_program(
      "proc main() { var c := read_input(); var s := \"1\";"
      " if (c > 0) { s := read_input(); } else { s := \"7\"; } var v := parseInt(s); }");
  auto slices = collect_nfe(p);
  ASSERT_EQ(slices.size(), 1u);
  EXPECT_TRUE(slices[0].integral.count(stmt_id(p, "s := read_input();")));
  EXPECT_TRUE(slices[0].integral.count(stmt_id(p, "s := \"7\";")));
  EXPECT_TRUE(slice_has(slices[0], p, "var c := read_input();"));
}

TEST(Leak, EarlyExitSkipsClose) {
  Program p = parse_program(
      "proc main() { var f := read_input(); var h := open(f); var s := read_input();"
      " var v := parseInt(s); close(h); }");
  auto slices = collect_leak(p);
  ASSERT_EQ(slices.size(), 1u);
  EXPECT_EQ(slices[0].bug_point, stmt_id(p, "var h := open(f);"));
  EXPECT_EQ(slices[0].integral, (std::set<NodeId>{stmt_id(p, "var h := open(f);"), stmt_id(p, "close(h);")}));
  EXPECT_TRUE(slice_has(slices[0], p, "var v := parseInt(s);"));
  expect_well_formed(slices[0]);
}

TEST(Leak, ImmediateCloseIsNotCollected) {
  Program p = parse_program("proc main() { var f := read_input(); var h := open(f); close(h); }");
  EXPECT_TRUE(collect_leak(p).empty());
}

TEST(Leak, TwoHandlesOneLeaked) {
  Program p = parse_program(
      "proc main() { var f := read_input(); var a := open(f); close(a); var b := open(f); }");
  auto slices = collect_leak(p);
  ASSERT_EQ(slices.size(), 1u);
  EXPECT_EQ(slices[0].bug_point, stmt_id(p, "var b := open(f);"));
}

namespace {

// Random acyclic procedure: handles opened at top level, closes and parse calls
// anywhere, nested branches up to depth 2.
std::string random_leak_program(util::Rng& rng, int& handles) {
  handles = 0;
  std::function<std::string(int, int)> block = [&](int depth, int len) {
    std::string out;
    for (int i = 0; i < len; ++i) {
      int roll = static_cast<int>(rng.below(depth == 0 ? 5 : 3));
      if (depth == 0 && roll == 4 && handles < 3) {
        out += "var h" + std::to_string(handles++) + " := open(f); ";
      } else if (roll == 0 && handles > 0) {
        out += "close(h" + std::to_string(rng.below(static_cast<std::uint64_t>(handles))) + "); ";
      } else if (roll == 1) {
        out += "var v := parseInt(s); ";
      } else if (roll == 2 && depth < 2) {
        out += "if (c > 0) { " + block(depth + 1, 1 + static_cast<int>(rng.below(2))) + "} ";
        if (rng.chance(0.5)) out.insert(out.size() - 1, " else { " + block(depth + 1, 1) + "}");
      } else {
        out += "c := c + 1; ";
      }
    }
    return out;
  };
  std::string body = block(0, 6);
  return "proc main() { var f := read_input(); var s := read_input(); var c := read_input(); " + body + "}";
}

// Open statements that are still open at some exit, found by enumerating
// every path through the AST, each may_fail call optionally exiting.
std::set<NodeId> leaking_opens(const Program& p) {
  std::set<NodeId> leaks;
  using Live = std::map<std::string, NodeId>;
  std::function<void(const std::vector<Stmt>&, std::size_t, Live, const std::function<void(Live)>&)> run;
  auto at_exit = [&](const Live& live) {
    for (const auto& [var, id] : live) leaks.insert(id);
  };
  run = [&](const std::vector<Stmt>& body, std::size_t i, Live live, const std::function<void(Live)>& k) {
    if (i == body.size()) return k(live);
    const Stmt& s = body[i];
    std::string text = minilang::print_stmt_header(s);
    if (s.kind == StmtKind::If) {
      run(s.then_body, 0, live, [&](Live l) { run(body, i + 1, l, k); });
      run(s.else_body, 0, live, [&](Live l) { run(body, i + 1, l, k); });
      return;
    }
    if (text.find("open(") != std::string::npos) {
      at_exit(live);
      live[s.name] = s.id;
    } else if (text.find("parseInt(") != std::string::npos) {
      at_exit(live);
    } else if (text.rfind("close(", 0) == 0) {
      live.erase(s.value->args[0].text);
    }
    run(body, i + 1, live, k);
  };
  run(p.procedures[0].body, 0, {}, at_exit);
  return leaks;
}

}  // namespace

TEST(Leak, MatchesPathEnumerationOracle) {
  util::Rng rng(77);
  int with_handles = 0;
  for (int trial = 0; trial < 300; ++trial) {
    int handles = 0;
    std::string src = random_leak_program(rng, handles);
    Program p = parse_program(src);
    std::set<NodeId> got;
    for (const auto& s : collect_leak(p)) {
      got.insert(s.bug_point);
      expect_well_formed(s);
    }
    EXPECT_EQ(got, leaking_opens(p)) << src;
    with_handles += handles > 0;
  }
  EXPECT_GT(with_handles, 100);
}

TEST(Race, ChildNullsSharedThreadReference) {
  Program p = parse_program(
      "global childThread := null;\n"
      "proc child() { childThread := null; }\n"
      "proc main() { childThread := new[1]; spawn child();"
      " if (childThread != null) { var n := length(childThread); } }");
  auto slices = collect_race(p);
  ASSERT_EQ(slices.size(), 1u);
  const auto& s = slices[0];
  EXPECT_EQ(s.bug_point, stmt_id(p, "childThread := null;"));
  EXPECT_TRUE(s.program.find_procedure("child"));
  EXPECT_TRUE(s.integral.count(stmt_id(p, "var n := length(childThread);")));
  EXPECT_TRUE(s.integral.count(stmt_id(p, "if (childThread != null)")));
  expect_well_formed(s);
  auto found = find_shared_variables(p);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].variable, "childThread");
  EXPECT_EQ(found[0].reading_procs, (std::set<std::string>{"main"}));
  EXPECT_EQ(found[0].update_sequence.back(), found[0].write_point);
}

TEST(Race, LocalsOnlyGiveNothing) {
  Program p = parse_program(
      "proc w() { var t := 1; t := t + 1; }\n"
      "proc main() { var t := 0; spawn w(); t := 5; var u := t; }");
  EXPECT_TRUE(collect_race(p).empty());
}

TEST(Race, ReadersWithoutWriterGiveNothing) {
  Program p = parse_program(
      "global g := 3;\n"
      "proc r1() { var a := g; }\n"
      "proc r2() { var b := g + 1; }\n"
      "proc main() { spawn r1(); spawn r2(); }");
  EXPECT_TRUE(collect_race(p).empty());
}

TEST(Race, ByReferenceArgumentIsShared) {
  Program p = parse_program(
      "proc w(ref x: int) { var v := read_input(); x := v * 2; }\n"
      "proc main() { var y := 0; spawn w(y); var z := y + 1; }");
  auto slices = collect_race(p);
  ASSERT_EQ(slices.size(), 1u);
  EXPECT_EQ(slices[0].bug_point, stmt_id(p, "x := v * 2;"));
  auto found = find_shared_variables(p);
  ASSERT_EQ(found.size(), 1u);
  // The chain runs from the value's definition to the write.
  EXPECT_EQ(found[0].update_sequence,
            (std::vector<NodeId>{stmt_id(p, "var v := read_input();"), stmt_id(p, "x := v * 2;")}));
}

TEST(Race, SelfConcurrentWorker) {
  Program p = parse_program(
      "global c := 0;\n"
      "proc w() { c := c + 1; }\n"
      "proc main() { var i := 0; while (i < 2) { spawn w(); i := i + 1; } }");
  EXPECT_EQ(collect_race(p).size(), 1u);
}

TEST(Collectors, ManifestIsStableJson) {
  Program p = parse_program("proc main() { var x := null; var y := length(x); var z := length(x); }");
  auto slices = collect(p, BugKind::NPD);
  auto j = nlohmann::json::parse(manifest_json(slices));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["bug_kind"], "NPD");
  EXPECT_LT(j[0]["bug_point"].get<int>(), j[1]["bug_point"].get<int>());
  EXPECT_EQ(j[0]["integral"].size(), 2u);
  EXPECT_NO_THROW(parse_program(j[0]["source"].get<std::string>()));
  EXPECT_EQ(manifest_json(slices), manifest_json(collect(p, BugKind::NPD)));
}

class Soundness : public ::testing::TestWithParam<synthgen::GroupKind> {};

TEST_P(Soundness, EveryInjectedBugHasASliceHoldingItsMinimalTrace) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto group = synthgen::generate_group(GetParam(), seed, 5, 2);
    for (const auto& g : group.buggy) {
      const auto& truth = *g.truth;
      auto slices = collect(g.program, truth.bug_kind);
      EXPECT_EQ(manifest_json(slices), manifest_json(collect(g.program, truth.bug_kind)));
      const TestSlice* hit = nullptr;
      for (const auto& s : slices) {
        expect_well_formed(s);
        if (s.bug_point == truth.bug_point) hit = &s;
      }
      ASSERT_NE(hit, nullptr) << g.source;
      auto ids = graph::statement_ids(hit->program);
      for (NodeId t : truth.minimal_trace) EXPECT_TRUE(ids.count(t)) << t << "\n" << g.source;
    }
    for (const auto& g : group.correct)
      for (const auto& s : collect(g.program, bug_kind_of(GetParam()))) expect_well_formed(s);
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, Soundness, ::testing::ValuesIn(synthgen::kAllGroupKinds),
                         [](const auto& info) {
                           std::string name = synthgen::to_string(info.param);
                           std::replace(name.begin(), name.end(), '-', '_');
                           return name;
                         });
