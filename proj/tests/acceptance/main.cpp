// Runs acceptance criteria 1-9 and prints one PASS/FAIL line for each.
// Usage: metabug_acceptance [--strict] [criterion...]
// Exits 2 when a criterion could not run; with --strict, also 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "common/random_graphs.hpp"
#include "common/random_programs.hpp"
#include "metabug/cli/commands.hpp"
#include "metabug/collectors/collectors.hpp"
#include "metabug/explain/explain.hpp"
#include "metabug/graph/slice.hpp"
#include "metabug/meta/meta.hpp"
#include "metabug/synthgen/corpus.hpp"

using namespace metabug;
using minilang::NodeId;
namespace fs = std::filesystem;

namespace {

// Tolerances and scales.
constexpr int kGradientGraphs = 20;
constexpr double kGradientRelTol = 1e-4;
constexpr double kGradientFloor = 1e-3;  // smaller gradients are compared absolutely at floor * tolerance
constexpr double kGradientStep = 1e-5;
constexpr double kGradientMargin = 100.0;  // keeps every hinge term active
constexpr int kAttentionGraphs = 1000;
constexpr double kAttentionTol = 1e-9;
constexpr int kLossInstances = 50;
constexpr int kBugsPerKind = 50;
constexpr double kRequiredRecall = 0.6;
constexpr int kBaselineShuffles = 1000;
constexpr double kRequiredTraceRate = 0.9;
constexpr int kFuzzedSlices = 1000;
constexpr int kPlantedSlices = 200;
constexpr std::size_t kMaxOracleBranches = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient oracle

nn::ModelParams random_params(util::Rng& rng, int d, int steps, int k) {
  nn::ModelConfig c;
  c.d = d;
  c.steps = steps;
  c.read_steps = k;
  c.seed = rng.next();
  return nn::ModelParams::init(c);
}

Outcome gradient_oracle() {
  util::Rng rng(1001);
  double worst = 0;
  std::size_t checked = 0;
  std::string where;
  for (int trial = 0; trial < kGradientGraphs; ++trial) {
    int d = 2 + static_cast<int>(rng.below(7));
    nn::ModelParams params = random_params(rng, d, 2, 2);
    meta::TrainingGroup group;
    group.id = "g" + std::to_string(trial);
    group.buggy.push_back(testutil::random_graph(rng, 2 + rng.below(9)));
    for (int i = 0; i < 2; ++i) group.correct.push_back(testutil::random_graph(rng, 2 + rng.below(9)));

    auto objective = [&](const nn::ModelParams& p) {
      nn::Tape tape;
      nn::BoundParams bp(tape, p, false);
      return meta::group_objective(group, bp, kGradientMargin).value().item();
    };
    nn::Tape tape;
    nn::BoundParams bp(tape, params, true);
    tape.backward(meta::group_objective(group, bp, kGradientMargin));
    for (const auto& [name, grad] : bp.gradients()) {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        nn::ModelParams up = params, down = params;
        double x = params.at(name)[i];
        double h = kGradientStep * std::max(1.0, std::abs(x));
        up.at(name)[i] = x + h;
        down.at(name)[i] = x - h;
        double fd = (objective(up) - objective(down)) / (2 * h);
        double a = grad[i];
        double scale = std::max({std::abs(a), std::abs(fd), kGradientFloor});
        double err = std::abs(a - fd) / scale;
        ++checked;
        if (err > worst) {
          worst = err;
          where = fmt("%s[%zu] analytic %.6g fd %.6g", name.c_str(), i, a, fd);
        }
      }
    }
  }
  return {worst <= kGradientRelTol,
          fmt("%zu parameter entries over %d groups, max relative error %.2e (%s), tolerance %.0e", checked,
              kGradientGraphs, worst, where.c_str(), kGradientRelTol)};
}

// ---------------------------------------------------------------------------
// 2. Attention invariants

Outcome attention_invariants() {
  util::Rng rng(2002);
  double worst_sum = 0, min_alpha = 1;
  int mismatched = 0;
  nn::ModelParams params = random_params(rng, 4, 3, 1);
  for (int i = 0; i < kAttentionGraphs; ++i) {
    if (i % 50 == 0)
      params = random_params(rng, 2 + static_cast<int>(rng.below(7)), 1 + static_cast<int>(rng.below(4)), 1);
    nn::GraphInput g = testutil::random_graph(rng, 1 + rng.below(10));
    for (const auto& round : nn::attention(g, params).alpha) {
      double s = 0;
      for (double a : round) {
        s += a;
        min_alpha = std::min(min_alpha, a);
      }
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
    nn::Tape t;
    nn::BoundParams bp(t, params, false);
    if (nn::message_pass_attended(g, bp, true).states.value().data != nn::message_pass_plain(g, bp).value().data)
      ++mismatched;
  }
  bool pass = worst_sum <= kAttentionTol && min_alpha >= 0 && mismatched == 0;
  return {pass, fmt("%d graphs, max |sum alpha - 1| = %.1e, min alpha = %.3g, alpha=1 vs plain mismatches %d",
                    kAttentionGraphs, worst_sum, min_alpha, mismatched)};
}

// ---------------------------------------------------------------------------
// 3. Loss semantics

Outcome loss_semantics() {
  util::Rng rng(3003);
  auto vec = [&](std::size_t d) {
    nn::Tensor t({d});
    for (double& x : t.data) x = rng.normal();
    return t;
  };
  int exact = 0;
  for (int trial = 0; trial < kLossInstances; ++trial) {
    std::size_t d = 1 + rng.below(6);
    std::vector<nn::Tensor> P, Q;
    for (std::uint64_t i = 0, n = 1 + rng.below(3); i < n; ++i) P.push_back(vec(d));
    for (std::uint64_t i = 0, n = 1 + rng.below(5); i < n; ++i) Q.push_back(vec(d));
    nn::Tensor r = vec(d);
    double eps = 0.5 + rng.uniform();
    double brute = 0;
    for (const auto& q : Q)
      for (const auto& p : P) {
        double dq = 0, dp = 0;
        for (std::size_t t = 0; t < d; ++t) {
          dq += (r[t] - q[t]) * (r[t] - q[t]);
          dp += (r[t] - p[t]) * (r[t] - p[t]);
        }
        brute += std::max(dq - dp + eps, 0.0);
      }
    exact += meta::group_loss(r, P, Q, eps) == brute;
  }
  auto v = [](std::vector<double> x) { return nn::Tensor::vector(std::move(x)); };
  bool examples = meta::triplet_loss(v({0, 0}), v({0, 0}), v({1, 1})) == 0.0 &&
                  meta::triplet_loss(v({2, 2}), v({2, 2}), v({2, 2})) == 1.0 &&
                  meta::triplet_loss(v({0, 0}), v({1, 0}), v({3, 0})) == 0.0;
  return {exact == kLossInstances && examples,
          fmt("group_loss equals brute force on %d/%d instances; triplet examples %s", exact, kLossInstances,
              examples ? "hold" : "fail")};
}

// ---------------------------------------------------------------------------
// 4. Collector soundness

Outcome collector_soundness() {
  std::map<BugKind, int> bugs, found;
  std::uint64_t seed = 4004;
  for (auto gk : synthgen::kAllGroupKinds) {
    BugKind kind = synthgen::bug_kind_of(gk);
    for (int round = 0; bugs[kind] < kBugsPerKind; ++round) {
      auto group = synthgen::generate_group(gk, util::derive_seed(seed, static_cast<std::uint64_t>(round) * 31 +
                                                                          static_cast<std::uint64_t>(gk)),
                                            10, 2);
      for (const auto& p : group.buggy) {
        const auto& truth = *p.truth;
        ++bugs[kind];
        for (const auto& s : collectors::collect(p.program, kind)) {
          if (s.bug_point != truth.bug_point) continue;
          auto ids = graph::statement_ids(s.program);
          if (std::all_of(truth.minimal_trace.begin(), truth.minimal_trace.end(),
                          [&](NodeId t) { return ids.count(t) > 0; })) {
            ++found[kind];
            break;
          }
        }
      }
    }
  }
  bool pass = true;
  std::string detail;
  for (BugKind k : kAllBugKinds) {
    pass = pass && bugs[k] >= kBugsPerKind && found[k] == bugs[k];
    detail += fmt("%s %d/%d ", to_string(k), found[k], bugs[k]);
  }
  return {pass, detail + "injected bugs covered by a slice holding the minimal trace"};
}

// ---------------------------------------------------------------------------
// 5, 6, 8. Cross-kind generalization, explanations, ablations

cli::Config crossval_config() {
  cli::Config c;
  c.d = 16;
  c.steps = 4;
  c.read_steps = 3;
  c.epochs = 40;
  c.learning_rate = 1e-3;
  c.seed = 1;
  c.groups_per_kind = 2;
  c.n_buggy = 3;
  c.ratio = 9;
  return c;
}

struct KindResult {
  BugKind kind;
  int bugs = 0;
  int tp = 0;
  double random_tp = 0;
  int traces = 0;
  int traces_correct = 0;
  int traces_retaining = 0;
};

struct CrossVal {
  std::vector<KindResult> kinds;
  double seconds = 0;
  int tp() const {
    int s = 0;
    for (const auto& k : kinds) s += k.tp;
    return s;
  }
};

CrossVal cross_validate(const cli::Config& config, bool explain) {
  auto start = std::chrono::steady_clock::now();
  std::vector<synthgen::GroupKind> all(synthgen::kAllGroupKinds.begin(), synthgen::kAllGroupKinds.end());
  auto corpus = synthgen::generate_corpus(all, config.seed, config.groups_per_kind, config.n_buggy, config.ratio,
                                          config.noise);
  CrossVal out;
  for (BugKind held : kAllBugKinds) {
    auto groups = cli::training_groups(corpus, held);
    auto params = meta::train(groups, nn::ModelParams::init(config.model()), config.training());
    auto candidates = cli::test_candidates(corpus, held);
    auto bugs = cli::known_bugs(corpus, held);
    auto report = cli::detect(params, candidates, static_cast<int>(bugs.size()));
    auto m = cli::evaluate(report, bugs, config.seed, kBaselineShuffles);
    KindResult r{held, m.bugs, m.tp, m.random_tp};
    if (explain) {
      std::map<std::string, const synthgen::GroundTruth*> truth;
      for (const auto& g : corpus.groups)
        for (std::size_t n = 0; n < g.buggy.size(); ++n) {
          const auto& t = *g.buggy[n].truth;
          truth[cli::candidate_id(cli::program_name(g, true, n), t.bug_kind, t.bug_point)] = &t;
        }
      std::map<std::string, const cli::Candidate*> by_id;
      for (const auto& c : candidates) by_id[c.id] = &c;
      for (const auto& e : report.entries) {
        if (!e.reported || !truth.count(e.id)) continue;
        const auto& slice = by_id.at(e.id)->slice;
        explain::ExplainOptions options;
        options.seed = config.seed;
        auto trace = cli::explain_slice(params, slice, options);
        auto stmts = trace.statements();
        ++r.traces;
        r.traces_correct += explain::evaluate_trace(stmts, *truth.at(e.id));
        bool retains = !trace.trace.empty() && trace.trace.back().boxed;
        for (NodeId i : slice.integral)
          if (slice.bug_kind != BugKind::LEAK || i == slice.bug_point)
            retains = retains && std::find(stmts.begin(), stmts.end(), i) != stmts.end();
        r.traces_retaining += retains;
      }
    }
    out.kinds.push_back(r);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

CrossVal& full_crossval() {
  static CrossVal cv = cross_validate(crossval_config(), true);
  return cv;
}

Outcome cross_kind_generalization() {
  const CrossVal& cv = full_crossval();
  bool pass = cv.seconds < 30 * 60;
  std::string detail;
  for (const auto& k : cv.kinds) {
    bool ok = k.tp >= kRequiredRecall * k.bugs;
    pass = pass && ok;
    detail += fmt("%s TP %d/%d (random %.2f)%s; ", to_string(k.kind), k.tp, k.bugs, k.random_tp, ok ? "" : " short");
  }
  return {pass, detail + fmt("need >= %.0f%% per kind, %.0fs", 100 * kRequiredRecall, cv.seconds)};
}

Outcome explanation_correctness() {
  const CrossVal& cv = full_crossval();
  int traces = 0, correct = 0, retaining = 0;
  for (const auto& k : cv.kinds) {
    traces += k.traces;
    correct += k.traces_correct;
    retaining += k.traces_retaining;
  }
  double rate = traces > 0 ? static_cast<double>(correct) / traces : 0.0;
  bool pass = traces > 0 && rate >= kRequiredTraceRate && retaining == traces;
  return {pass, fmt("%d/%d traces of ranked held-out bugs correct (%.0f%%, need %.0f%%), %d/%d keep integral "
                    "statements and end boxed",
                    correct, traces, 100 * rate, 100 * kRequiredTraceRate, retaining, traces)};
}

Outcome ablation_direction() {
  const CrossVal& full = full_crossval();
  cli::Config no_attention = crossval_config();
  no_attention.no_global_attention = true;
  cli::Config no_relational = crossval_config();
  no_relational.no_relational_embedding = true;
  CrossVal a = cross_validate(no_attention, false);
  CrossVal r = cross_validate(no_relational, false);
  auto per_kind = [&](const CrossVal& cv) {
    std::string s;
    for (std::size_t i = 0; i < cv.kinds.size(); ++i)
      s += fmt(" %s%+d", to_string(cv.kinds[i].kind), cv.kinds[i].tp - full.kinds[i].tp);
    return s;
  };
  bool pass = a.tp() <= full.tp() && r.tp() <= full.tp();
  return {pass, fmt("TP full %d, w/o global attention %d (%+d:%s), w/o relational embedding %d (%+d:%s)", full.tp(),
                    a.tp(), a.tp() - full.tp(), per_kind(a).c_str(), r.tp(), r.tp() - full.tp(),
                    per_kind(r).c_str())};
}

// ---------------------------------------------------------------------------
// 7. Path search robustness

bool exhaustive_feasible(const explain::SliceContext& ctx, NodeId avoid) {
  for (const auto& d : testutil::all_decisions(ctx)) {
    auto p = explain::build_path(ctx, d);
    auto stmts = p.statements();
    if (std::find(stmts.begin(), stmts.end(), avoid) != stmts.end()) continue;
    if (explain::is_path_feasible(ctx, p).feasible) return true;
  }
  return false;
}

Outcome algorithm_robustness() {
  util::Rng rng(7007);
  auto scores_for = [&](const collectors::TestSlice& s) {
    explain::StatementScores out;
    minilang::for_each_stmt(s.program, [&](const minilang::Stmt& st) { out[st.id] = rng.uniform(); });
    return out;
  };
  int terminated = 0, well_formed = 0;
  for (int i = 0; i < kFuzzedSlices; ++i) {
    auto r = testutil::random_npd_slice(rng, 1 + static_cast<int>(rng.below(8)), rng.chance(0.5));
    auto report = explain::find_feasible_path(r.slice, scores_for(r.slice));
    ++terminated;
    well_formed += !report.trace.empty() && report.trace.back().boxed &&
                   report.trace.back().stmt == r.slice.bug_point;
  }

  int planted = 0, agree = 0, avoided = 0;
  while (planted < kPlantedSlices) {
    auto r = testutil::random_npd_slice(rng, 3, true, true);
    explain::SliceContext ctx(r.slice);
    if (explain::decision_points(ctx).size() > kMaxOracleBranches) continue;
    auto scores = scores_for(r.slice);
    for (auto& entry : scores) entry.second = 0.01;
    scores[r.planted] = 10.0;
    auto report = explain::find_feasible_path(r.slice, scores);
    auto stmts = report.statements();
    ++planted;
    agree += report.feasible == exhaustive_feasible(ctx, r.planted);
    avoided += std::find(stmts.begin(), stmts.end(), r.planted) == stmts.end();
  }
  bool pass = terminated == kFuzzedSlices && well_formed == kFuzzedSlices && agree == planted && avoided == planted;
  return {pass, fmt("%d/%d fuzzed slices terminate with a boxed bug point; planted contradictions routed around "
                    "%d/%d, exhaustive oracle agrees %d/%d",
                    well_formed, kFuzzedSlices, avoided, planted, agree, planted)};
}

// ---------------------------------------------------------------------------
// 9. Determinism

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = cli::read_text(e.path());
  return out;
}

void pipeline_run(const fs::path& dir) {
  cli::Config c;
  c.d = 8;
  c.steps = 2;
  c.read_steps = 2;
  c.epochs = 3;
  c.seed = 9009;
  c.groups_per_kind = 1;
  c.n_buggy = 2;
  c.ratio = 4;
  c.cutoff = 3;
  std::vector<synthgen::GroupKind> all(synthgen::kAllGroupKinds.begin(), synthgen::kAllGroupKinds.end());
  cli::cmd_gen(all, c, dir / "corpus");
  cli::TrainOptions opts;
  opts.checkpoint_every = 1;
  auto params = cli::cmd_train(dir / "corpus", c, dir / "model", opts);
  auto programs = cli::load_programs({dir / "corpus"});
  auto report = cli::cmd_detect(params, programs, std::nullopt, c.cutoff);
  cli::write_text(dir / "detect.json", cli::report_to_json(report));
  explain::ExplainOptions options;
  options.seed = c.seed;
  auto traces = cli::cmd_explain(params, report, programs, std::nullopt, options);
  cli::write_text(dir / "traces.json", cli::traces_to_json(traces));
}

Outcome determinism() {
  fs::path base = fs::temp_directory_path() / ("metabug-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(base);
  pipeline_run(base / "a");
  pipeline_run(base / "b");
  auto a = tree(base / "a"), b = tree(base / "b");
  fs::remove_all(base);
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a)
    if (!b.count(name) || b.at(name) != bytes) ++differing;
  differing += b.size() > a.size() ? b.size() - a.size() : 0;
  return {differing == 0 && !a.empty(),
          fmt("gen, train, detect and explain twice: %zu files, %zu differ", a.size(), differing)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> criteria = {
      {1, "gradient oracle", gradient_oracle},
      {2, "attention invariants", attention_invariants},
      {3, "loss semantics", loss_semantics},
      {4, "collector soundness", collector_soundness},
      {5, "cross-kind generalization", cross_kind_generalization},
      {6, "explanation correctness", explanation_correctness},
      {7, "path search robustness", algorithm_robustness},
      {8, "ablation direction", ablation_direction},
      {9, "determinism", determinism},
  };
  std::set<int> only;
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--strict") {
      strict = true;
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }
  int failed = 0, crashed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
      ++crashed;
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s (%.1fs) %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, s, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria failed\n", failed, only.empty() ? criteria.size() : only.size());
  if (crashed > 0) return 2;
  return strict && failed > 0 ? 1 : 0;
}
