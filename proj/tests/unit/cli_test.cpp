#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <set>
#include <unistd.h>

#include "metabug/cli/commands.hpp"
#include "metabug/minilang/parser.hpp"
#include "metabug/synthgen/corpus.hpp"

using namespace metabug;
using namespace metabug::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("metabug-cli-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text(e.path());
  return out;
}

Config tiny() {
  Config c;
  c.d = 8;
  c.steps = 2;
  c.read_steps = 1;
  c.epochs = 2;
  c.seed = 4;
  c.groups_per_kind = 1;
  c.n_buggy = 2;
  c.ratio = 3;
  return c;
}

std::vector<synthgen::GroupKind> all_kinds() {
  return {synthgen::kAllGroupKinds.begin(), synthgen::kAllGroupKinds.end()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

TEST(Config, ParsesKeyValueLinesWithComments) {
  Config c = parse_config("# model\nd = 16\n steps=3  # inline\n\nno_global_attention = true\n");
  EXPECT_EQ(c.d, 16);
  EXPECT_EQ(c.steps, 3);
  EXPECT_TRUE(c.no_global_attention);
  EXPECT_EQ(c.read_steps, Config{}.read_steps);
}

TEST(Config, LaterSettingsOverrideEarlier) {
  Config base;
  base.seed = 9;
  Config c = parse_config("d = 4\n", base);
  EXPECT_EQ(c.seed, 9u);
  set_option(c, "d", "12");
  EXPECT_EQ(c.d, 12);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("colour = red\n"), ConfigError);
  EXPECT_THROW(parse_config("d 4\n"), ConfigError);
  EXPECT_THROW(parse_config("d = four\n"), ConfigError);
  Config c;
  c.cutoff = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = Config{};
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, RenderRoundTrips) {
  Config c = tiny();
  c.learning_rate = 0.1;
  c.no_read_steps = true;
  Config back = parse_config(render_config(c));
  EXPECT_EQ(render_config(back), render_config(c));
  EXPECT_EQ(back.learning_rate, 0.1);
}

// ---------------------------------------------------------------------------
// Corpus and gen

TEST(Corpus, WriteReadRoundTrip) {
  TempDir dir;
  auto corpus = synthgen::generate_corpus(all_kinds(), 2, 1, 2, 3);
  synthgen::write_corpus(corpus, dir.path());
  auto back = synthgen::read_corpus(dir.path());
  ASSERT_EQ(back.groups.size(), corpus.groups.size());
  std::map<std::string, const synthgen::InconsistencyGroup*> by_id;
  for (const auto& g : corpus.groups) by_id[g.id] = &g;
  for (const auto& g : back.groups) {
    const auto& orig = *by_id.at(g.id);
    ASSERT_EQ(g.buggy.size(), orig.buggy.size());
    ASSERT_EQ(g.correct.size(), orig.correct.size());
    for (std::size_t i = 0; i < g.buggy.size(); ++i) {
      EXPECT_EQ(g.buggy[i].source, orig.buggy[i].source);
      EXPECT_EQ(synthgen::truth_to_json(*g.buggy[i].truth), synthgen::truth_to_json(*orig.buggy[i].truth));
      EXPECT_EQ(g.buggy[i].idiom_point, orig.buggy[i].idiom_point);
    }
    for (std::size_t i = 0; i < g.correct.size(); ++i) EXPECT_EQ(g.correct[i].source, orig.correct[i].source);
  }
}

TEST(Corpus, CorruptFileIsNamed) {
  TempDir dir;
  synthgen::write_corpus(synthgen::generate_corpus({synthgen::GroupKind::NpdOrder}, 2, 1, 2, 3), dir.path());
  fs::path victim;
  for (const auto& e : fs::recursive_directory_iterator(dir.path()))
    if (e.path().filename() == "1.mbl") victim = e.path();
  ASSERT_FALSE(victim.empty());
  write_text(victim, "proc main( {");
  try {
    synthgen::read_corpus(dir.path());
    FAIL() << "expected CorpusError";
  } catch (const synthgen::CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find(victim.string()), std::string::npos) << e.what();
  }
}

TEST(Gen, CountsMatchDirectoriesAndRerunsAreIdentical) {
  TempDir a, b;
  auto counts = cmd_gen(all_kinds(), tiny(), a.path());
  cmd_gen(all_kinds(), tiny(), b.path());
  EXPECT_EQ(tree(a.path()), tree(b.path()));
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& c : counts) {
    int groups = 0, buggy = 0, correct = 0;
    for (const auto& g : fs::directory_iterator(a.path() / c.kind)) {
      ++groups;
      for (const auto& f : fs::directory_iterator(g.path() / "buggy")) buggy += f.path().extension() == ".mbl";
      for (const auto& f : fs::directory_iterator(g.path() / "correct")) correct += f.path().extension() == ".mbl";
    }
    EXPECT_EQ(groups, c.groups) << c.kind;
    EXPECT_EQ(buggy, c.buggy) << c.kind;
    EXPECT_EQ(correct, c.correct) << c.kind;
  }
  EXPECT_NE(counts_table(counts).find("total"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Train

TEST(TrainCmd, TinyCorpusTrainsQuicklyAndWritesArtifacts) {
  TempDir dir;
  cmd_gen(all_kinds(), tiny(), dir.path() / "corpus");
  auto start = std::chrono::steady_clock::now();
  cmd_train(dir.path() / "corpus", tiny(), dir.path() / "model");
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(seconds, 60.0);
  EXPECT_TRUE(fs::exists(dir.path() / "model" / "weights.json"));
  EXPECT_EQ(read_text(dir.path() / "model" / "config.txt"), render_config(tiny()));
  std::string loss = read_text(dir.path() / "model" / "loss.csv");
  EXPECT_EQ(std::count(loss.begin(), loss.end(), '\n'), 1 + 2 * 6);
}

TEST(TrainCmd, ZeroEpochsEmitsInitialWeights) {
  TempDir dir;
  Config c = tiny();
  c.epochs = 0;
  cmd_gen(all_kinds(), c, dir.path() / "corpus");
  cmd_train(dir.path() / "corpus", c, dir.path() / "model");
  EXPECT_EQ(nn::to_json(load_model(dir.path() / "model")), nn::to_json(nn::ModelParams::init(c.model())));
}

TEST(TrainCmd, ResumeReproducesUninterruptedRun) {
  TempDir dir;
  Config c = tiny();
  c.epochs = 3;
  fs::path corpus = dir.path() / "corpus";
  cmd_gen(all_kinds(), c, corpus);
  cmd_train(corpus, c, dir.path() / "full");

  Config first = c;
  first.epochs = 2;
  TrainOptions opts;
  opts.checkpoint_every = 1;
  cmd_train(corpus, first, dir.path() / "split", opts);
  opts.resume = true;
  cmd_train(corpus, c, dir.path() / "split", opts);

  EXPECT_EQ(read_text(dir.path() / "full" / "weights.json"), read_text(dir.path() / "split" / "weights.json"));
  EXPECT_EQ(read_text(dir.path() / "full" / "loss.csv"), read_text(dir.path() / "split" / "loss.csv"));
}

TEST(TrainCmd, HoldoutDropsThatKind) {
  TempDir dir;
  cmd_gen(all_kinds(), tiny(), dir.path() / "corpus");
  TrainOptions opts;
  opts.holdout = BugKind::NPD;
  cmd_train(dir.path() / "corpus", tiny(), dir.path() / "model", opts);
  std::string loss = read_text(dir.path() / "model" / "loss.csv");
  EXPECT_EQ(loss.find("npd-"), std::string::npos);
  EXPECT_NE(loss.find("aio-"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Detect, explain, eval

TEST(DetectCmd, CutoffAboveSliceCountReportsAll) {
  TempDir dir;
  cmd_gen(all_kinds(), tiny(), dir.path());
  auto params = nn::ModelParams::init(tiny().model());
  auto set = load_programs({dir.path()});
  auto report = cmd_detect(params, set, std::nullopt, 100000);
  ASSERT_FALSE(report.entries.empty());
  for (const auto& e : report.entries) EXPECT_TRUE(e.reported);
  auto one = cmd_detect(params, set, BugKind::AIO, 1);
  for (const auto& e : one.entries) EXPECT_EQ(e.kind, BugKind::AIO);
  EXPECT_EQ(std::count_if(one.entries.begin(), one.entries.end(), [](const Detection& e) { return e.reported; }), 1);
}

TEST(DetectCmd, ProgramsWithoutSlicesGiveEmptyReport) {
  TempDir dir;
  write_text(dir.path() / "a.mbl", "proc main() { var x := 1; }\n");
  auto report = cmd_detect(nn::ModelParams::init(tiny().model()), load_programs({dir.path()}), std::nullopt, 5);
  EXPECT_TRUE(report.entries.empty());
  EXPECT_TRUE(report.warnings.empty());
}

TEST(DetectCmd, SingleSliceKindIsSkippedWithWarning) {
  TempDir dir;
  write_text(dir.path() / "a.mbl", "proc main() { var x := null; var n := length(x); }\n");
  auto report = cmd_detect(nn::ModelParams::init(tiny().model()), load_programs({dir.path()}), std::nullopt, 5);
  EXPECT_TRUE(report.entries.empty());
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.warnings[0].find("NPD"), std::string::npos);
}

TEST(DetectCmd, ReportJsonRoundTrips) {
  TempDir dir;
  cmd_gen({synthgen::GroupKind::AioOffByOne}, tiny(), dir.path());
  auto report = cmd_detect(nn::ModelParams::init(tiny().model()), load_programs({dir.path()}), std::nullopt, 2);
  std::string text = report_to_json(report);
  EXPECT_EQ(report_to_json(report_from_json(text)), text);
}

TEST(ExplainCmd, UnknownSliceIsNotFound) {
  TempDir dir;
  cmd_gen({synthgen::GroupKind::AioOffByOne}, tiny(), dir.path());
  auto params = nn::ModelParams::init(tiny().model());
  auto set = load_programs({dir.path()});
  auto report = cmd_detect(params, set, std::nullopt, 2);
  EXPECT_THROW(cmd_explain(params, report, set, std::string("nope"), {}), DataError);
  auto traces = cmd_explain(params, report, set, std::nullopt, {});
  EXPECT_EQ(traces.size(), 2u);
  EXPECT_EQ(traces_to_json(traces_from_json(traces_to_json(traces))), traces_to_json(traces));
  auto single = cmd_explain(params, report, set, report.entries.back().id, {});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].slice_id, report.entries.back().id);
}

TEST(EvalCmd, PerfectDetectorHasNoErrors) {
  TempDir dir;
  cmd_gen(all_kinds(), tiny(), dir.path());
  auto corpus = synthgen::read_corpus(dir.path());
  auto report = cmd_detect(nn::ModelParams::init(tiny().model()), load_programs({dir.path()}), std::nullopt, 1000);
  std::set<std::string> bugs;
  for (const auto& b : known_bugs(corpus)) bugs.insert(candidate_id(b.program, b.kind, b.bug_point));
  for (auto& e : report.entries) e.reported = bugs.count(e.id) > 0;
  auto r = cmd_eval(report, dir.path(), {}, 1);
  EXPECT_EQ(r.total.tp, r.total.bugs);
  EXPECT_EQ(r.total.fp, 0);
  EXPECT_EQ(r.total.fn, 0);
}

TEST(EvalCmd, MetricsAreAdditiveAcrossKinds) {
  TempDir dir;
  cmd_gen(all_kinds(), tiny(), dir.path());
  auto report = cmd_detect(nn::ModelParams::init(tiny().model()), load_programs({dir.path()}), std::nullopt, 2);
  auto r = cmd_eval(report, dir.path(), {}, 1);
  Metrics sum;
  for (const auto& [k, m] : r.per_kind) {
    sum.bugs += m.bugs;
    sum.tp += m.tp;
    sum.fp += m.fp;
    sum.fn += m.fn;
    sum.reported += m.reported;
  }
  EXPECT_EQ(sum.bugs, r.total.bugs);
  EXPECT_EQ(sum.tp, r.total.tp);
  EXPECT_EQ(sum.fp, r.total.fp);
  EXPECT_EQ(sum.fn, r.total.fn);
  EXPECT_EQ(sum.reported, r.total.reported);
  EXPECT_EQ(r.total.tp + r.total.fn, r.total.bugs);
}

TEST(EvalCmd, RandomBaselineMatchesHypergeometricMean) {
  // n slices with b bugs, cutoff N: a uniform ranking puts N*b/n bugs on top.
  DetectReport report;
  report.cutoff = 5;
  std::vector<KnownBug> bugs;
  for (int i = 0; i < 40; ++i) {
    std::string program = "p" + std::to_string(i);
    report.entries.push_back({candidate_id(program, BugKind::NPD, 1), program, BugKind::NPD, 1, 0.0, i + 1, i < 5});
    if (i % 8 == 0) bugs.push_back({program, BugKind::NPD, 1});
  }
  Metrics m = evaluate(report, bugs, 3, 1000);
  double expected = 5.0 * 5.0 / 40.0;
  // Standard error of the mean of 1000 hypergeometric draws is about 0.025.
  EXPECT_NEAR(m.random_tp, expected, 0.1);
  EXPECT_EQ(m.tp, 1);
}
