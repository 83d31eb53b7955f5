#include <benchmark/benchmark.h>

#include "metabug/cli/pipeline.hpp"
#include "metabug/explain/explain.hpp"
#include "metabug/graph/pdg.hpp"
#include "metabug/minilang/parser.hpp"

using namespace metabug;

namespace {

const synthgen::InconsistencyGroup& sample_group() {
  static const auto group = synthgen::generate_group(synthgen::GroupKind::NpdOrder, 7, 3, 9);
  return group;
}

nn::ModelParams params_of(int d, int steps) {
  nn::ModelConfig c;
  c.d = d;
  c.steps = steps;
  c.read_steps = 3;
  c.seed = 7;
  return nn::ModelParams::init(c);
}

void BM_Parse(benchmark::State& state) {
  const std::string& source = sample_group().buggy.front().source;
  for (auto _ : state) benchmark::DoNotOptimize(minilang::parse_program(source));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * source.size()));
}
BENCHMARK(BM_Parse);

void BM_BuildPdg(benchmark::State& state) {
  const auto& program = sample_group().buggy.front().program;
  for (auto _ : state) benchmark::DoNotOptimize(graph::build_ipdg(program));
}
BENCHMARK(BM_BuildPdg);

void BM_CollectAll(benchmark::State& state) {
  const auto& program = sample_group().buggy.front().program;
  for (auto _ : state)
    for (BugKind k : kAllBugKinds) benchmark::DoNotOptimize(collectors::collect(program, k));
}
BENCHMARK(BM_CollectAll);

void BM_GenerateGroup(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(synthgen::generate_group(synthgen::GroupKind::NpdOrder, ++seed, 3, 9));
}
BENCHMARK(BM_GenerateGroup);

void BM_Embed(benchmark::State& state) {
  auto params = params_of(static_cast<int>(state.range(0)), 4);
  auto g = cli::graph_of(sample_group().buggy.front().program);
  for (auto _ : state) benchmark::DoNotOptimize(nn::embed(g, params));
  state.SetLabel(std::to_string(g.size()) + " nodes");
}
BENCHMARK(BM_Embed)->Arg(16)->Arg(64);

void BM_TrainEpoch(benchmark::State& state) {
  synthgen::Corpus corpus;
  corpus.groups.push_back(sample_group());
  auto groups = cli::training_groups(corpus);
  auto params = params_of(static_cast<int>(state.range(0)), 4);
  meta::TrainConfig config;
  config.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(meta::train(groups, params, config));
}
BENCHMARK(BM_TrainEpoch)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Rank(benchmark::State& state) {
  synthgen::Corpus corpus;
  corpus.groups.push_back(sample_group());
  auto candidates = cli::test_candidates(corpus, BugKind::NPD);
  auto params = params_of(16, 4);
  for (auto _ : state) benchmark::DoNotOptimize(cli::detect(params, candidates, 3));
  state.SetLabel(std::to_string(candidates.size()) + " slices");
}
BENCHMARK(BM_Rank)->Unit(benchmark::kMillisecond);

void BM_FindFeasiblePath(benchmark::State& state) {
  const auto& p = sample_group().buggy.front();
  auto slice = *collectors::slice_at(p.program, BugKind::NPD, p.idiom_point);
  auto params = params_of(16, 4);
  auto g = cli::graph_of(slice.program);
  auto scores = explain::statement_scores(g, nn::attention(g, params));
  for (auto _ : state) benchmark::DoNotOptimize(explain::find_feasible_path(slice, scores));
}
BENCHMARK(BM_FindFeasiblePath);

}  // namespace

BENCHMARK_MAIN();
