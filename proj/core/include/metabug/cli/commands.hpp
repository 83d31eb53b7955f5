#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metabug/cli/pipeline.hpp"
#include "metabug/explain/explain.hpp"

namespace metabug::cli {

/// Bad input data: unreadable or malformed files, unknown slice ids.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenCount {
  std::string kind;
  int groups = 0;
  int buggy = 0;
  int correct = 0;
};

/// Writes the corpus and `manifest.json` under `out`; returns per-kind counts.
std::vector<GenCount> cmd_gen(const std::vector<synthgen::GroupKind>& kinds, const Config& config,
                              const std::filesystem::path& out);
std::string counts_table(const std::vector<GenCount>& counts);

struct TrainOptions {
  /// Kind left out of training (the held-out kind).
  std::optional<BugKind> holdout;
  /// Write `checkpoint.json` every this many epochs; 0 disables it.
  int checkpoint_every = 0;
  /// Continue from `checkpoint.json` in the model directory.
  bool resume = false;
};

/// Trains on a corpus and writes `weights.json`, `config.txt` and `loss.csv`
/// into `model_dir`.
nn::ModelParams cmd_train(const std::filesystem::path& corpus, const Config& config,
                          const std::filesystem::path& model_dir, const TrainOptions& options = {});

/// `weights.json` inside a model directory, or the path itself.
nn::ModelParams load_model(const std::filesystem::path& model);

/// Named programs from files and directories. A corpus directory yields its
/// programs under their corpus names, each tagged with its group's bug kind;
/// other directories yield every `.mbl` file below them.
struct ProgramSet {
  std::vector<std::pair<std::string, minilang::Program>> programs;
  /// Per program, the only kind to collect, when it comes from a corpus.
  std::vector<std::optional<BugKind>> kinds;
};
ProgramSet load_programs(const std::vector<std::filesystem::path>& inputs);

std::vector<Candidate> candidates_of(const ProgramSet& set, std::optional<BugKind> kind);

DetectReport cmd_detect(const nn::ModelParams& params, const ProgramSet& set, std::optional<BugKind> kind,
                        int cutoff);

/// Attention of the slice's graph under the model, fed to the path search.
explain::TraceReport explain_slice(const nn::ModelParams& params, const collectors::TestSlice& slice,
                                   const explain::ExplainOptions& options = {});

/// Explains every reported slice, or only `slice_id`; throws DataError when
/// the id is not a reported slice.
std::vector<explain::TraceReport> cmd_explain(const nn::ModelParams& params, const DetectReport& report,
                                              const ProgramSet& set,
                                              const std::optional<std::string>& slice_id,
                                              const explain::ExplainOptions& options = {});

std::string traces_to_json(const std::vector<explain::TraceReport>& traces);
std::vector<explain::TraceReport> traces_from_json(const std::string& text);

struct EvalResult {
  Metrics total;
  std::vector<std::pair<BugKind, Metrics>> per_kind;
  int traces = 0;
  int traces_correct = 0;
};

/// Metrics per kind and in total; traces of known bugs are checked against
/// their ground truth.
EvalResult cmd_eval(const DetectReport& report, const std::filesystem::path& truth_dir,
                    const std::vector<explain::TraceReport>& traces, std::uint64_t seed);
std::string eval_to_json(const EvalResult& result);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace metabug::cli
