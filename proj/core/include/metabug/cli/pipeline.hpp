#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metabug/collectors/collectors.hpp"
#include "metabug/meta/meta.hpp"
#include "metabug/synthgen/corpus.hpp"

namespace metabug::cli {

using minilang::NodeId;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Config {
  int d = 64;
  int steps = 6;
  int read_steps = 3;
  double epsilon = meta::kDefaultEpsilon;
  double learning_rate = 1e-3;
  int epochs = 200;
  std::uint64_t seed = 1;
  int cutoff = 10;
  bool no_global_attention = false;
  bool no_relational_embedding = false;
  bool no_read_steps = false;
  int groups_per_kind = 2;
  int n_buggy = 3;
  int ratio = 9;
  double noise = synthgen::kDefaultNoise;

  nn::ModelConfig model() const;
  meta::TrainConfig training() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Applies one `key=value` setting; keys use the field names above.
void set_option(Config& config, const std::string& key, const std::string& value);
/// Parses `key = value` lines; `#` starts a comment.
Config parse_config(const std::string& text, Config base = {});
std::string render_config(const Config& config);

/// A collector slice together with the program it came from.
struct Candidate {
  std::string id;  // "<program>#<kind>@<bug_point>"
  std::string program;
  collectors::TestSlice slice;
};

std::string candidate_id(const std::string& program, BugKind kind, NodeId bug_point);

nn::GraphInput graph_of(const minilang::Program& program);

/// The slice a program contributes to training: the collector slice at its
/// idiom point, or for programs without the idiom the first slice of the kind
/// (the whole program if there is none).
collectors::TestSlice training_view(const synthgen::GeneratedProgram& program, BugKind kind);

/// Training groups from every corpus group whose bug kind is not `exclude`.
std::vector<meta::TrainingGroup> training_groups(const synthgen::Corpus& corpus,
                                                 std::optional<BugKind> exclude = std::nullopt);

/// "<group-id>/<buggy|correct>/<n>".
std::string program_name(const synthgen::InconsistencyGroup& g, bool buggy, std::size_t n);

/// Every slice of `kind` from every program of the groups of that kind.
std::vector<Candidate> test_candidates(const synthgen::Corpus& corpus, BugKind kind);

/// Slices of `kind` (all kinds when empty) of named programs.
std::vector<Candidate> collect_candidates(
    const std::vector<std::pair<std::string, minilang::Program>>& programs,
    std::optional<BugKind> kind = std::nullopt);

struct Detection {
  std::string id;
  std::string program;
  BugKind kind = BugKind::NPD;
  NodeId bug_point = minilang::kNoNode;
  double distance = 0;
  int rank = 0;  // 1-based within the kind
  bool reported = false;
};

struct DetectReport {
  int cutoff = 0;
  std::vector<Detection> entries;  // by kind, then rank
  std::vector<std::string> warnings;
};

/// Ranks the candidates of each kind separately and marks the top `cutoff`.
/// Kinds with fewer than two candidates are skipped with a warning.
DetectReport detect(const nn::ModelParams& params, const std::vector<Candidate>& candidates, int cutoff);

std::string report_to_json(const DetectReport& report);
DetectReport report_from_json(const std::string& text);
std::string report_to_text(const DetectReport& report);

struct KnownBug {
  std::string program;
  BugKind kind = BugKind::NPD;
  NodeId bug_point = minilang::kNoNode;
};

std::vector<KnownBug> known_bugs(const synthgen::Corpus& corpus, std::optional<BugKind> kind = std::nullopt);

struct Metrics {
  int bugs = 0;
  int reported = 0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  /// Mean TP when the ranking of each kind is shuffled uniformly.
  double random_tp = 0;
};

/// TP counts known bugs whose slice is reported; the baseline averages
/// `shuffles` seeded random rankings.
Metrics evaluate(const DetectReport& report, const std::vector<KnownBug>& bugs, std::uint64_t seed,
                 int shuffles = 1000);

std::string metrics_to_json(const Metrics& m);

}  // namespace metabug::cli
