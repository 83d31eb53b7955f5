#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>

#include "metabug/cli/commands.hpp"
#include "metabug/synthgen/corpus.hpp"

using namespace metabug;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

/// Model and data settings shared by every subcommand. Flags override the
/// config file, which overrides METABUG_SEED.
struct Settings {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "random seed (falls back to METABUG_SEED)");
    app->add_option("--set", sets, "override a config key, key=value");
    for (const char* key : {"d", "steps", "read_steps", "epsilon", "learning_rate", "epochs", "cutoff",
                            "groups_per_kind", "n_buggy", "ratio", "noise"}) {
      std::string flag = std::string("--") + key;
      std::replace(flag.begin() + 2, flag.end(), '_', '-');
      app->add_option_function<std::string>(flag, [this, key](const std::string& v) { flags[key] = v; },
                                            std::string("config key ") + key);
    }
    for (const char* key : {"no_global_attention", "no_relational_embedding", "no_read_steps"}) {
      std::string flag = std::string("--") + key;
      std::replace(flag.begin() + 2, flag.end(), '_', '-');
      app->add_flag_callback(flag, [this, key] { flags[key] = "true"; }, "ablation switch");
    }
  }

  cli::Config resolve() const {
    cli::Config c;
    if (const char* env = std::getenv("METABUG_SEED")) cli::set_option(c, "seed", env);
    if (!config_file.empty()) c = cli::parse_config(cli::read_text(config_file), c);
    for (const auto& [k, v] : flags) cli::set_option(c, k, v);
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw cli::ConfigError("--set expects key=value, got '" + s + "'");
      cli::set_option(c, s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

std::optional<BugKind> parse_kind(const std::string& s) {
  if (s.empty() || s == "all") return std::nullopt;
  try {
    return parse_bug_kind(s);
  } catch (const std::exception&) {
    throw cli::ConfigError("unknown bug kind '" + s + "'");
  }
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    cli::write_text(path, text);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Meta bug detector for MBL programs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "metabug 0.1.0");

  Settings settings;

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  settings.attach(gen);
  std::vector<std::string> gen_kinds;
  std::string gen_out;
  gen->add_option("--kinds", gen_kinds, "group kinds (default: all)")->delimiter(',');
  gen->add_option("--out,-o", gen_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model on a corpus");
  settings.attach(train);
  std::string train_corpus, train_model, train_holdout;
  cli::TrainOptions train_options;
  train->add_option("--corpus", train_corpus, "corpus directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--model,-o", train_model, "model output directory")->required();
  train->add_option("--holdout", train_holdout, "bug kind left out of training");
  train->add_option("--checkpoint-every", train_options.checkpoint_every, "epochs between checkpoints");
  train->add_flag("--resume", train_options.resume, "continue from the model directory's checkpoint");

  auto* det = app.add_subcommand("detect", "rank the test slices of programs");
  settings.attach(det);
  std::string det_model, det_kind, det_out, det_text;
  std::vector<std::string> det_inputs;
  det->add_option("--model,-m", det_model, "model directory or weights file")->required();
  det->add_option("--kind", det_kind, "only this bug kind");
  det->add_option("--out,-o", det_out, "JSON report path (default: stdout)");
  det->add_option("--text", det_text, "also write a text report here");
  det->add_option("inputs", det_inputs, "program files, directories or a corpus")->required();

  auto* exp = app.add_subcommand("explain", "explain the reported slices");
  settings.attach(exp);
  std::string exp_model, exp_report, exp_slice, exp_out, exp_text;
  std::vector<std::string> exp_inputs;
  exp->add_option("--model,-m", exp_model, "model directory or weights file")->required();
  exp->add_option("--report,-r", exp_report, "detect report")->required()->check(CLI::ExistingFile);
  exp->add_option("--slice", exp_slice, "only this slice id");
  exp->add_option("--out,-o", exp_out, "JSON traces path (default: stdout)");
  exp->add_option("--text", exp_text, "also write text traces here");
  exp->add_option("inputs", exp_inputs, "the programs given to detect")->required();

  auto* ev = app.add_subcommand("eval", "score a detect report against ground truth");
  settings.attach(ev);
  std::string ev_report, ev_truth, ev_traces, ev_out;
  ev->add_option("--report,-r", ev_report, "detect report")->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", ev_truth, "corpus directory with ground truth")->required();
  ev->add_option("--traces", ev_traces, "explain output to check")->check(CLI::ExistingFile);
  ev->add_option("--out,-o", ev_out, "JSON metrics path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  cli::Config config = settings.resolve();

  auto load_report = [](const std::string& path) {
    try {
      return cli::report_from_json(cli::read_text(path));
    } catch (const nlohmann::json::exception& e) {
      throw cli::DataError(path + ": " + e.what());
    }
  };

  if (*gen) {
    std::vector<synthgen::GroupKind> kinds;
    for (const auto& k : gen_kinds) {
      try {
        kinds.push_back(synthgen::parse_group_kind(k));
      } catch (const std::exception&) {
        throw cli::ConfigError("unknown group kind '" + k + "'");
      }
    }
    if (kinds.empty()) kinds.assign(synthgen::kAllGroupKinds.begin(), synthgen::kAllGroupKinds.end());
    std::cout << cli::counts_table(cli::cmd_gen(kinds, config, gen_out));
  } else if (*train) {
    train_options.holdout = parse_kind(train_holdout);
    cli::cmd_train(train_corpus, config, train_model, train_options);
    std::cout << "wrote " << (fs::path(train_model) / "weights.json").string() << "\n";
  } else if (*det) {
    std::optional<BugKind> kind = parse_kind(det_kind);
    auto params = cli::load_model(det_model);
    std::vector<fs::path> inputs(det_inputs.begin(), det_inputs.end());
    auto report = cli::cmd_detect(params, cli::load_programs(inputs), kind, config.cutoff);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    emit(cli::report_to_json(report), det_out);
    if (!det_text.empty()) cli::write_text(det_text, cli::report_to_text(report));
  } else if (*exp) {
    auto params = cli::load_model(exp_model);
    auto report = load_report(exp_report);
    std::vector<fs::path> inputs(exp_inputs.begin(), exp_inputs.end());
    explain::ExplainOptions options;
    options.seed = config.seed;
    std::optional<std::string> slice;
    if (!exp_slice.empty()) slice = exp_slice;
    auto traces = cli::cmd_explain(params, report, cli::load_programs(inputs), slice, options);
    emit(cli::traces_to_json(traces), exp_out);
    if (!exp_text.empty()) {
      std::string text;
      for (const auto& t : traces) text += explain::report_to_text(t) + "\n";
      cli::write_text(exp_text, text);
    }
  } else if (*ev) {
    auto report = load_report(ev_report);
    std::vector<explain::TraceReport> traces;
    if (!ev_traces.empty()) {
      try {
        traces = cli::traces_from_json(cli::read_text(ev_traces));
      } catch (const nlohmann::json::exception& e) {
        throw cli::DataError(ev_traces + ": " + e.what());
      }
    }
    emit(cli::eval_to_json(cli::cmd_eval(report, ev_truth, traces, config.seed)), ev_out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const cli::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const synthgen::CorpusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const nn::ShapeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
