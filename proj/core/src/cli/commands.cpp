#include "metabug/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "metabug/minilang/parser.hpp"
#include "metabug/synthgen/corpus.hpp"

namespace metabug::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

namespace {

synthgen::Corpus load_corpus(const fs::path& dir) {
  try {
    return synthgen::read_corpus(dir);
  } catch (const synthgen::CorpusError& e) {
    throw DataError(e.what());
  }
}

bool is_corpus(const fs::path& dir) {
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "group.json") return true;
  return false;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<GenCount> cmd_gen(const std::vector<synthgen::GroupKind>& kinds, const Config& config,
                              const fs::path& out) {
  synthgen::Corpus corpus = synthgen::generate_corpus(kinds, config.seed, config.groups_per_kind,
                                                      config.n_buggy, config.ratio, config.noise);
  try {
    synthgen::write_corpus(corpus, out);
  } catch (const synthgen::CorpusError& e) {
    throw DataError(e.what());
  }
  std::vector<GenCount> counts;
  for (auto kind : kinds) {
    GenCount c{synthgen::to_string(kind)};
    for (const auto& g : corpus.groups) {
      if (g.kind != kind) continue;
      ++c.groups;
      c.buggy += static_cast<int>(g.buggy.size());
      c.correct += static_cast<int>(g.correct.size());
    }
    counts.push_back(c);
  }
  ordered_json rows = ordered_json::array();
  for (const auto& c : counts)
    rows.push_back({{"kind", c.kind}, {"groups", c.groups}, {"buggy", c.buggy}, {"correct", c.correct}});
  ordered_json manifest = {{"seed", config.seed}, {"kinds", rows}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  return counts;
}

std::string counts_table(const std::vector<GenCount>& counts) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-24s %7s %7s %8s\n", "kind", "groups", "buggy", "correct");
  os << line;
  GenCount total{"total"};
  for (const auto& c : counts) {
    std::snprintf(line, sizeof line, "%-24s %7d %7d %8d\n", c.kind.c_str(), c.groups, c.buggy, c.correct);
    os << line;
    total.groups += c.groups;
    total.buggy += c.buggy;
    total.correct += c.correct;
  }
  std::snprintf(line, sizeof line, "%-24s %7d %7d %8d\n", "total", total.groups, total.buggy, total.correct);
  os << line;
  return os.str();
}

nn::ModelParams cmd_train(const fs::path& corpus_dir, const Config& config, const fs::path& model_dir,
                          const TrainOptions& options) {
  synthgen::Corpus corpus = load_corpus(corpus_dir);
  auto groups = training_groups(corpus, options.holdout);
  if (groups.empty()) throw DataError("no training groups in " + corpus_dir.string());

  nn::ModelParams params = nn::ModelParams::init(config.model());
  int start = 0;
  std::vector<std::string> rows;
  const fs::path checkpoint = model_dir / "checkpoint.json";
  const fs::path loss_file = model_dir / "loss.csv";
  if (options.resume && fs::exists(checkpoint)) {
    try {
      auto j = ordered_json::parse(read_text(checkpoint));
      start = j.at("epoch").get<int>();
      params = nn::params_from_json(j.at("params").dump());
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError(checkpoint.string() + ": " + e.what());
    }
    if (params.config != config.model())
      throw DataError(checkpoint.string() + ": model configuration differs from the requested one");
    if (fs::exists(loss_file)) {
      std::istringstream in(read_text(loss_file));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line))
        if (!line.empty() && std::stoi(line.substr(0, line.find(','))) <= start) rows.push_back(line);
    }
  }

  write_text(model_dir / "config.txt", render_config(config));
  std::ofstream loss(loss_file, std::ios::binary);
  if (!loss) throw DataError("cannot write " + loss_file.string());
  loss << "epoch,group,loss\n";
  for (const auto& r : rows) loss << r << "\n";

  meta::TrainHooks hooks;
  hooks.on_log = [&](const meta::LogEntry& e) {
    loss << e.epoch << "," << e.group << "," << format_double(e.loss) << "\n";
  };
  hooks.on_epoch = [&](int epoch, const nn::ModelParams& p) {
    if (options.checkpoint_every > 0 && epoch % options.checkpoint_every == 0) {
      ordered_json j = {{"epoch", epoch}, {"params", ordered_json::parse(nn::to_json(p))}};
      write_text(checkpoint, j.dump() + "\n");
    }
  };
  params = meta::train(groups, params, config.training(), hooks, start);
  loss.flush();
  nn::save_params(params, model_dir / "weights.json");
  return params;
}

nn::ModelParams load_model(const fs::path& model) {
  fs::path file = fs::is_directory(model) ? model / "weights.json" : model;
  try {
    return nn::params_from_json(read_text(file));
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

ProgramSet load_programs(const std::vector<fs::path>& inputs) {
  ProgramSet set;
  auto add_file = [&](const fs::path& file, const std::string& name) {
    std::string text = read_text(file);
    try {
      set.programs.emplace_back(name, minilang::parse_program(text));
    } catch (const std::exception& e) {
      throw DataError(file.string() + ": " + e.what());
    }
    set.kinds.push_back(std::nullopt);
  };
  for (const auto& in : inputs) {
    if (!fs::exists(in)) throw DataError(in.string() + ": no such file or directory");
    if (!fs::is_directory(in)) {
      add_file(in, in.string());
      continue;
    }
    if (is_corpus(in)) {
      synthgen::Corpus corpus = load_corpus(in);
      for (const auto& g : corpus.groups) {
        BugKind kind = synthgen::bug_kind_of(g.kind);
        for (std::size_t n = 0; n < g.buggy.size(); ++n) {
          set.programs.emplace_back(program_name(g, true, n), g.buggy[n].program);
          set.kinds.push_back(kind);
        }
        for (std::size_t n = 0; n < g.correct.size(); ++n) {
          set.programs.emplace_back(program_name(g, false, n), g.correct[n].program);
          set.kinds.push_back(kind);
        }
      }
      continue;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(in))
      if (e.is_regular_file() && e.path().extension() == ".mbl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      fs::path rel = fs::relative(f, in);
      rel.replace_extension();
      add_file(f, rel.generic_string());
    }
  }
  return set;
}

std::vector<Candidate> candidates_of(const ProgramSet& set, std::optional<BugKind> kind) {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < set.programs.size(); ++i) {
    std::optional<BugKind> k = set.kinds[i];
    if (k && kind && *k != *kind) continue;
    auto part = collect_candidates({set.programs[i]}, k ? k : kind);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

DetectReport cmd_detect(const nn::ModelParams& params, const ProgramSet& set, std::optional<BugKind> kind,
                        int cutoff) {
  return detect(params, candidates_of(set, kind), cutoff);
}

explain::TraceReport explain_slice(const nn::ModelParams& params, const collectors::TestSlice& slice,
                                   const explain::ExplainOptions& options) {
  nn::GraphInput g = graph_of(slice.program);
  return explain::find_feasible_path(slice, explain::statement_scores(g, nn::attention(g, params)), options);
}

std::vector<explain::TraceReport> cmd_explain(const nn::ModelParams& params, const DetectReport& report,
                                              const ProgramSet& set,
                                              const std::optional<std::string>& slice_id,
                                              const explain::ExplainOptions& options) {
  std::vector<const Detection*> wanted;
  for (const auto& e : report.entries)
    if (slice_id ? e.id == *slice_id : e.reported) wanted.push_back(&e);
  if (slice_id && wanted.empty()) throw DataError("slice '" + *slice_id + "' is not in the report");

  std::map<std::string, std::size_t> program_index;
  for (std::size_t i = 0; i < set.programs.size(); ++i) program_index[set.programs[i].first] = i;
  std::vector<explain::TraceReport> out;
  for (const Detection* e : wanted) {
    auto it = program_index.find(e->program);
    if (it == program_index.end()) throw DataError("program '" + e->program + "' of slice " + e->id + " not found");
    auto slice = collectors::slice_at(set.programs[it->second].second, e->kind, e->bug_point);
    if (!slice) throw DataError("slice '" + e->id + "' cannot be rebuilt from its program");
    explain::TraceReport r = explain_slice(params, *slice, options);
    r.slice_id = e->id;
    r.rank = e->rank;
    r.distance = e->distance;
    out.push_back(std::move(r));
  }
  return out;
}

std::string traces_to_json(const std::vector<explain::TraceReport>& traces) {
  ordered_json arr = ordered_json::array();
  for (const auto& t : traces) arr.push_back(ordered_json::parse(explain::report_to_json(t)));
  return arr.dump(2) + "\n";
}

std::vector<explain::TraceReport> traces_from_json(const std::string& text) {
  std::vector<explain::TraceReport> out;
  for (const auto& t : ordered_json::parse(text)) out.push_back(explain::report_from_json(t.dump()));
  return out;
}

EvalResult cmd_eval(const DetectReport& report, const fs::path& truth_dir,
                    const std::vector<explain::TraceReport>& traces, std::uint64_t seed) {
  synthgen::Corpus corpus = load_corpus(truth_dir);
  EvalResult r;
  for (BugKind kind : kAllBugKinds) {
    DetectReport part;
    part.cutoff = report.cutoff;
    for (const auto& e : report.entries)
      if (e.kind == kind) part.entries.push_back(e);
    auto bugs = known_bugs(corpus, kind);
    if (part.entries.empty() && bugs.empty()) continue;
    Metrics m = evaluate(part, bugs, util::derive_seed(seed, static_cast<std::uint64_t>(kind)));
    r.per_kind.emplace_back(kind, m);
    r.total.bugs += m.bugs;
    r.total.reported += m.reported;
    r.total.tp += m.tp;
    r.total.fp += m.fp;
    r.total.fn += m.fn;
    r.total.random_tp += m.random_tp;
  }

  std::map<std::string, const synthgen::GroundTruth*> truth_of;
  for (const auto& g : corpus.groups)
    for (std::size_t n = 0; n < g.buggy.size(); ++n) {
      const auto& t = *g.buggy[n].truth;
      truth_of[candidate_id(program_name(g, true, n), t.bug_kind, t.bug_point)] = &t;
    }
  for (const auto& t : traces) {
    auto it = truth_of.find(t.slice_id);
    if (it == truth_of.end()) continue;
    ++r.traces;
    r.traces_correct += explain::evaluate_trace(t.statements(), *it->second);
  }
  return r;
}

std::string eval_to_json(const EvalResult& r) {
  auto metrics = [](const Metrics& m) {
    return ordered_json{{"bugs", m.bugs}, {"reported", m.reported}, {"tp", m.tp},
                        {"fp", m.fp},     {"fn", m.fn},             {"random_tp", m.random_tp}};
  };
  ordered_json kinds = ordered_json::object();
  for (const auto& [k, m] : r.per_kind) kinds[to_string(k)] = metrics(m);
  ordered_json j = {{"total", metrics(r.total)},
                    {"per_kind", kinds},
                    {"traces", r.traces},
                    {"traces_correct", r.traces_correct},
                    {"trace_correct_rate", r.traces > 0 ? static_cast<double>(r.traces_correct) / r.traces : 0.0}};
  return j.dump(2) + "\n";
}

}  // namespace metabug::cli
