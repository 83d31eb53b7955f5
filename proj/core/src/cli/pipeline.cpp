#include "metabug/cli/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <json.hpp>
#include <set>
#include <sstream>

#include "metabug/graph/pdg.hpp"
#include "metabug/util/random.hpp"

namespace metabug::cli {

using nlohmann::ordered_json;

nn::ModelConfig Config::model() const {
  nn::ModelConfig m;
  m.d = d;
  m.steps = steps;
  m.read_steps = no_read_steps ? 0 : read_steps;
  m.seed = seed;
  m.global_attention = !no_global_attention;
  m.relational = !no_relational_embedding;
  return m;
}

meta::TrainConfig Config::training() const {
  meta::TrainConfig t;
  t.learning_rate = learning_rate;
  t.epochs = epochs;
  t.epsilon = epsilon;
  return t;
}

void Config::validate() const {
  auto positive = [](bool ok, const char* key) {
    if (!ok) throw ConfigError(std::string(key) + " must be positive");
  };
  positive(d > 0, "d");
  positive(steps > 0, "steps");
  positive(read_steps > 0, "read_steps");
  positive(epsilon > 0, "epsilon");
  positive(learning_rate > 0, "learning_rate");
  if (epochs < 0) throw ConfigError("epochs must not be negative");
  positive(cutoff >= 1, "cutoff");
  positive(groups_per_kind > 0, "groups_per_kind");
  positive(n_buggy > 0, "n_buggy");
  if (ratio < 2) throw ConfigError("ratio must be at least 2");
  if (noise < 0 || noise > 1) throw ConfigError("noise must be within [0, 1]");
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("invalid value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("invalid value '" + value + "' for " + key);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_option(Config& c, const std::string& key, const std::string& value) {
  if (key == "d") c.d = parse_number<int>(key, value);
  else if (key == "steps") c.steps = parse_number<int>(key, value);
  else if (key == "read_steps") c.read_steps = parse_number<int>(key, value);
  else if (key == "epsilon") c.epsilon = parse_number<double>(key, value);
  else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
  else if (key == "epochs") c.epochs = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "cutoff") c.cutoff = parse_number<int>(key, value);
  else if (key == "no_global_attention") c.no_global_attention = parse_bool(key, value);
  else if (key == "no_relational_embedding") c.no_relational_embedding = parse_bool(key, value);
  else if (key == "no_read_steps") c.no_read_steps = parse_bool(key, value);
  else if (key == "groups_per_kind") c.groups_per_kind = parse_number<int>(key, value);
  else if (key == "n_buggy") c.n_buggy = parse_number<int>(key, value);
  else if (key == "ratio") c.ratio = parse_number<int>(key, value);
  else if (key == "noise") c.noise = parse_number<double>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

Config parse_config(const std::string& text, Config base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    set_option(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

std::string render_config(const Config& c) {
  std::ostringstream os;
  os.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "d = " << c.d << "\nsteps = " << c.steps << "\nread_steps = " << c.read_steps
     << "\nepsilon = " << c.epsilon << "\nlearning_rate = " << c.learning_rate << "\nepochs = " << c.epochs
     << "\nseed = " << c.seed << "\ncutoff = " << c.cutoff
     << "\nno_global_attention = " << b(c.no_global_attention)
     << "\nno_relational_embedding = " << b(c.no_relational_embedding)
     << "\nno_read_steps = " << b(c.no_read_steps) << "\ngroups_per_kind = " << c.groups_per_kind
     << "\nn_buggy = " << c.n_buggy << "\nratio = " << c.ratio << "\nnoise = " << c.noise << "\n";
  return os.str();
}

std::string candidate_id(const std::string& program, BugKind kind, NodeId bug_point) {
  return program + "#" + to_string(kind) + "@" + std::to_string(bug_point);
}

nn::GraphInput graph_of(const minilang::Program& program) {
  return nn::to_graph_input(graph::build_ipdg(program));
}

collectors::TestSlice training_view(const synthgen::GeneratedProgram& p, BugKind kind) {
  if (p.idiom_point != minilang::kNoNode) {
    if (auto s = collectors::slice_at(p.program, kind, p.idiom_point)) return *s;
  }
  auto all = collectors::collect(p.program, kind);
  if (!all.empty()) return all.front();
  collectors::TestSlice whole;
  whole.program = p.program;
  whole.bug_kind = kind;
  return whole;
}

std::vector<meta::TrainingGroup> training_groups(const synthgen::Corpus& corpus, std::optional<BugKind> exclude) {
  std::vector<meta::TrainingGroup> out;
  for (const auto& g : corpus.groups) {
    BugKind kind = synthgen::bug_kind_of(g.kind);
    if (exclude && kind == *exclude) continue;
    meta::TrainingGroup t;
    t.id = g.id;
    for (const auto& p : g.buggy) t.buggy.push_back(graph_of(training_view(p, kind).program));
    for (const auto& p : g.correct) t.correct.push_back(graph_of(training_view(p, kind).program));
    out.push_back(std::move(t));
  }
  return out;
}

std::string program_name(const synthgen::InconsistencyGroup& g, bool buggy, std::size_t n) {
  return g.id + (buggy ? "/buggy/" : "/correct/") + std::to_string(n);
}

std::vector<Candidate> test_candidates(const synthgen::Corpus& corpus, BugKind kind) {
  std::vector<std::pair<std::string, minilang::Program>> programs;
  for (const auto& g : corpus.groups) {
    if (synthgen::bug_kind_of(g.kind) != kind) continue;
    for (std::size_t n = 0; n < g.buggy.size(); ++n) programs.emplace_back(program_name(g, true, n), g.buggy[n].program);
    for (std::size_t n = 0; n < g.correct.size(); ++n)
      programs.emplace_back(program_name(g, false, n), g.correct[n].program);
  }
  return collect_candidates(programs, kind);
}

std::vector<Candidate> collect_candidates(const std::vector<std::pair<std::string, minilang::Program>>& programs,
                                          std::optional<BugKind> kind) {
  std::vector<Candidate> out;
  for (const auto& [name, program] : programs) {
    for (BugKind k : kAllBugKinds) {
      if (kind && k != *kind) continue;
      for (auto& s : collectors::collect(program, k)) {
        Candidate c;
        c.id = candidate_id(name, k, s.bug_point);
        c.program = name;
        c.slice = std::move(s);
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

DetectReport detect(const nn::ModelParams& params, const std::vector<Candidate>& candidates, int cutoff) {
  DetectReport report;
  report.cutoff = cutoff;
  for (BugKind kind : kAllBugKinds) {
    std::vector<const Candidate*> of_kind;
    for (const auto& c : candidates)
      if (c.slice.bug_kind == kind) of_kind.push_back(&c);
    if (of_kind.empty()) continue;
    if (of_kind.size() < 2) {
      report.warnings.push_back(std::string("skipping ") + to_string(kind) + ": fewer than two slices");
      continue;
    }
    std::vector<std::string> ids;
    std::vector<nn::Tensor> rows;
    for (const auto* c : of_kind) {
      ids.push_back(c->id);
      rows.push_back(nn::embed(graph_of(c->slice.program), params));
    }
    nn::Tensor raw({static_cast<int>(rows.size()), params.config.d});
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy(rows[i].data.begin(), rows[i].data.end(),
                raw.data.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(params.config.d)));
    std::map<std::string, const Candidate*> by_id;
    for (const auto* c : of_kind) by_id[c->id] = c;
    for (const auto& r : meta::rank_embeddings(ids, raw, params)) {
      const Candidate* c = by_id.at(r.id);
      report.entries.push_back(
          {r.id, c->program, kind, c->slice.bug_point, r.distance, r.rank, r.rank <= cutoff});
    }
  }
  return report;
}

std::string report_to_json(const DetectReport& report) {
  ordered_json entries = ordered_json::array();
  for (const auto& e : report.entries)
    entries.push_back({{"id", e.id},
                       {"program", e.program},
                       {"bug_kind", to_string(e.kind)},
                       {"bug_point", e.bug_point},
                       {"distance", e.distance},
                       {"rank", e.rank},
                       {"reported", e.reported}});
  ordered_json j = {{"cutoff", report.cutoff}, {"entries", entries}, {"warnings", report.warnings}};
  return j.dump(2) + "\n";
}

DetectReport report_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  DetectReport r;
  r.cutoff = j.at("cutoff").get<int>();
  for (const auto& e : j.at("entries"))
    r.entries.push_back({e.at("id").get<std::string>(), e.at("program").get<std::string>(),
                         parse_bug_kind(e.at("bug_kind").get<std::string>()), e.at("bug_point").get<NodeId>(),
                         e.at("distance").get<double>(), e.at("rank").get<int>(), e.at("reported").get<bool>()});
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

std::string report_to_text(const DetectReport& report) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  for (const auto& w : report.warnings) os << "warning: " << w << "\n";
  for (const auto& e : report.entries)
    if (e.reported) os << to_string(e.kind) << " #" << e.rank << "  " << e.distance << "  " << e.id << "\n";
  return os.str();
}

std::vector<KnownBug> known_bugs(const synthgen::Corpus& corpus, std::optional<BugKind> kind) {
  std::vector<KnownBug> out;
  for (const auto& g : corpus.groups)
    for (std::size_t n = 0; n < g.buggy.size(); ++n) {
      const auto& t = *g.buggy[n].truth;
      if (kind && t.bug_kind != *kind) continue;
      out.push_back({program_name(g, true, n), t.bug_kind, t.bug_point});
    }
  return out;
}

Metrics evaluate(const DetectReport& report, const std::vector<KnownBug>& bugs, std::uint64_t seed, int shuffles) {
  std::set<std::string> bug_ids;
  for (const auto& b : bugs) bug_ids.insert(candidate_id(b.program, b.kind, b.bug_point));
  Metrics m;
  m.bugs = static_cast<int>(bugs.size());
  std::map<BugKind, std::vector<bool>> ranked;  // per kind, whether each entry is a bug
  for (const auto& e : report.entries) {
    bool is_bug = bug_ids.count(e.id) > 0;
    ranked[e.kind].push_back(is_bug);
    if (!e.reported) continue;
    ++m.reported;
    if (is_bug) ++m.tp;
    else ++m.fp;
  }
  m.fn = m.bugs - m.tp;
  util::Rng rng(util::derive_seed(seed, 0xba5e));
  double total = 0;
  for (int s = 0; s < shuffles; ++s)
    for (auto& [kind, flags] : ranked) {
      rng.shuffle(flags);
      for (std::size_t i = 0; i < flags.size() && static_cast<int>(i) < report.cutoff; ++i) total += flags[i];
    }
  m.random_tp = shuffles > 0 ? total / shuffles : 0;
  return m;
}

std::string metrics_to_json(const Metrics& m) {
  ordered_json j = {{"bugs", m.bugs},       {"reported", m.reported}, {"tp", m.tp},
                    {"fp", m.fp},           {"fn", m.fn},             {"random_tp", m.random_tp}};
  return j.dump(2) + "\n";
}

}  // namespace metabug::cli
