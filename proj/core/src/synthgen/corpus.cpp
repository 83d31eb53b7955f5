#include "metabug/synthgen/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "metabug/minilang/parser.hpp"

namespace metabug::synthgen {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

OutcomeKind parse_outcome_kind(const std::string& s) {
  for (auto k : {OutcomeKind::Ok, OutcomeKind::NullDeref, OutcomeKind::IndexOob, OutcomeKind::ParseFail,
                 OutcomeKind::Leak, OutcomeKind::RaceWindow, OutcomeKind::RuntimeError})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown outcome '" + s + "'");
}

ordered_json input_to_json(const ProgramInput& in) {
  ordered_json reads = ordered_json::object();
  for (const auto& [site, values] : in.reads) {
    ordered_json arr = ordered_json::array();
    for (const auto& v : values) {
      if (const auto* i = std::get_if<std::int64_t>(&v)) arr.push_back(*i);
      else arr.push_back(std::get<std::string>(v));
    }
    reads[std::to_string(site)] = arr;
  }
  ordered_json fails = ordered_json::object();
  for (const auto& [site, values] : in.open_fails) fails[std::to_string(site)] = values;
  return {{"reads", reads}, {"open_fails", fails}, {"schedule", in.schedule}};
}

ProgramInput input_from_json(const ordered_json& j) {
  ProgramInput in;
  for (const auto& [site, values] : j.at("reads").items()) {
    auto& q = in.reads[std::stoi(site)];
    for (const auto& v : values) {
      if (v.is_string()) q.emplace_back(v.get<std::string>());
      else q.emplace_back(v.get<std::int64_t>());
    }
  }
  for (const auto& [site, values] : j.at("open_fails").items())
    in.open_fails[std::stoi(site)] = values.get<std::vector<bool>>();
  in.schedule = j.at("schedule").get<std::vector<int>>();
  return in;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CorpusError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw CorpusError("cannot write " + p.string());
  out << text;
  if (!out) throw CorpusError("cannot write " + p.string());
}

}  // namespace

Corpus generate_corpus(const std::vector<GroupKind>& kinds, std::uint64_t seed, int groups_per_kind,
                       int n_buggy, int ratio, double noise) {
  if (groups_per_kind < 1) throw InvalidConfig("groups_per_kind must be at least 1");
  Corpus c;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    for (int g = 0; g < groups_per_kind; ++g)
      c.groups.push_back(generate_group(
          kinds[i], util::derive_seed(seed, 1000 * i + static_cast<std::uint64_t>(g)), n_buggy, ratio, noise));
  return c;
}

std::string truth_to_json(const GroundTruth& t) {
  ordered_json j = {{"bug_kind", to_string(t.bug_kind)},
                    {"bug_point", t.bug_point},
                    {"minimal_trace", t.minimal_trace},
                    {"full_trace", t.full_trace},
                    {"trigger_input", input_to_json(t.trigger_input)},
                    {"outcome", {{"kind", to_string(t.outcome.kind)},
                                 {"at", t.outcome.at},
                                 {"other", t.outcome.other},
                                 {"detail", t.outcome.detail}}}};
  return j.dump(2) + "\n";
}

GroundTruth truth_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  GroundTruth t;
  t.bug_kind = parse_bug_kind(j.at("bug_kind").get<std::string>());
  t.bug_point = j.at("bug_point").get<NodeId>();
  t.minimal_trace = j.at("minimal_trace").get<std::vector<NodeId>>();
  t.full_trace = j.at("full_trace").get<std::vector<NodeId>>();
  t.trigger_input = input_from_json(j.at("trigger_input"));
  const auto& o = j.at("outcome");
  t.outcome.kind = parse_outcome_kind(o.at("kind").get<std::string>());
  t.outcome.at = o.at("at").get<NodeId>();
  t.outcome.other = o.at("other").get<NodeId>();
  t.outcome.detail = o.at("detail").get<std::string>();
  return t;
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  for (const auto& g : corpus.groups) {
    fs::path root = dir / to_string(g.kind) / g.id;
    std::error_code ec;
    fs::create_directories(root / "buggy", ec);
    fs::create_directories(root / "correct", ec);
    if (ec) throw CorpusError("cannot create " + root.string() + ": " + ec.message());
    ordered_json meta = {{"kind", to_string(g.kind)}, {"id", g.id}, {"seed", g.seed}};
    auto dump = [&](const std::vector<GeneratedProgram>& set, const char* name) {
      ordered_json entries = ordered_json::array();
      for (std::size_t n = 0; n < set.size(); ++n) {
        const auto& p = set[n];
        write_file(root / name / (std::to_string(n) + ".mbl"), p.source);
        if (p.truth) write_file(root / name / (std::to_string(n) + ".truth.json"), truth_to_json(*p.truth));
        entries.push_back({{"n", n}, {"idiom_point", p.idiom_point}, {"noise", p.noise}});
      }
      meta[name] = entries;
    };
    dump(g.buggy, "buggy");
    dump(g.correct, "correct");
    write_file(root / "group.json", meta.dump(2) + "\n");
  }
}

Corpus read_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw CorpusError("corpus directory " + dir.string() + " does not exist");
  std::vector<fs::path> group_files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "group.json") group_files.push_back(e.path());
  std::sort(group_files.begin(), group_files.end());
  Corpus c;
  for (const auto& gf : group_files) {
    fs::path root = gf.parent_path();
    InconsistencyGroup g;
    auto load = [&](const fs::path& p) {
      try {
        return ordered_json::parse(read_file(p));
      } catch (const ordered_json::exception& e) {
        throw CorpusError(p.string() + ": " + e.what());
      }
    };
    ordered_json meta = load(gf);
    try {
      g.kind = parse_group_kind(meta.at("kind").get<std::string>());
      g.id = meta.at("id").get<std::string>();
      g.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const std::exception& e) {
      throw CorpusError(gf.string() + ": " + e.what());
    }
    auto fill = [&](const char* name, std::vector<GeneratedProgram>& set, bool buggy) {
      if (!meta.contains(name)) throw CorpusError(gf.string() + ": missing '" + name + "'");
      for (const auto& entry : meta[name]) {
        std::string n = std::to_string(entry.at("n").get<int>());
        fs::path src = root / name / (n + ".mbl");
        GeneratedProgram p;
        p.source = read_file(src);
        try {
          p.program = minilang::parse_program(p.source);
        } catch (const std::exception& e) {
          throw CorpusError(src.string() + ": " + e.what());
        }
        p.idiom_point = entry.at("idiom_point").get<NodeId>();
        p.noise = entry.at("noise").get<bool>();
        if (buggy) {
          fs::path tf = root / name / (n + ".truth.json");
          try {
            p.truth = truth_from_json(read_file(tf));
          } catch (const CorpusError&) {
            throw;
          } catch (const std::exception& e) {
            throw CorpusError(tf.string() + ": " + e.what());
          }
        }
        set.push_back(std::move(p));
      }
    };
    fill("buggy", g.buggy, true);
    fill("correct", g.correct, false);
    c.groups.push_back(std::move(g));
  }
  return c;
}

}  // namespace metabug::synthgen
