#include "metabug/graph/vocab.hpp"

#include <unordered_map>

#include "metabug/minilang/builtins.hpp"

namespace metabug::graph {

namespace {

std::vector<std::string> make_vocabulary() {
  std::vector<std::string> v = {
      "unk",
      // statements
      "global", "var", "assign", "if", "while", "call", "return", "spawn",
      // expressions
      "+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||", "neg", "not",
      "index", "new", "lit0", "lit1", "lit2", "litN", "str", "str_empty", "null",
      // parameter-passing vertices
      "entry", "actual-in", "actual-out", "formal-in", "formal-out", "meta"};
  for (const auto& b : minilang::builtin_table()) v.emplace_back(b.name);
  for (int i = 0; i < kIdentifierBuckets; ++i) v.push_back("id" + std::to_string(i));
  return v;
}

}  // namespace

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> vocab = make_vocabulary();
  return vocab;
}

int token_index(std::string_view token) {
  static const std::unordered_map<std::string, int> index = [] {
    std::unordered_map<std::string, int> m;
    const auto& v = vocabulary();
    for (std::size_t i = 0; i < v.size(); ++i) m.emplace(v[i], static_cast<int>(i));
    return m;
  }();
  auto it = index.find(std::string(token));
  return it == index.end() ? 0 : it->second;
}

std::string literal_token(long long value) {
  if (value == 0) return "lit0";
  if (value == 1) return "lit1";
  if (value == 2) return "lit2";
  return "litN";
}

}  // namespace metabug::graph
