#include "metabug/minilang/builtins.hpp"

#include <array>

namespace metabug::minilang {

namespace {
constexpr std::array<BuiltinSig, 6> kBuiltins{{
    {"open", 1, true, true, false},
    {"close", 1, false, false, true},
    {"parseInt", 1, true, false, false},
    {"length", 1, false, false, false},
    {"abs", 1, false, false, false},
    {"read_input", 0, false, false, false},
}};
}  // namespace

std::span<const BuiltinSig> builtin_table() { return kBuiltins; }

std::optional<BuiltinSig> find_builtin(std::string_view name) {
  for (const auto& b : kBuiltins)
    if (b.name == name) return b;
  return std::nullopt;
}

}  // namespace metabug::minilang
