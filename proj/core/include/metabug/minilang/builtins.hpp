#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace metabug::minilang {

struct BuiltinSig {
  std::string_view name;
  int arity;
  bool may_fail;        // failure takes an implicit early exit from the procedure
  bool returns_handle;
  bool takes_handle;
};

std::span<const BuiltinSig> builtin_table();
std::optional<BuiltinSig> find_builtin(std::string_view name);
inline bool is_builtin(std::string_view name) { return find_builtin(name).has_value(); }

}  // namespace metabug::minilang
