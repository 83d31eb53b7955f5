#include "metabug/collectors/bug_kind.hpp"

#include <stdexcept>

namespace metabug {

const char* to_string(BugKind k) {
  switch (k) {
    case BugKind::NPD: return "NPD";
    case BugKind::AIO: return "AIO";
    case BugKind::NFE: return "NFE";
    case BugKind::LEAK: return "LEAK";
    case BugKind::RACE: return "RACE";
  }
  return "?";
}

BugKind parse_bug_kind(std::string_view name) {
  for (BugKind k : kAllBugKinds)
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown bug kind '" + std::string(name) + "'");
}

}  // namespace metabug
