#pragma once

#include <array>
#include <string>
#include <string_view>

namespace metabug {

enum class BugKind { NPD, AIO, NFE, LEAK, RACE };

inline constexpr std::array<BugKind, 5> kAllBugKinds = {BugKind::NPD, BugKind::AIO, BugKind::NFE,
                                                        BugKind::LEAK, BugKind::RACE};

const char* to_string(BugKind k);
/// Throws std::invalid_argument on an unknown name.
BugKind parse_bug_kind(std::string_view name);

}  // namespace metabug
