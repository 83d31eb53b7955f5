#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace metabug::graph {

inline constexpr int kIdentifierBuckets = 64;

/// Fixed token vocabulary shared by every graph. The index of a token in this
/// list is its embedding row.
const std::vector<std::string>& vocabulary();

/// Index of `token`, or the index of "unk" when it is not in the vocabulary.
int token_index(std::string_view token);

/// Token for an integer literal: lit0, lit1, lit2 or litN.
std::string literal_token(long long value);

}  // namespace metabug::graph
