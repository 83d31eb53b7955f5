#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metabug/collectors/bug_kind.hpp"
#include "metabug/minilang/ast.hpp"
#include "metabug/synthgen/interpreter.hpp"
#include "metabug/util/random.hpp"

namespace metabug::synthgen {

enum class GroupKind {
  NpdOrder,
  NpdMissingCheck,
  AioOffByOne,
  NfeMissingGuard,
  LeakMisplacedClose,
  RaceUnguardedWrite,
};

inline constexpr std::array<GroupKind, 6> kAllGroupKinds = {
    GroupKind::NpdOrder,        GroupKind::NpdMissingCheck,    GroupKind::AioOffByOne,
    GroupKind::NfeMissingGuard, GroupKind::LeakMisplacedClose, GroupKind::RaceUnguardedWrite};

const char* to_string(GroupKind k);
GroupKind parse_group_kind(std::string_view name);
BugKind bug_kind_of(GroupKind k);

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GroundTruth {
  BugKind bug_kind = BugKind::NPD;
  /// The dereference, array operation or parse call; the `open` for leaks;
  /// the racing write for races.
  NodeId bug_point = kNoNode;
  std::vector<NodeId> minimal_trace;
  std::vector<NodeId> full_trace;
  ProgramInput trigger_input;
  Outcome outcome;
};

struct GeneratedProgram {
  minilang::Program program;
  std::string source;
  std::optional<GroundTruth> truth;  // buggy programs only
  /// Statement carrying the group's idiom (the bug point in buggy programs);
  /// kNoNode for noise programs that lack the idiom.
  NodeId idiom_point = kNoNode;
  bool noise = false;
};

struct InconsistencyGroup {
  GroupKind kind = GroupKind::NpdOrder;
  std::string id;
  std::uint64_t seed = 0;
  std::vector<GeneratedProgram> buggy;    // P
  std::vector<GeneratedProgram> correct;  // Q
};

inline constexpr double kDefaultNoise = 0.05;

/// Deterministic under `seed`. Produces n_buggy buggy and n_buggy * ratio
/// correct programs. Throws InvalidConfig if n_buggy < 1 or ratio < 2.
InconsistencyGroup generate_group(GroupKind kind, std::uint64_t seed, int n_buggy, int ratio,
                                  double noise = kDefaultNoise);

/// Computes the ground truth of a buggy program from its trigger input.
/// Throws std::logic_error if the input does not trigger a bug of `kind`.
GroundTruth derive_truth(const minilang::Program& program, BugKind kind, const ProgramInput& input,
                         NodeId bug_point);

/// A random input for the battery: ints in [-3, 8] or strings from
/// {"", numerals} per read site, random open failures and a random schedule.
ProgramInput random_input(const minilang::Program& program, util::Rng& rng);

}  // namespace metabug::synthgen
