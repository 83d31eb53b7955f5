#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "metabug/minilang/ast.hpp"

namespace metabug::synthgen {

using minilang::kNoNode;
using minilang::NodeId;

using InputValue = std::variant<std::int64_t, std::string>;

/// Everything that is not fixed by the program text: values returned by each
/// `read_input` call site (consumed in order), failure flags for each `open`
/// call site, and the thread schedule.
struct ProgramInput {
  std::map<NodeId, std::vector<InputValue>> reads;
  std::map<NodeId, std::vector<bool>> open_fails;
  /// At step i the scheduler runs live thread schedule[i] % live-count
  /// (live threads ordered by creation); once exhausted, the oldest live thread.
  std::vector<int> schedule;

  friend bool operator==(const ProgramInput&, const ProgramInput&) = default;
};

enum class OutcomeKind { Ok, NullDeref, IndexOob, ParseFail, Leak, RaceWindow, RuntimeError };

const char* to_string(OutcomeKind k);

struct Outcome {
  OutcomeKind kind = OutcomeKind::Ok;
  /// Faulting statement; the `open` statement for leaks; the access for races.
  NodeId at = kNoNode;
  /// The racing write for RaceWindow.
  NodeId other = kNoNode;
  std::string detail;

  bool is_bug() const {
    return kind != OutcomeKind::Ok && kind != OutcomeKind::RuntimeError;
  }
  std::string describe() const;
};

/// Same kind at the same statement.
bool reproduces(const Outcome& got, const Outcome& want);

class StepBudgetExceeded : public std::runtime_error {
 public:
  StepBudgetExceeded() : std::runtime_error("step budget exceeded") {}
};

struct Execution {
  Outcome outcome;
  /// Executed statements in order, global initializers first, ending with the
  /// faulting statement if any.
  std::vector<NodeId> trace;
};

inline constexpr std::size_t kDefaultStepBudget = 100000;

/// Concrete interpretation with one statement per scheduler step.
Execution interpret(const minilang::Program& program, const ProgramInput& input,
                    std::size_t step_budget = kDefaultStepBudget);

/// Replays a statement sequence in isolation: statements run in the given
/// order with one environment per procedure, branch and loop conditions are
/// evaluated but do not steer, and a call only binds the callee's parameters.
/// Reading a variable that the sequence never assigned yields RuntimeError.
Outcome execute_trace(const minilang::Program& program, const std::vector<NodeId>& trace,
                      const ProgramInput& input);

/// Greedily drops statements while the replay still reproduces `target`, until
/// no single removal does (1-minimal).
std::vector<NodeId> minimize_trace(const minilang::Program& program,
                                   const std::vector<NodeId>& trace, const ProgramInput& input,
                                   const Outcome& target);

}  // namespace metabug::synthgen
