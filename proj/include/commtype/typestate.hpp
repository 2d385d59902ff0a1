#pragma once

// Partial functions over local types and the stepping relation a program's
// communication statements must satisfy:
//
//   first(prefix(c, t))      = c
//   next(prefix(c, t))       = t
//   next(loop(b, k))         = k
//   next(choice(x, y, k))    = k
//   loop_body(loop(b, k))    = b
//   choice_branches(choice(x, y, k)) = (x, y)
//
// Every other application is undefined and raises TypestateError.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "commtype/protocol.hpp"

namespace commtype {

enum class ActionKind { Send, Receive, Scatter, Gather, Bcast, Allreduce, Finalize };

std::string to_string(ActionKind k);

/// One concrete communication performed by a rank. `rank` is the peer for
/// send/receive and the root for scatter/gather/bcast; unused otherwise.
struct Action {
  ActionKind kind = ActionKind::Finalize;
  std::int64_t rank = 0;
  DataType dtype = DataType::Int;
  std::int64_t length = 0;
  ReduceOp op = ReduceOp::Max;

  bool operator==(const Action&) const = default;
};

std::string to_string(const Action& a);

/// Converts an atom whose rank/length fields are literals (as produced by
/// projection). Throws std::invalid_argument otherwise.
Action action_of(const LocalAtom& atom);

/// The program-side facts behind a buffer argument.
struct BufferFacts {
  DataType element = DataType::Float;
  std::int64_t capacity = 0;
};

enum class Boundary { Loop, Choice };

struct NotAPrefix {
  std::string expected;  // what the operation needed, e.g. "a prefix node"
  std::string found;     // what the type actually was
};

struct FieldDiff {
  std::string field;  // "action", "peer", "root", "dtype", "length", "op"
  std::string expected;
  std::string actual;
};

struct HeadMismatch {
  LocalAtom expected;
  Action actual;
  std::vector<FieldDiff> diffs;
};

struct AtCollectiveBoundary {
  Boundary boundary;
  Action actual;
};

struct ResidualNotEnd {
  LocalType residual;
};

struct BufferObligation {
  std::string field;  // "type" or "capacity"
  std::string message;
};

/// Why a typestate operation failed. `code()` is stable and machine-readable.
struct StepError {
  std::variant<NotAPrefix, HeadMismatch, AtCollectiveBoundary, ResidualNotEnd, BufferObligation>
      detail;

  std::string code() const;
  std::string message() const;
};

class TypestateError : public std::logic_error {
 public:
  explicit TypestateError(StepError error);
  const StepError& error() const { return error_; }

 private:
  StepError error_;
};

const LocalAtom& first(const LocalType& t);
const LocalType& next(const LocalType& t);
const LocalType& loop_body(const LocalType& t);
std::pair<LocalType, LocalType> choice_branches(const LocalType& t);

/// Outcome of one step: the continuation, or every obligation that failed.
/// A head mismatch and a buffer failure are reported side by side.
struct StepResult {
  std::optional<LocalType> type;
  std::vector<StepError> errors;

  bool ok() const { return errors.empty(); }
};

/// Consumes the head atom of `t` with `action`. Succeeds iff `t` is a prefix
/// whose head equals `action` field by field and `buffer` holds elements of
/// the action's datatype with capacity for its length; the result is next(t).
/// `action` must not be Finalize (see check_finalized).
StepResult step(const LocalType& t, const Action& action, const BufferFacts& buffer);

/// The finalize obligation: the residual type must be `end`.
std::optional<StepError> check_finalized(const LocalType& t);

}  // namespace commtype
