#pragma once

// MiniMPI: a small SPMD language standing in for C+MPI.
//
// One statement per line, braces for blocks:
//
//   param psize
//   init
//   comm_size                                  // binds np
//   comm_rank                                  // binds me
//   let lsize = psize / np
//   buffer local float[lsize + 2]
//   scatter root=0 buf=local len=lsize
//   collloop { ... }                           // data-dependent loop
//   collchoice { ... } else { ... }            // data-dependent branch
//   rankif (me % 2 == 0) { ... } else { ... }  // decided per rank
//   send peer=left buf=local len=1 [dtype=MPI_INT]
//   recv peer=right buf=local len=1
//   allreduce buf=err len=1 op=MAX
//   compute
//   finalize
//
// `me` and `np` are reserved. `init` must precede every other MPI statement
// and `finalize` must be the last top-level statement; both occur exactly
// once, at top level.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "commtype/decisions.hpp"
#include "commtype/diagnostic.hpp"
#include "commtype/expr.hpp"
#include "commtype/protocol.hpp"
#include "commtype/typestate.hpp"
#include "commtype/wellformedness.hpp"

namespace commtype {

struct Stmt;
using StmtList = std::vector<Stmt>;

struct InitStmt {};
struct CommSizeStmt {};
struct CommRankStmt {};
struct ComputeStmt {};
struct FinalizeStmt {};

struct LetStmt {
  std::string name;
  Expr value;
};

struct BufferStmt {
  std::string name;
  DataType element;
  Expr capacity;
};

/// send/recv/scatter/gather/bcast/allreduce. `target` is the peer or root
/// and is absent for allreduce. `dtype` overrides the buffer's element type
/// when given, as C's MPI calls pass the datatype separately.
struct CommStmt {
  ActionKind kind;
  std::optional<Expr> target;
  std::string buffer;
  Expr length;
  std::optional<DataType> dtype;
  ReduceOp op = ReduceOp::Max;
};

struct CollLoopStmt {
  StmtList body;
};

struct CollChoiceStmt {
  StmtList then_body;
  StmtList else_body;
};

struct RankIfStmt {
  Pred guard;
  StmtList then_body;
  StmtList else_body;
};

struct Stmt {
  std::variant<InitStmt, CommSizeStmt, CommRankStmt, ComputeStmt, FinalizeStmt, LetStmt,
               BufferStmt, CommStmt, CollLoopStmt, CollChoiceStmt, RankIfStmt>
      value;
  SourceLoc loc;
};

struct MiniMpiProgram {
  std::vector<std::string> params;  // bound at verification time
  StmtList body;
};

/// Throws SyntaxError, including for misplaced or missing init/finalize.
MiniMpiProgram parse_program(std::string_view text);

struct RankVerdict {
  std::int64_t rank = 0;
  std::vector<Diagnostic> diagnostics;

  bool compliant() const { return diagnostics.empty(); }
};

struct CheckReport {
  std::vector<Diagnostic> program;  // problems not tied to a single rank
  std::vector<RankVerdict> ranks;

  bool compliant() const;
};

/// Checks every rank of `prog` against its projection of `p`. Program
/// parameters are bound from `inst` first, then from `extra`. Requires
/// check_wf(p, inst).ok(). Never throws on verification failures; all are
/// reported as diagnostics.
CheckReport check_compliance(const MiniMpiProgram& prog, const Protocol& p,
                             const Instantiation& inst, const Env& extra = {});

/// The linear action sequence rank `rank` performs when collective loops and
/// choices resolve as `decisions` dictates. `env` binds the program
/// parameters and `np`; `me` is bound to `rank`. Throws TapeExhausted when
/// the decisions run out and EvalError on bad expressions.
std::vector<Action> erase_to_trace(const MiniMpiProgram& prog, std::int64_t rank, const Env& env,
                                   DecisionSource& decisions);

/// As erase_to_trace, appending to `out`; on TapeExhausted the actions
/// performed so far remain in `out`.
void erase_into(const MiniMpiProgram& prog, std::int64_t rank, const Env& env,
                DecisionSource& decisions, std::vector<Action>& out);

}  // namespace commtype
