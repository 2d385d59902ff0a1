#pragma once

// Exhaustive exploration of an ensemble of ranks under synchronous
// (unbuffered) semantics. Once the collective decisions are fixed by a tape,
// each rank is a linear action trace and a global state is the vector of
// per-rank positions. Two kinds of step exist:
//
//   p2p S R     rank S is at send(R,d,n) and rank R is at receive(S,d,n)
//   collective  every rank is at the same collective action
//
// A state with no enabled step where some rank still has work is a deadlock.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "commtype/expr.hpp"
#include "commtype/minimpi.hpp"
#include "commtype/protocol.hpp"
#include "commtype/typestate.hpp"

namespace commtype {

/// The actions a rank performs for one tape. `awaiting_decision` is set when
/// the rank reached a collective decision the tape could not supply; such a
/// rank is stuck once its actions run out. Finalize is not included.
struct RankTrace {
  std::vector<Action> actions;
  bool awaiting_decision = false;
};

/// Every rank unfolds its local type with its own cursor over `tape`.
std::vector<RankTrace> unfold(const std::vector<LocalType>& locals, const std::vector<bool>& tape);

/// Every rank erases `prog` with its own cursor over `tape`. `env` binds the
/// program parameters.
std::vector<RankTrace> erase_all(const MiniMpiProgram& prog, const Env& env, std::int64_t nprocs,
                                 const std::vector<bool>& tape);

struct GlobalStep {
  enum class Kind { PointToPoint, Collective };
  Kind kind = Kind::Collective;
  std::int64_t sender = -1;
  std::int64_t receiver = -1;

  bool operator==(const GlobalStep&) const = default;
};

std::string to_string(const GlobalStep& s);

using Positions = std::vector<std::size_t>;

/// Steps enabled at `pos`, point-to-point steps by ascending sender first.
std::vector<GlobalStep> enabled_steps(const std::vector<RankTrace>& traces, const Positions& pos);

bool all_done(const std::vector<RankTrace>& traces, const Positions& pos);

/// Applies `steps` from the initial state. Throws std::invalid_argument if a
/// step is not enabled where it is taken.
Positions replay(const std::vector<RankTrace>& traces, const std::vector<GlobalStep>& steps);

enum class ExplorationOrder { Forward, Reverse, Shuffled };

struct ExploreOptions {
  std::size_t state_limit = 1'000'000;
  ExplorationOrder order = ExplorationOrder::Forward;
  std::uint64_t seed = 0;  // for Shuffled
};

struct BlockedRank {
  std::int64_t rank = 0;
  std::optional<Action> head;  // empty: waiting for a collective decision

  bool operator==(const BlockedRank&) const = default;
};

std::string to_string(const BlockedRank& b);

struct AllDone {
  std::size_t states = 0;  // distinct states visited
  std::size_t tapes = 0;
};

struct Deadlock {
  std::vector<bool> tape;
  std::vector<GlobalStep> steps;  // from the initial state to `state`
  Positions state;
  std::vector<BlockedRank> blocked;
};

struct StateSpaceExceeded {
  std::size_t limit = 0;
  std::vector<bool> tape;
};

using Verdict = std::variant<AllDone, Deadlock, StateSpaceExceeded>;

/// Depth-first search of every interleaving of `traces`. `tape` is copied
/// into a Deadlock or StateSpaceExceeded verdict.
Verdict explore(const std::vector<RankTrace>& traces, const ExploreOptions& opts = {},
                const std::vector<bool>& tape = {});

/// explore(unfold(locals, tape), opts, tape).
Verdict simulate(const std::vector<LocalType>& locals, const std::vector<bool>& tape,
                 const ExploreOptions& opts = {});

/// Decides every tape rank 0 admits when loops run 0..max_loop_iters times
/// per visit (the tapes of enumerate_tapes over rank 0). The tapes are
/// searched jointly rather than one by one: for a fixed tape the enabled
/// steps never share a rank, so a single maximal schedule is conclusive, and
/// configurations reached under different tapes are merged. `states` in the
/// result counts joint states, `tapes` the tapes covered; `state_limit`
/// bounds the joint states. A Deadlock carries a complete tape and a step
/// sequence that replays on unfold(locals, tape).
Verdict explore_all_tapes(const std::vector<LocalType>& locals, int max_loop_iters,
                          const ExploreOptions& opts = {});

/// Number of tapes enumerate_tapes yields for `t`, saturating.
std::size_t count_tapes(const LocalType& t, int max_loop_iters);

/// Explores the erased traces of `prog` one tape at a time, exhaustively,
/// over the tapes rank 0's erasure admits. Stops at the first non-AllDone
/// verdict.
Verdict explore_program_tapes(const MiniMpiProgram& prog, const Env& env, std::int64_t nprocs,
                              int max_loop_iters, const ExploreOptions& opts = {});

/// Text form of a deadlock:
///
///   deadlock
///   tape 1 0
///   step p2p 0 1
///   step collective
///   blocked 2 receive(1,MPI_FLOAT,1)
void write_witness(std::ostream& os, const Deadlock& d);

struct Witness {
  std::vector<bool> tape;
  std::vector<GlobalStep> steps;
};

/// Reads the tape and steps back; `blocked` lines are informational and
/// skipped. Throws std::runtime_error on malformed input.
Witness read_witness(std::istream& is);

}  // namespace commtype
