#pragma once

// Reference implementations written against the AST alone. They share no
// code with the library's projection, unfolding or exploration, so agreement
// between the two is evidence rather than tautology.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "commtype/expr.hpp"
#include "commtype/protocol.hpp"

namespace commtype::testing {

/// Flat token form of a local type: atoms as `send(2,MPI_FLOAT,1)` etc.,
/// `loop{`, `choice{`, `|` between branches and `}`.
std::vector<std::string> local_tokens(const LocalType& t);

/// What projecting `g` onto `rank` must produce, in local_tokens form.
std::vector<std::string> reference_projection(const GlobalType& g, std::int64_t rank,
                                              const Env& env);

/// Every decision sequence for `t` with loops taken 0..max_iters times, built
/// as a product over the type's structure.
std::vector<std::vector<bool>> reference_tapes(const LocalType& t, int max_iters);

/// One of the tapes reference_tapes would list, drawn at random.
std::vector<bool> random_tape(const LocalType& t, int max_iters, std::mt19937_64& rng);

/// One rank's actions under `tape`, as strings: `send 1 MPI_FLOAT 3`,
/// `recv 0 MPI_INT 1`, or `coll <atom>`. `stuck` is set when the tape runs out.
struct ReferenceTrace {
  std::vector<std::string> actions;
  bool stuck = false;
};
ReferenceTrace reference_unfold(const LocalType& t, const std::vector<bool>& tape);

/// Runs traces by always taking the first enabled synchronisation. With
/// linear traces the system is confluent, so this decides deadlock.
bool greedy_completes(const std::vector<ReferenceTrace>& traces);

/// For each ordered rank pair, (messages in `g`, sends at src, receives at
/// dst), counting AST occurrences. Pairs where the three disagree are
/// returned.
std::map<std::pair<std::int64_t, std::int64_t>, std::vector<int>> conservation_mismatches(
    const GlobalType& g, const std::vector<LocalType>& locals, const Env& env);

}  // namespace commtype::testing
