#pragma once

#include <cstdint>
#include <vector>

#include "commtype/protocol.hpp"
#include "commtype/wellformedness.hpp"

namespace commtype {

struct ProjectionResult {
  std::vector<LocalType> locals;  // indexed by rank
};

/// Local view of `p` at `rank`. A message becomes a send at its source, a
/// receive at its destination, and disappears elsewhere; collectives, loops
/// and choices are kept at every rank. Rank and length expressions are
/// emitted as evaluated literals.
///
/// Requires check_wf(p, inst).ok() and 0 <= rank < p.num_procs; throws
/// std::out_of_range on a bad rank and EvalError if the protocol was not
/// well-formed.
LocalType project(const Protocol& p, const Instantiation& inst, std::int64_t rank);

ProjectionResult project_all(const Protocol& p, const Instantiation& inst);

}  // namespace commtype
