#pragma once

#include <cstdint>
#include <vector>

#include "commtype/diagnostic.hpp"
#include "commtype/expr.hpp"
#include "commtype/protocol.hpp"

namespace commtype {

/// Concrete values for a protocol's Pi binders.
struct Instantiation {
  Env values;
};

struct WfReport {
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return diagnostics.empty(); }
};

/// Bounds on the process count, exclusive on both ends.
inline constexpr std::int64_t kMinProcsExclusive = 1;
inline constexpr std::int64_t kMaxProcsExclusive = 32768;

/// Checks that `p` is meaningful under `inst`:
///  - every binder has exactly one binding, and the value satisfies the
///    binder's kind (binders are checked in order, so later refinements may
///    mention earlier binders);
///  - 1 < nprocs < 32768;
///  - ranks (message endpoints, collective roots) evaluate into [0, nprocs);
///  - no message has src == dst;
///  - lengths evaluate to >= 0;
///  - protocol expressions mention only Pi-bound names (never `me`/`np`).
/// Evaluation failures become diagnostics; this never throws.
WfReport check_wf(const Protocol& p, const Instantiation& inst);

}  // namespace commtype
