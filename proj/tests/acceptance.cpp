// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Time bounds are wall-clock and enforced here.

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commtype/ensemble.hpp"
#include "commtype/minimpi.hpp"
#include "commtype/projection.hpp"
#include "commtype/typestate.hpp"
#include "commtype/wellformedness.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace commtype;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kGoldenSeconds = 1.0;
constexpr double kVerifySecondsPerSize = 1.0;
constexpr double kDeadlockSeconds = 10.0;
constexpr double kSoundnessSeconds = 60.0;
constexpr double kRoundTripSeconds = 5.0;
constexpr int kSoundnessSamples = 200;
constexpr int kSampledTapes = 20;
constexpr int kAlgebraSamples = 1000;
constexpr int kRoundTripSamples = 200;

std::string read_data(const std::string& name) {
  std::ifstream in(std::string(COMMTYPE_DATA_DIR) + "/" + name);
  if (!in) throw std::runtime_error("cannot read " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

int line_of(const std::vector<std::string>& lines, std::string_view needle, int nth = 1) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find(needle) != std::string::npos && --nth == 0) return static_cast<int>(i) + 1;
  }
  throw std::runtime_error("no line contains " + std::string(needle));
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back(what);
    }
  }
  void within(double elapsed, double bound, const std::string& what) {
    std::ostringstream ss;
    ss << what << " took " << elapsed << " s (bound " << bound << " s)";
    require(elapsed < bound, ss.str());
  }
};

// Local types for ranks 0 and 1 as listed alongside the global type, with
// size/3 evaluated at size 9.
const char* const kListedRank0 =
    "scatter(0,MPI_FLOAT,3).loop(send(2,MPI_FLOAT,1).receive(1,MPI_FLOAT,1)."
    "receive(2,MPI_FLOAT,1).send(1,MPI_FLOAT,1).allreduce(MPI_FLOAT,1,MPI_MAX).end)."
    "choice(gather(0,MPI_FLOAT,3).end,end).end";
const char* const kListedRank1 =
    "scatter(0,MPI_FLOAT,3).loop(receive(2,MPI_FLOAT,1).send(0,MPI_FLOAT,1)."
    "receive(2,MPI_FLOAT,1).send(0,MPI_FLOAT,1).allreduce(MPI_FLOAT,1,MPI_MAX).end)."
    "choice(gather(0,MPI_FLOAT,3).end,end).end";
// The listing for rank 1 repeats its first two loop atoms. Rank 1 takes part
// in four distinct messages of the loop: 2->1, 1->0, 1->2, 0->1.
const char* const kCorrectedRank1 =
    "scatter(0,MPI_FLOAT,3).loop(receive(2,MPI_FLOAT,1).send(0,MPI_FLOAT,1)."
    "send(2,MPI_FLOAT,1).receive(0,MPI_FLOAT,1).allreduce(MPI_FLOAT,1,MPI_MAX).end)."
    "choice(gather(0,MPI_FLOAT,3).end,end).end";

Outcome golden_projection() {
  Outcome o;
  auto start = Clock::now();
  Protocol p = parse_protocol(read_data("fdiff.cty"));
  Instantiation inst{{{"size", 9}}};
  ProjectionResult all = project_all(p, inst);
  double elapsed = seconds_since(start);

  o.require(all.locals.size() == 3, "expected three ranks");
  if (all.locals.size() != 3) return o;
  o.require(all.locals[0] == parse_local_type(kListedRank0), "rank 0 differs from the listing");
  o.require(all.locals[1] == parse_local_type(kCorrectedRank1),
            "rank 1 differs from the corrected listing");
  // Independent reference projection.
  for (std::int64_t r = 0; r < 3; ++r) {
    o.require(testing::local_tokens(all.locals[static_cast<std::size_t>(r)]) ==
                  testing::reference_projection(p.body, r, inst.values),
              "rank " + std::to_string(r) + " differs from the reference projection");
  }

  // The rank-1 listing as printed cannot be a projection: it loses the 1->2
  // and 0->1 messages and doubles 2->1 and 1->0.
  std::vector<LocalType> listed = all.locals;
  listed[1] = parse_local_type(kListedRank1);
  auto mismatches = testing::conservation_mismatches(p.body, listed, inst.values);
  o.require(!mismatches.empty(), "listed rank 1 unexpectedly conserves messages");
  o.require(all.locals[1] != listed[1], "listed rank 1 unexpectedly equals the projection");
  o.notes.push_back("rank 1 compared against the corrected listing; the literal listing breaks "
                    "message conservation on " +
                    std::to_string(mismatches.size()) + " rank pairs");
  o.within(elapsed, kGoldenSeconds, "projection");
  return o;
}

Outcome running_example() {
  Outcome o;
  Protocol p = parse_protocol(read_data("fdiff.cty"));
  MiniMpiProgram prog = parse_program(read_data("fdiff.mmp"));
  for (std::int64_t size : {3, 9, 300}) {
    auto start = Clock::now();
    CheckReport r = check_compliance(prog, p, {{{"size", size}}}, {{"psize", size}});
    double elapsed = seconds_since(start);
    o.require(r.compliant() && r.ranks.size() == 3,
              "size " + std::to_string(size) + " is not compliant at 3 ranks");
    o.within(elapsed, kVerifySecondsPerSize, "size " + std::to_string(size));
  }
  return o;
}

Outcome deadlock_mutation() {
  Outcome o;
  auto start = Clock::now();
  std::string source = read_data("fdiff.mmp");
  auto lines = lines_of(source);
  int open = line_of(lines, "rankif");
  int close = line_of(lines, "allreduce") - 2;  // closing brace of rankif
  if (lines[static_cast<std::size_t>(close - 1)] != "  }") {
    o.require(false, "unexpected layout of the bundled program");
    return o;
  }
  std::vector<std::string> flat(lines.begin(), lines.begin() + open - 1);
  for (const char* s : {"  send peer=left buf=local len=1", "  recv peer=right buf=local len=1",
                        "  recv peer=left buf=local len=1", "  send peer=right buf=local len=1"}) {
    flat.emplace_back(s);
  }
  flat.insert(flat.end(), lines.begin() + close, lines.end());

  Env env{{"psize", 9}};
  Verdict mutant = explore_program_tapes(parse_program(join(flat)), env, 3, 2);
  o.require(std::holds_alternative<Deadlock>(mutant), "flattened ordering does not deadlock");
  Verdict original = explore_program_tapes(parse_program(source), env, 3, 2);
  o.require(std::holds_alternative<AllDone>(original), "original ordering is not AllDone");
  if (const auto* done = std::get_if<AllDone>(&original)) {
    o.notes.push_back("original: " + std::to_string(done->tapes) + " tapes, " +
                      std::to_string(done->states) + " states");
  }
  o.within(seconds_since(start), kDeadlockSeconds, "simulation");
  return o;
}

Outcome soundness_sampling() {
  Outcome o;
  auto start = Clock::now();
  std::mt19937_64 rng(20240601);
  int done = 0, exceeded = 0, disagreements = 0;
  std::size_t tapes = 0;
  for (int i = 0; i < kSoundnessSamples; ++i) {
    auto g = testing::random_protocol(rng, {4, 3, 12});
    if (!check_wf(g.protocol, g.inst).ok()) {
      o.require(false, "generator produced an ill-formed protocol");
      continue;
    }
    auto locals = project_all(g.protocol, g.inst).locals;
    Verdict v = explore_all_tapes(locals, 2);
    done += std::holds_alternative<AllDone>(v);
    exceeded += std::holds_alternative<StateSpaceExceeded>(v);
    if (const auto* d = std::get_if<AllDone>(&v)) {
      tapes += d->tapes;
      o.require(d->tapes == count_tapes(locals[0], 2), "tape count mismatch");
    }
    // Cross-check sampled tapes with the reference unfolding and greedy run.
    for (int k = 0; k < kSampledTapes; ++k) {
      auto tape = testing::random_tape(locals[0], 2, rng);
      std::vector<testing::ReferenceTrace> traces;
      for (const auto& l : locals) traces.push_back(testing::reference_unfold(l, tape));
      disagreements += !testing::greedy_completes(traces);
    }
  }
  o.require(done == kSoundnessSamples, std::to_string(kSoundnessSamples - done) + " not AllDone");
  o.require(exceeded == 0, std::to_string(exceeded) + " exceeded the state limit");
  o.require(disagreements == 0,
            std::to_string(disagreements) + " tapes where the greedy reference got stuck");
  o.notes.push_back(std::to_string(kSoundnessSamples) + " protocols, " + std::to_string(tapes) +
                    " tapes");
  o.within(seconds_since(start), kSoundnessSeconds, "sampling");
  return o;
}

bool throws_typestate(const std::function<void()>& f) {
  try {
    f();
  } catch (const TypestateError&) {
    return true;
  }
  return false;
}

Outcome algebra_laws() {
  Outcome o;
  std::mt19937_64 rng(777);
  int violations = 0, checked = 0;
  auto law = [&](bool ok) {
    ++checked;
    violations += !ok;
  };
  for (int i = 0; i < kAlgebraSamples; ++i) {
    LocalType t = testing::random_local_type(rng);
    for (;;) {
      law(throws_typestate([&] { first(t); }) == !t.is_prefix());
      law(throws_typestate([&] { next(t); }) == t.is_end());
      law(throws_typestate([&] { loop_body(t); }) == !t.is_loop());
      law(throws_typestate([&] { choice_branches(t); }) == !t.is_choice());
      if (t.is_end()) break;
      if (t.is_prefix()) {
        Action a = action_of(first(t));
        StepResult r = step(t, a, {a.dtype, a.length});
        law(r.ok() && *r.type == next(t));
        // Allreduce names no rank; its distinguishing field is the operator.
        Action peer = a;
        if (a.kind == ActionKind::Allreduce) {
          peer.op = a.op == ReduceOp::Sum ? ReduceOp::Max : ReduceOp::Sum;
        } else {
          peer.rank += 1;
        }
        law(!step(t, peer, {a.dtype, a.length}).ok());
        Action len = a;
        len.length += 1;
        law(!step(t, len, {a.dtype, len.length}).ok());
      } else {
        Action any{ActionKind::Send, 0, DataType::Int, 0};
        law(!step(t, any, {DataType::Int, 0}).ok());
      }
      t = next(t);
    }
  }
  o.require(violations == 0, std::to_string(violations) + " of " + std::to_string(checked) +
                                 " law instances failed");
  o.notes.push_back(std::to_string(checked) + " law instances");
  return o;
}

struct Mutation {
  std::string name;
  std::string code;
  std::vector<std::string> program;
  SourceLoc loc;
};

bool reports(const CheckReport& r, const std::string& code, SourceLoc loc) {
  for (const auto& v : r.ranks) {
    for (const auto& d : v.diagnostics) {
      if (d.code == code && d.loc == loc) return true;
    }
  }
  return false;
}

Outcome diagnostic_precision() {
  Outcome o;
  Protocol p = parse_protocol(read_data("fdiff.cty"));
  const auto lines = lines_of(read_data("fdiff.mmp"));
  std::vector<Mutation> mutations;

  int send_left = line_of(lines, "send peer=left");
  {
    Mutation m{"peer", "peer-mismatch", lines, {send_left, 5}};
    m.program[static_cast<std::size_t>(send_left - 1)] = "    send peer=right buf=local len=1";
    mutations.push_back(m);
  }
  {
    Mutation m{"datatype", "dtype-mismatch", lines, {send_left, 5}};
    m.program[static_cast<std::size_t>(send_left - 1)] =
        "    send peer=left buf=local len=1 dtype=MPI_INT";
    mutations.push_back(m);
  }
  {
    int recv_right = line_of(lines, "recv peer=right");
    Mutation m{"length", "length-mismatch", lines, {recv_right, 5}};
    m.program[static_cast<std::size_t>(recv_right - 1)] = "    recv peer=right buf=local len=2";
    mutations.push_back(m);
  }
  {
    // Removing the loop statement leaves its body inline; the first
    // communication of the former body meets the loop in the type.
    int open = line_of(lines, "collloop {");
    int close = line_of(lines, "collchoice {") - 1;
    Mutation m{"missing collloop", "loop-boundary", lines, {send_left - 1, 5}};
    m.program.erase(m.program.begin() + close - 1);
    m.program.erase(m.program.begin() + open - 1);
    mutations.push_back(m);
  }
  {
    // Removing the choice leaves it unconsumed at finalize.
    int start = line_of(lines, "collchoice {");
    int fin = line_of(lines, "finalize");
    Mutation m{"missing choice", "residual-not-end", lines, {start, 1}};
    m.program.erase(m.program.begin() + start - 1, m.program.begin() + fin - 1);
    mutations.push_back(m);
  }

  for (const auto& m : mutations) {
    CheckReport r =
        check_compliance(parse_program(join(m.program)), p, {{{"size", 9}}}, {{"psize", 9}});
    o.require(reports(r, m.code, m.loc), m.name + ": no " + m.code + " at " +
                                             std::to_string(m.loc.line) + ":" +
                                             std::to_string(m.loc.column));
  }
  return o;
}

Outcome round_trip() {
  Outcome o;
  auto start = Clock::now();
  Protocol p = parse_protocol(read_data("fdiff.cty"));
  o.require(parse_protocol(print_protocol(p)) == p, "running example does not round-trip");
  std::mt19937_64 rng(31337);
  int failures = 0;
  for (int i = 0; i < kRoundTripSamples; ++i) {
    Protocol q = testing::random_protocol(rng).protocol;
    failures += !(parse_protocol(print_protocol(q)) == q);
  }
  o.require(failures == 0, std::to_string(failures) + " random protocols do not round-trip");
  o.within(seconds_since(start), kRoundTripSeconds, "round trips");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"golden projection", golden_projection},
      {"running example verification", running_example},
      {"deadlock mutation oracle", deadlock_mutation},
      {"checker soundness sampling", soundness_sampling},
      {"algebra laws", algebra_laws},
      {"negative diagnostic precision", diagnostic_precision},
      {"parser round trip", round_trip},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].name;
    for (const auto& n : o.notes) std::cout << "; " << n;
    std::cout << '\n';
  }
  return all ? 0 : 1;
}
