#include "commtype/ensemble.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace commtype {

namespace {

bool is_collective(ActionKind k) {
  return k == ActionKind::Scatter || k == ActionKind::Gather || k == ActionKind::Bcast ||
         k == ActionKind::Allreduce;
}

void unfold_into(const LocalType& t, DecisionSource& decisions, std::vector<Action>& out) {
  LocalType cur = t;
  while (!cur.is_end()) {
    const auto& v = cur.node().value;
    if (const auto* p = std::get_if<PrefixNode<LocalAtom>>(&v)) {
      out.push_back(action_of(p->atom));
    } else if (const auto* l = std::get_if<LoopNode<LocalAtom>>(&v)) {
      for (int i = 0; decisions.decide(DecisionKind::LoopContinue, i); ++i) {
        unfold_into(l->body, decisions, out);
      }
    } else {
      const auto& c = std::get<ChoiceNode<LocalAtom>>(v);
      unfold_into(decisions.decide(DecisionKind::Choice, 0) ? c.on_true : c.on_false, decisions,
                  out);
    }
    cur = next(cur);
  }
}

struct PositionsHash {
  std::size_t operator()(const Positions& p) const {
    std::size_t h = p.size();
    for (std::size_t x : p) h = h * 1'000'003u ^ std::hash<std::size_t>{}(x);
    return h;
  }
};

const Action* head(const std::vector<RankTrace>& traces, const Positions& pos, std::size_t r) {
  return pos[r] < traces[r].actions.size() ? &traces[r].actions[pos[r]] : nullptr;
}

Positions take_step(const Positions& pos, const GlobalStep& s) {
  Positions out = pos;
  if (s.kind == GlobalStep::Kind::Collective) {
    for (auto& p : out) ++p;
  } else {
    ++out[static_cast<std::size_t>(s.sender)];
    ++out[static_cast<std::size_t>(s.receiver)];
  }
  return out;
}

std::vector<BlockedRank> blocked_ranks(const std::vector<RankTrace>& traces, const Positions& pos) {
  std::vector<BlockedRank> out;
  for (std::size_t r = 0; r < traces.size(); ++r) {
    if (const Action* a = head(traces, pos, r)) {
      out.push_back({static_cast<std::int64_t>(r), *a});
    } else if (traces[r].awaiting_decision) {
      out.push_back({static_cast<std::int64_t>(r), std::nullopt});
    }
  }
  return out;
}

Verdict explore_tapes(const std::vector<std::vector<bool>>& tapes,
                      const std::function<std::vector<RankTrace>(const std::vector<bool>&)>& traces,
                      const ExploreOptions& opts) {
  AllDone total;
  for (const auto& tape : tapes) {
    Verdict v = explore(traces(tape), opts, tape);
    const auto* done = std::get_if<AllDone>(&v);
    if (!done) return v;
    total.states += done->states;
    ++total.tapes;
  }
  return total;
}

// Search over every tape at once. Each rank runs its local type directly,
// reading decisions from a shared window; a shadow of rank 0's decision
// structure decides new entries, which keeps the loop bound and the set of
// tapes identical to enumerate_tapes over rank 0. Enabled steps never share
// a rank, so for a fixed tape they commute and one maximal schedule decides
// the outcome; decisions are only taken when no step is enabled. States
// reached under different tapes are merged.
class JointSearch {
 public:
  JointSearch(const std::vector<LocalType>& locals, int max_loop_iters, const ExploreOptions& opts)
      : locals_(locals), max_iters_(max_loop_iters), opts_(opts), rng_(opts.seed) {}

  Verdict run();

 private:
  using Node = TypeNode<LocalAtom>;

  struct Item {
    const Node* node = nullptr;
    bool again = false;  // loop head waiting for its next decision
    int iterations = 0;  // shadow only

    bool operator==(const Item&) const = default;
  };
  using Stack = std::vector<Item>;

  enum class Status { AtAction, Done, NeedsDecision };

  struct State {
    std::vector<Stack> ranks;
    std::vector<std::size_t> offset;  // next window entry each rank reads
    std::vector<bool> window;
    Stack shadow;
  };

  struct Edge {
    State target;
    std::vector<GlobalStep> steps;
    std::optional<bool> decision;
  };

  struct Frame {
    std::vector<Edge> edges;
    std::size_t next = 0;
  };

  static Status settle(Stack& st, std::size_t& off, const std::vector<bool>& window);
  static void settle_shadow(Stack& st);
  std::vector<bool> shadow_options(const Stack& st) const;
  static void decide_shadow(Stack& st, bool value);
  static const Node& cont_of(const Node& n);
  void normalise(State& s) const;
  std::string key(const State& s) const;
  std::vector<Edge> successors(const State& s, std::vector<Status>& status) const;
  std::vector<bool> complete_tape(const State& s) const;
  Verdict deadlock(const State& s) const;

  const std::vector<LocalType>& locals_;
  int max_iters_;
  const ExploreOptions& opts_;
  mutable std::mt19937_64 rng_;
  std::vector<GlobalStep> path_steps_;
  std::vector<bool> path_tape_;
};

const JointSearch::Node& JointSearch::cont_of(const Node& n) {
  return std::visit(
      [](const auto& x) -> const Node& {
        using X = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<X, EndNode<LocalAtom>>) {
          throw std::logic_error("end has no continuation");
        } else {
          return x.cont.node();
        }
      },
      n.value);
}

JointSearch::Status JointSearch::settle(Stack& st, std::size_t& off,
                                        const std::vector<bool>& window) {
  while (!st.empty()) {
    Item top = st.back();
    const auto& v = top.node->value;
    if (top.again || std::holds_alternative<ChoiceNode<LocalAtom>>(v)) {
      if (off == window.size()) return Status::NeedsDecision;
      bool b = window[off++];
      if (top.again) {
        const auto& l = std::get<LoopNode<LocalAtom>>(v);
        if (b) {
          st.push_back({&l.body.node()});
        } else {
          st.back() = {&l.cont.node()};
        }
      } else {
        const auto& c = std::get<ChoiceNode<LocalAtom>>(v);
        st.back() = {&c.cont.node()};
        st.push_back({&(b ? c.on_true : c.on_false).node()});
      }
    } else if (std::holds_alternative<EndNode<LocalAtom>>(v)) {
      st.pop_back();
    } else if (std::holds_alternative<LoopNode<LocalAtom>>(v)) {
      st.back().again = true;
    } else {
      return Status::AtAction;
    }
  }
  return Status::Done;
}

void JointSearch::settle_shadow(Stack& st) {
  while (!st.empty()) {
    Item& top = st.back();
    const auto& v = top.node->value;
    if (top.again || std::holds_alternative<ChoiceNode<LocalAtom>>(v)) return;
    if (std::holds_alternative<EndNode<LocalAtom>>(v)) {
      st.pop_back();
    } else if (std::holds_alternative<LoopNode<LocalAtom>>(v)) {
      top.again = true;
      top.iterations = 0;
    } else {
      top = {&cont_of(*top.node)};
    }
  }
}

// In enumerate_tapes order: leave the loop first, true branch first.
std::vector<bool> JointSearch::shadow_options(const Stack& st) const {
  if (st.empty()) return {};
  const Item& top = st.back();
  if (!top.again) return {true, false};
  if (top.iterations < max_iters_) return {false, true};
  return {false};
}

void JointSearch::decide_shadow(Stack& st, bool value) {
  Item top = st.back();
  if (top.again) {
    const auto& l = std::get<LoopNode<LocalAtom>>(top.node->value);
    if (value) {
      ++st.back().iterations;
      st.push_back({&l.body.node()});
    } else {
      st.back() = {&l.cont.node()};
    }
  } else {
    const auto& c = std::get<ChoiceNode<LocalAtom>>(top.node->value);
    st.back() = {&c.cont.node()};
    st.push_back({&(value ? c.on_true : c.on_false).node()});
  }
  settle_shadow(st);
}

// Settles every rank and drops window entries all ranks have read.
void JointSearch::normalise(State& s) const {
  std::size_t low = s.window.size();
  for (std::size_t r = 0; r < s.ranks.size(); ++r) {
    if (settle(s.ranks[r], s.offset[r], s.window) == Status::Done) s.offset[r] = s.window.size();
    low = std::min(low, s.offset[r]);
  }
  if (low > 0) {
    s.window.erase(s.window.begin(), s.window.begin() + static_cast<std::ptrdiff_t>(low));
    for (auto& o : s.offset) o -= low;
  }
}

std::string JointSearch::key(const State& s) const {
  std::string k;
  auto put = [&](std::uint64_t x) { k.append(reinterpret_cast<const char*>(&x), sizeof x); };
  auto put_stack = [&](const Stack& st) {
    put(st.size());
    for (const auto& i : st) {
      put(reinterpret_cast<std::uintptr_t>(i.node));
      put(static_cast<std::uint64_t>(i.again) | static_cast<std::uint64_t>(i.iterations) << 1);
    }
  };
  for (std::size_t r = 0; r < s.ranks.size(); ++r) {
    put(s.offset[r]);
    put_stack(s.ranks[r]);
  }
  put_stack(s.shadow);
  for (bool b : s.window) k.push_back(b ? '1' : '0');
  return k;
}

std::vector<JointSearch::Edge> JointSearch::successors(const State& s,
                                                       std::vector<Status>& status) const {
  const std::size_t n = s.ranks.size();
  std::vector<std::optional<Action>> heads(n);
  status.assign(n, Status::Done);
  for (std::size_t r = 0; r < n; ++r) {
    const Stack& st = s.ranks[r];
    if (st.empty()) continue;
    const Item& top = st.back();
    if (top.again || std::holds_alternative<ChoiceNode<LocalAtom>>(top.node->value)) {
      status[r] = Status::NeedsDecision;
    } else {
      status[r] = Status::AtAction;
      heads[r] = action_of(std::get<PrefixNode<LocalAtom>>(top.node->value).atom);
    }
  }

  std::vector<GlobalStep> steps;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& a = heads[r];
    if (!a || a->kind != ActionKind::Send) continue;
    if (a->rank < 0 || static_cast<std::size_t>(a->rank) >= n) continue;
    const auto& q = heads[static_cast<std::size_t>(a->rank)];
    if (q && q->kind == ActionKind::Receive && q->rank == static_cast<std::int64_t>(r) &&
        q->dtype == a->dtype && q->length == a->length) {
      steps.push_back({GlobalStep::Kind::PointToPoint, static_cast<std::int64_t>(r), a->rank});
    }
  }
  if (n > 0 && heads[0] && is_collective(heads[0]->kind)) {
    bool together = true;
    for (std::size_t r = 1; together && r < n; ++r) together = heads[r] == heads[0];
    if (together) steps.push_back({});
  }

  std::vector<Edge> out;
  if (!steps.empty()) {
    Edge e{s, steps, std::nullopt};
    auto advance = [&](std::size_t r) {
      Item& top = e.target.ranks[r].back();
      top = {&cont_of(*top.node)};
    };
    for (const auto& st : steps) {
      if (st.kind == GlobalStep::Kind::Collective) {
        for (std::size_t r = 0; r < n; ++r) advance(r);
      } else {
        advance(static_cast<std::size_t>(st.sender));
        advance(static_cast<std::size_t>(st.receiver));
      }
    }
    normalise(e.target);
    out.push_back(std::move(e));
    return out;
  }
  if (std::find(status.begin(), status.end(), Status::NeedsDecision) == status.end()) return out;
  std::vector<bool> options = shadow_options(s.shadow);
  if (opts_.order == ExplorationOrder::Reverse) {
    std::reverse(options.begin(), options.end());
  } else if (opts_.order == ExplorationOrder::Shuffled) {
    std::shuffle(options.begin(), options.end(), rng_);
  }
  for (bool b : options) {
    Edge e{s, {}, b};
    e.target.window.push_back(b);
    decide_shadow(e.target.shadow, b);
    normalise(e.target);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<bool> JointSearch::complete_tape(const State& s) const {
  std::vector<bool> tape = path_tape_;
  Stack shadow = s.shadow;
  while (!shadow.empty()) {
    bool b = shadow_options(shadow).front();
    tape.push_back(b);
    decide_shadow(shadow, b);
  }
  return tape;
}

Verdict JointSearch::deadlock(const State& s) const {
  Deadlock d;
  d.tape = complete_tape(s);
  d.steps = path_steps_;
  auto traces = unfold(locals_, d.tape);
  d.state = replay(traces, d.steps);
  if (!enabled_steps(traces, d.state).empty() || all_done(traces, d.state)) {
    throw std::logic_error("joint search reported a state that is not stuck");
  }
  d.blocked = blocked_ranks(traces, d.state);
  return d;
}

Verdict JointSearch::run() {
  std::size_t tapes = locals_.empty() ? 1 : count_tapes(locals_.front(), max_iters_);
  State init;
  for (const auto& l : locals_) init.ranks.push_back({{&l.node()}});
  init.offset.assign(locals_.size(), 0);
  if (!locals_.empty()) {
    init.shadow.push_back({&locals_.front().node()});
    settle_shadow(init.shadow);
  }
  normalise(init);

  std::unordered_set<std::string> visited{key(init)};
  std::vector<Frame> stack;
  std::vector<std::pair<std::size_t, std::size_t>> marks;  // path sizes before each edge
  std::vector<Status> status;

  auto enter = [&](const State& s) -> std::optional<Verdict> {
    auto edges = successors(s, status);
    if (edges.empty()) {
      bool done = std::all_of(status.begin(), status.end(),
                              [](Status st) { return st == Status::Done; });
      if (!done) return deadlock(s);
    }
    stack.push_back({std::move(edges), 0});
    return std::nullopt;
  };

  if (auto v = enter(init)) return *v;
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next == top.edges.size()) {
      stack.pop_back();
      if (!marks.empty()) {
        path_steps_.resize(marks.back().first);
        path_tape_.resize(marks.back().second);
        marks.pop_back();
      }
      continue;
    }
    Edge& e = top.edges[top.next++];
    if (!visited.insert(key(e.target)).second) continue;
    if (visited.size() > opts_.state_limit) {
      return StateSpaceExceeded{opts_.state_limit, path_tape_};
    }
    State target = std::move(e.target);
    marks.emplace_back(path_steps_.size(), path_tape_.size());
    path_steps_.insert(path_steps_.end(), e.steps.begin(), e.steps.end());
    if (e.decision) path_tape_.push_back(*e.decision);
    if (auto v = enter(target)) return *v;
  }
  return AllDone{visited.size(), tapes};
}

}  // namespace

std::vector<RankTrace> unfold(const std::vector<LocalType>& locals, const std::vector<bool>& tape) {
  std::vector<RankTrace> out(locals.size());
  for (std::size_t r = 0; r < locals.size(); ++r) {
    DecisionTape cursor(tape);
    try {
      unfold_into(locals[r], cursor, out[r].actions);
    } catch (const TapeExhausted&) {
      out[r].awaiting_decision = true;
    }
  }
  return out;
}

std::vector<RankTrace> erase_all(const MiniMpiProgram& prog, const Env& env, std::int64_t nprocs,
                                 const std::vector<bool>& tape) {
  Env full = env;
  full.insert_or_assign("np", nprocs);
  std::vector<RankTrace> out(static_cast<std::size_t>(nprocs));
  for (std::int64_t r = 0; r < nprocs; ++r) {
    auto& trace = out[static_cast<std::size_t>(r)];
    DecisionTape cursor(tape);
    try {
      erase_into(prog, r, full, cursor, trace.actions);
    } catch (const TapeExhausted&) {
      trace.awaiting_decision = true;
    }
    std::erase_if(trace.actions, [](const Action& a) { return a.kind == ActionKind::Finalize; });
  }
  return out;
}

std::string to_string(const GlobalStep& s) {
  if (s.kind == GlobalStep::Kind::Collective) return "collective";
  return "p2p " + std::to_string(s.sender) + " " + std::to_string(s.receiver);
}

std::string to_string(const BlockedRank& b) {
  return std::to_string(b.rank) + " " + (b.head ? to_string(*b.head) : "awaiting-decision");
}

std::vector<GlobalStep> enabled_steps(const std::vector<RankTrace>& traces, const Positions& pos) {
  std::vector<GlobalStep> out;
  const std::size_t n = traces.size();
  for (std::size_t r = 0; r < n; ++r) {
    const Action* s = head(traces, pos, r);
    if (!s || s->kind != ActionKind::Send) continue;
    if (s->rank < 0 || static_cast<std::size_t>(s->rank) >= n) continue;
    const Action* q = head(traces, pos, static_cast<std::size_t>(s->rank));
    if (q && q->kind == ActionKind::Receive && q->rank == static_cast<std::int64_t>(r) &&
        q->dtype == s->dtype && q->length == s->length) {
      out.push_back({GlobalStep::Kind::PointToPoint, static_cast<std::int64_t>(r), s->rank});
    }
  }
  if (n > 0) {
    const Action* first = head(traces, pos, 0);
    bool together = first && is_collective(first->kind);
    for (std::size_t r = 1; together && r < n; ++r) {
      const Action* a = head(traces, pos, r);
      together = a && *a == *first;
    }
    if (together) out.push_back({});
  }
  return out;
}

bool all_done(const std::vector<RankTrace>& traces, const Positions& pos) {
  for (std::size_t r = 0; r < traces.size(); ++r) {
    if (pos[r] < traces[r].actions.size() || traces[r].awaiting_decision) return false;
  }
  return true;
}

Positions replay(const std::vector<RankTrace>& traces, const std::vector<GlobalStep>& steps) {
  Positions pos(traces.size(), 0);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    auto enabled = enabled_steps(traces, pos);
    if (std::find(enabled.begin(), enabled.end(), steps[i]) == enabled.end()) {
      throw std::invalid_argument("step " + std::to_string(i) + " (" + to_string(steps[i]) +
                                  ") is not enabled");
    }
    pos = take_step(pos, steps[i]);
  }
  return pos;
}

Verdict explore(const std::vector<RankTrace>& traces, const ExploreOptions& opts,
                const std::vector<bool>& tape) {
  struct Frame {
    Positions pos;
    std::vector<GlobalStep> steps;
    std::size_t next = 0;
  };
  std::mt19937_64 rng(opts.seed);
  std::unordered_set<Positions, PositionsHash> visited;
  std::vector<Frame> stack;
  std::vector<GlobalStep> path;

  auto enter = [&](Positions pos) -> std::optional<Verdict> {
    auto steps = enabled_steps(traces, pos);
    if (steps.empty() && !all_done(traces, pos)) {
      auto blocked = blocked_ranks(traces, pos);
      return Deadlock{tape, path, std::move(pos), std::move(blocked)};
    }
    if (opts.order == ExplorationOrder::Reverse) {
      std::reverse(steps.begin(), steps.end());
    } else if (opts.order == ExplorationOrder::Shuffled) {
      std::shuffle(steps.begin(), steps.end(), rng);
    }
    stack.push_back({std::move(pos), std::move(steps), 0});
    return std::nullopt;
  };

  Positions initial(traces.size(), 0);
  visited.insert(initial);
  if (auto v = enter(std::move(initial))) return *v;
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next == top.steps.size()) {
      stack.pop_back();
      if (!path.empty()) path.pop_back();
      continue;
    }
    GlobalStep s = top.steps[top.next++];
    Positions succ = take_step(top.pos, s);
    if (!visited.insert(succ).second) continue;
    if (visited.size() > opts.state_limit) return StateSpaceExceeded{opts.state_limit, tape};
    path.push_back(s);
    if (auto v = enter(std::move(succ))) return *v;
  }
  return AllDone{visited.size(), 1};
}

Verdict simulate(const std::vector<LocalType>& locals, const std::vector<bool>& tape,
                 const ExploreOptions& opts) {
  return explore(unfold(locals, tape), opts, tape);
}

Verdict explore_all_tapes(const std::vector<LocalType>& locals, int max_loop_iters,
                          const ExploreOptions& opts) {
  return JointSearch(locals, max_loop_iters, opts).run();
}

std::size_t count_tapes(const LocalType& t, int max_loop_iters) {
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  auto mul = [](std::size_t a, std::size_t b) {
    return a != 0 && b > kMax / a ? kMax : a * b;
  };
  auto add = [](std::size_t a, std::size_t b) { return b > kMax - a ? kMax : a + b; };
  std::size_t total = 1;
  for (LocalType cur = t; !cur.is_end(); cur = next(cur)) {
    const auto& v = cur.node().value;
    if (const auto* l = std::get_if<LoopNode<LocalAtom>>(&v)) {
      std::size_t body = count_tapes(l->body, max_loop_iters);
      std::size_t sum = 0, power = 1;
      for (int i = 0; i <= max_loop_iters; ++i) {
        sum = add(sum, power);
        power = mul(power, body);
      }
      total = mul(total, sum);
    } else if (const auto* c = std::get_if<ChoiceNode<LocalAtom>>(&v)) {
      total = mul(total, add(count_tapes(c->on_true, max_loop_iters),
                             count_tapes(c->on_false, max_loop_iters)));
    }
  }
  return total;
}

Verdict explore_program_tapes(const MiniMpiProgram& prog, const Env& env, std::int64_t nprocs,
                              int max_loop_iters, const ExploreOptions& opts) {
  Env full = env;
  full.insert_or_assign("np", nprocs);
  auto tapes = enumerate_tapes(
      [&](DecisionSource& d) {
        std::vector<Action> sink;
        erase_into(prog, 0, full, d, sink);
      },
      max_loop_iters);
  return explore_tapes(
      tapes, [&](const std::vector<bool>& tape) { return erase_all(prog, env, nprocs, tape); },
      opts);
}

void write_witness(std::ostream& os, const Deadlock& d) {
  os << "deadlock\ntape";
  for (bool b : d.tape) os << ' ' << (b ? 1 : 0);
  os << '\n';
  for (const auto& s : d.steps) os << "step " << to_string(s) << '\n';
  for (const auto& b : d.blocked) os << "blocked " << to_string(b) << '\n';
}

Witness read_witness(std::istream& is) {
  Witness w;
  std::string line;
  bool header = false;
  bool tape = false;
  int line_no = 0;
  auto bad = [&](const std::string& why) {
    throw std::runtime_error("witness line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream in(line);
    std::string word;
    if (!(in >> word)) continue;
    if (!header) {
      if (word != "deadlock") bad("expected 'deadlock'");
      header = true;
    } else if (word == "tape") {
      if (tape) bad("duplicate tape");
      tape = true;
      std::string bit;
      while (in >> bit) {
        if (bit != "0" && bit != "1") bad("tape entries must be 0 or 1");
        w.tape.push_back(bit == "1");
      }
    } else if (word == "step") {
      std::string kind;
      in >> kind;
      if (kind == "collective") {
        w.steps.push_back({});
      } else if (kind == "p2p") {
        GlobalStep s{GlobalStep::Kind::PointToPoint};
        if (!(in >> s.sender >> s.receiver)) bad("p2p step needs sender and receiver");
        w.steps.push_back(s);
      } else {
        bad("unknown step kind '" + kind + "'");
      }
      std::string extra;
      if (in >> extra) bad("trailing text");
    } else if (word != "blocked") {
      bad("unknown record '" + word + "'");
    }
  }
  if (!header) bad("empty witness");
  return w;
}

}  // namespace commtype
