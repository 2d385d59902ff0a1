#include "commtype/typestate.hpp"

namespace commtype {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string describe(const LocalType& t) {
  const auto& v = t.node().value;
  if (std::holds_alternative<EndNode<LocalAtom>>(v)) return "end";
  if (const auto* p = std::get_if<PrefixNode<LocalAtom>>(&v)) return to_string(p->atom) + "...";
  if (std::holds_alternative<LoopNode<LocalAtom>>(v)) return "loop(...)";
  return "choice(...)";
}

std::int64_t literal(const Expr& e) {
  if (auto v = e.literal_value()) return *v;
  throw std::invalid_argument("atom field " + to_string(e) + " is not a literal");
}

bool has_rank(ActionKind k) {
  return k != ActionKind::Allreduce && k != ActionKind::Finalize;
}

bool is_point_to_point(ActionKind k) { return k == ActionKind::Send || k == ActionKind::Receive; }

std::vector<FieldDiff> diff(const Action& expected, const Action& actual) {
  std::vector<FieldDiff> out;
  if (expected.kind != actual.kind) {
    out.push_back({"action", to_string(expected.kind), to_string(actual.kind)});
    return out;
  }
  if (has_rank(expected.kind) && expected.rank != actual.rank) {
    out.push_back({is_point_to_point(expected.kind) ? "peer" : "root",
                   std::to_string(expected.rank), std::to_string(actual.rank)});
  }
  if (expected.dtype != actual.dtype) {
    out.push_back({"dtype", to_string(expected.dtype), to_string(actual.dtype)});
  }
  if (expected.length != actual.length) {
    out.push_back({"length", std::to_string(expected.length), std::to_string(actual.length)});
  }
  if (expected.kind == ActionKind::Allreduce && expected.op != actual.op) {
    out.push_back({"op", to_string(expected.op), to_string(actual.op)});
  }
  return out;
}

}  // namespace

std::string to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Send: return "send";
    case ActionKind::Receive: return "receive";
    case ActionKind::Scatter: return "scatter";
    case ActionKind::Gather: return "gather";
    case ActionKind::Bcast: return "bcast";
    case ActionKind::Allreduce: return "allreduce";
    case ActionKind::Finalize: return "finalize";
  }
  return "?";
}

std::string to_string(const Action& a) {
  switch (a.kind) {
    case ActionKind::Finalize:
      return "finalize";
    case ActionKind::Allreduce:
      return "allreduce(" + to_string(a.dtype) + "," + std::to_string(a.length) + "," +
             to_string(a.op) + ")";
    default:
      return to_string(a.kind) + "(" + std::to_string(a.rank) + "," + to_string(a.dtype) + "," +
             std::to_string(a.length) + ")";
  }
}

Action action_of(const LocalAtom& atom) {
  return std::visit(
      Overloaded{
          [](const SendAtom& x) {
            return Action{ActionKind::Send, literal(x.peer), x.dtype, literal(x.length)};
          },
          [](const ReceiveAtom& x) {
            return Action{ActionKind::Receive, literal(x.peer), x.dtype, literal(x.length)};
          },
          [](const ScatterAtom& x) {
            return Action{ActionKind::Scatter, literal(x.root), x.dtype, literal(x.length)};
          },
          [](const GatherAtom& x) {
            return Action{ActionKind::Gather, literal(x.root), x.dtype, literal(x.length)};
          },
          [](const BcastAtom& x) {
            return Action{ActionKind::Bcast, literal(x.root), x.dtype, literal(x.length)};
          },
          [](const AllreduceAtom& x) {
            return Action{ActionKind::Allreduce, 0, x.dtype, literal(x.length), x.op};
          },
      },
      atom);
}

std::string StepError::code() const {
  return std::visit(Overloaded{
                        [](const NotAPrefix&) { return std::string("not-a-prefix"); },
                        [](const HeadMismatch& h) {
                          const std::string& f = h.diffs.empty() ? "action" : h.diffs.front().field;
                          return f == "action" ? std::string("action-mismatch") : f + "-mismatch";
                        },
                        [](const AtCollectiveBoundary& b) {
                          return std::string(b.boundary == Boundary::Loop ? "loop-boundary"
                                                                          : "choice-boundary");
                        },
                        [](const ResidualNotEnd&) { return std::string("residual-not-end"); },
                        [](const BufferObligation& b) { return "buffer-" + b.field; },
                    },
                    detail);
}

std::string StepError::message() const {
  return std::visit(
      Overloaded{
          [](const NotAPrefix& n) { return "expected " + n.expected + ", found " + n.found; },
          [](const HeadMismatch& h) {
            std::string out = "expected " + to_string(h.expected) + ", got " + to_string(h.actual);
            for (const auto& d : h.diffs) {
              out += "; " + d.field + " expected " + d.expected + ", got " + d.actual;
            }
            return out;
          },
          [](const AtCollectiveBoundary& b) {
            return std::string(b.boundary == Boundary::Loop ? "type is at a loop"
                                                            : "type is at a choice") +
                   " but the program performs " + to_string(b.actual) + "; the " +
                   (b.boundary == Boundary::Loop ? "loop must be matched by a collective loop"
                                                 : "choice must be matched by a collective choice");
          },
          [](const ResidualNotEnd& r) {
            return "residual type is not end: " + describe(r.residual);
          },
          [](const BufferObligation& b) { return b.message; },
      },
      detail);
}

TypestateError::TypestateError(StepError error)
    : std::logic_error(error.message()), error_(std::move(error)) {}

const LocalAtom& first(const LocalType& t) {
  if (const auto* p = std::get_if<PrefixNode<LocalAtom>>(&t.node().value)) return p->atom;
  throw TypestateError({NotAPrefix{"a communication prefix", describe(t)}});
}

const LocalType& next(const LocalType& t) {
  const auto& v = t.node().value;
  if (const auto* p = std::get_if<PrefixNode<LocalAtom>>(&v)) return p->cont;
  if (const auto* l = std::get_if<LoopNode<LocalAtom>>(&v)) return l->cont;
  if (const auto* c = std::get_if<ChoiceNode<LocalAtom>>(&v)) return c->cont;
  throw TypestateError({NotAPrefix{"a prefix, loop or choice", describe(t)}});
}

const LocalType& loop_body(const LocalType& t) {
  if (const auto* l = std::get_if<LoopNode<LocalAtom>>(&t.node().value)) return l->body;
  throw TypestateError({NotAPrefix{"a loop", describe(t)}});
}

std::pair<LocalType, LocalType> choice_branches(const LocalType& t) {
  if (const auto* c = std::get_if<ChoiceNode<LocalAtom>>(&t.node().value)) {
    return {c->on_true, c->on_false};
  }
  throw TypestateError({NotAPrefix{"a choice", describe(t)}});
}

StepResult step(const LocalType& t, const Action& action, const BufferFacts& buffer) {
  if (action.kind == ActionKind::Finalize) {
    throw std::invalid_argument("finalize is checked with check_finalized, not step");
  }
  StepResult result;
  const auto& v = t.node().value;
  if (std::holds_alternative<LoopNode<LocalAtom>>(v)) {
    result.errors.push_back({AtCollectiveBoundary{Boundary::Loop, action}});
  } else if (std::holds_alternative<ChoiceNode<LocalAtom>>(v)) {
    result.errors.push_back({AtCollectiveBoundary{Boundary::Choice, action}});
  } else if (std::holds_alternative<EndNode<LocalAtom>>(v)) {
    result.errors.push_back({NotAPrefix{"nothing (the type has ended)", to_string(action)}});
  } else {
    const auto& p = std::get<PrefixNode<LocalAtom>>(v);
    auto diffs = diff(action_of(p.atom), action);
    if (!diffs.empty()) result.errors.push_back({HeadMismatch{p.atom, action, std::move(diffs)}});
  }

  if (buffer.element != action.dtype) {
    result.errors.push_back({BufferObligation{
        "type", "buffer holds " + to_string(buffer.element) + " elements but the call transfers " +
                    to_string(action.dtype)}});
  }
  if (buffer.capacity < action.length) {
    result.errors.push_back({BufferObligation{
        "capacity", "buffer capacity " + std::to_string(buffer.capacity) + " is less than length " +
                        std::to_string(action.length)}});
  }
  if (result.ok()) result.type = next(t);
  return result;
}

std::optional<StepError> check_finalized(const LocalType& t) {
  if (t.is_end()) return std::nullopt;
  return StepError{ResidualNotEnd{t}};
}

}  // namespace commtype
