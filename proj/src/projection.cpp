#include "commtype/projection.hpp"

#include <stdexcept>

namespace commtype {

namespace {

struct Projector {
  const Env& env;
  std::int64_t rank;

  Expr literal(const Expr& e) const { return Expr::literal(eval(e, env)); }

  // Returns the projected atom, or nothing when the rank is not involved.
  std::optional<LocalAtom> atom(const GlobalAtom& a) const {
    if (const auto* m = std::get_if<MessageAtom>(&a)) {
      std::int64_t src = eval(m->src, env);
      std::int64_t dst = eval(m->dst, env);
      if (src == rank) return SendAtom{Expr::literal(dst), m->dtype, literal(m->length)};
      if (dst == rank) return ReceiveAtom{Expr::literal(src), m->dtype, literal(m->length)};
      return std::nullopt;
    }
    if (const auto* x = std::get_if<ScatterAtom>(&a)) {
      return ScatterAtom{literal(x->root), x->dtype, literal(x->length)};
    }
    if (const auto* x = std::get_if<GatherAtom>(&a)) {
      return GatherAtom{literal(x->root), x->dtype, literal(x->length)};
    }
    if (const auto* x = std::get_if<BcastAtom>(&a)) {
      return BcastAtom{literal(x->root), x->dtype, literal(x->length)};
    }
    const auto& x = std::get<AllreduceAtom>(a);
    return AllreduceAtom{x.dtype, literal(x.length), x.op};
  }

  LocalType type(const GlobalType& t) const {
    // Walk the prefix spine iteratively, then rebuild from the tail.
    std::vector<std::pair<LocalAtom, SourceLoc>> kept;
    const GlobalType* cur = &t;
    while (const auto* p = std::get_if<PrefixNode<GlobalAtom>>(&cur->node().value)) {
      if (auto a = atom(p->atom)) kept.emplace_back(std::move(*a), cur->loc());
      cur = &p->cont;
    }
    LocalType tail = LocalType::end(cur->loc());
    const auto& v = cur->node().value;
    if (const auto* l = std::get_if<LoopNode<GlobalAtom>>(&v)) {
      tail = LocalType::loop(type(l->body), type(l->cont), cur->loc());
    } else if (const auto* c = std::get_if<ChoiceNode<GlobalAtom>>(&v)) {
      tail = LocalType::choice(type(c->on_true), type(c->on_false), type(c->cont), cur->loc());
    }
    for (auto it = kept.rbegin(); it != kept.rend(); ++it) {
      tail = LocalType::prefix(std::move(it->first), tail, it->second);
    }
    return tail;
  }
};

}  // namespace

LocalType project(const Protocol& p, const Instantiation& inst, std::int64_t rank) {
  if (rank < 0 || rank >= p.num_procs) {
    throw std::out_of_range("rank " + std::to_string(rank) + " outside [0, " +
                            std::to_string(p.num_procs) + ")");
  }
  return Projector{inst.values, rank}.type(p.body);
}

ProjectionResult project_all(const Protocol& p, const Instantiation& inst) {
  ProjectionResult out;
  out.locals.reserve(static_cast<std::size_t>(p.num_procs));
  for (std::int64_t r = 0; r < p.num_procs; ++r) out.locals.push_back(project(p, inst, r));
  return out;
}

}  // namespace commtype
