#include "commtype/wellformedness.hpp"

#include <set>

namespace commtype {

namespace {

bool is_reserved(const std::string& name) { return name == "me" || name == "np"; }

class Checker {
 public:
  Checker(const Protocol& p, WfReport& report) : protocol_(p), report_(report) {}

  void check_binders(const Instantiation& inst) {
    std::set<std::string> names;
    for (const auto& b : protocol_.binders) {
      std::string where = "binder " + b.name;
      if (!names.insert(b.name).second) {
        add("duplicate-binder", "duplicate binder " + b.name, b.loc, where);
        continue;
      }
      if (is_reserved(b.name)) {
        add("reserved-name", "'" + b.name + "' is reserved and cannot be a protocol parameter",
            b.loc, where);
        continue;
      }
      auto it = inst.values.find(b.name);
      if (it == inst.values.end()) {
        add("missing-binding", "no value supplied for binder " + b.name, b.loc, where);
        continue;
      }
      if (!b.kind.is_integer_valued()) {
        add("binder-kind", "binder " + b.name + " has non-integer kind " + to_string(b.kind),
            b.loc, where);
        continue;
      }
      try {
        if (!check_refinement(b.kind, it->second, env_)) {
          add("refinement-violated",
              "refinement violated at binder " + b.name + ": " + std::to_string(it->second) +
                  " is not in " + to_string(b.kind),
              b.loc, where);
        }
      } catch (const EvalError& e) {
        add("eval-error", std::string("in refinement of binder ") + b.name + ": " + e.what(),
            b.loc, where);
      }
      env_.insert_or_assign(b.name, it->second);
    }
    for (const auto& [name, value] : inst.values) {
      if (!names.contains(name)) {
        add("extra-binding", "binding " + name + " does not name a binder", {}, "instantiation");
      }
    }
  }

  void check_num_procs() {
    std::int64_t n = protocol_.num_procs;
    if (n <= kMinProcsExclusive || n >= kMaxProcsExclusive) {
      add("nprocs-range",
          "process count " + std::to_string(n) + " outside (" +
              std::to_string(kMinProcsExclusive) + ", " + std::to_string(kMaxProcsExclusive) + ")",
          protocol_.num_procs_loc, "nprocs");
    }
  }

  void check_type(const GlobalType& t, const std::string& path) {
    const GlobalType* cur = &t;
    for (int index = 0;; ++index) {
      std::string here = path + "[" + std::to_string(index) + "]";
      const auto& v = cur->node().value;
      if (const auto* p = std::get_if<PrefixNode<GlobalAtom>>(&v)) {
        check_atom(p->atom, cur->loc(), here);
        cur = &p->cont;
      } else if (const auto* l = std::get_if<LoopNode<GlobalAtom>>(&v)) {
        check_type(l->body, here + ".loop");
        cur = &l->cont;
      } else if (const auto* c = std::get_if<ChoiceNode<GlobalAtom>>(&v)) {
        check_type(c->on_true, here + ".true");
        check_type(c->on_false, here + ".false");
        cur = &c->cont;
      } else {
        return;
      }
    }
  }

 private:
  void add(std::string code, std::string message, SourceLoc loc, std::string path) {
    report_.diagnostics.push_back({std::move(code), std::move(message), loc, std::move(path)});
  }

  std::optional<std::int64_t> value(const Expr& e, const char* role, SourceLoc loc,
                                    const std::string& path) {
    for (const auto& name : free_variables(e)) {
      if (is_reserved(name)) {
        add("reserved-name", "'" + name + "' may not appear in protocol expressions", loc, path);
        return std::nullopt;
      }
    }
    try {
      return eval(e, env_);
    } catch (const EvalError& err) {
      add("eval-error", std::string("cannot evaluate ") + role + " " + to_string(e) + ": " +
                            err.what(),
          loc, path);
      return std::nullopt;
    }
  }

  void rank(const Expr& e, const char* role, SourceLoc loc, const std::string& path,
            std::optional<std::int64_t>& out) {
    out = value(e, role, loc, path);
    if (out && (*out < 0 || *out >= protocol_.num_procs)) {
      add("rank-range",
          std::string(role) + " " + to_string(e) + " = " + std::to_string(*out) +
              " is not a rank in [0, " + std::to_string(protocol_.num_procs) + ")",
          loc, path);
      out.reset();
    }
  }

  void length(const Expr& e, SourceLoc loc, const std::string& path) {
    auto v = value(e, "length", loc, path);
    if (v && *v < 0) {
      add("negative-length",
          "length " + to_string(e) + " = " + std::to_string(*v) + " is negative", loc, path);
    }
  }

  void check_atom(const GlobalAtom& atom, SourceLoc loc, const std::string& path) {
    std::optional<std::int64_t> a;
    std::optional<std::int64_t> b;
    if (const auto* m = std::get_if<MessageAtom>(&atom)) {
      rank(m->src, "source", loc, path, a);
      rank(m->dst, "destination", loc, path, b);
      if (a && b && *a == *b) {
        add("self-message", "self-message: rank " + std::to_string(*a) + " sends to itself", loc,
            path);
      }
      length(m->length, loc, path);
      return;
    }
    if (const auto* x = std::get_if<AllreduceAtom>(&atom)) {
      length(x->length, loc, path);
      return;
    }
    std::visit(
        [&](const auto& rooted) {
          if constexpr (requires { rooted.root; }) {
            rank(rooted.root, "root", loc, path, a);
            length(rooted.length, loc, path);
          }
        },
        atom);
  }

  const Protocol& protocol_;
  WfReport& report_;
  Env env_;
};

}  // namespace

WfReport check_wf(const Protocol& p, const Instantiation& inst) {
  WfReport report;
  Checker checker(p, report);
  checker.check_binders(inst);
  // Binder failures leave names unbound or out of kind; evaluating the body
  // would only repeat them as noise.
  bool binders_ok = report.ok();
  checker.check_num_procs();
  if (binders_ok) checker.check_type(p.body, "body");
  return report;
}

}  // namespace commtype
