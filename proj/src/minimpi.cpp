#include "commtype/minimpi.hpp"

#include <map>
#include <set>

#include "commtype/projection.hpp"
#include "lexer.hpp"

namespace commtype {

namespace {

using detail::Token;
using detail::TokenKind;
using detail::TokenStream;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool is_reserved(std::string_view name) { return name == "me" || name == "np"; }

// ---------------------------------------------------------------------------
// Parsing

class ProgramParser {
 public:
  explicit ProgramParser(std::string_view text) : s_(detail::tokenize(text)) {}

  MiniMpiProgram parse() {
    MiniMpiProgram prog;
    while (s_.is_word("param")) {
      s_.advance();
      SourceLoc loc = s_.peek().loc;
      std::string name = s_.expect_identifier("parameter name");
      if (is_reserved(name)) throw SyntaxError(loc, "'" + name + "' is reserved");
      prog.params.push_back(std::move(name));
    }
    while (!s_.at_end()) prog.body.push_back(statement());
    return prog;
  }

 private:
  StmtList block() {
    TokenStream::DepthGuard guard(s_);
    s_.expect_punct("{");
    StmtList out;
    while (!s_.is_punct("}")) {
      if (s_.at_end()) s_.fail("unterminated block", {"'}'"});
      out.push_back(statement());
    }
    s_.advance();
    return out;
  }

  StmtList optional_else() {
    if (s_.accept_word("else")) return block();
    return {};
  }

  DataType element_type() {
    if (s_.accept_word("float") || s_.accept_word("MPI_FLOAT")) return DataType::Float;
    if (s_.accept_word("int") || s_.accept_word("MPI_INT")) return DataType::Int;
    s_.fail("unexpected " + detail::describe(s_.peek()), {"'int'", "'float'"});
  }

  ReduceOp reduce_op() {
    const Token& t = s_.peek();
    if (t.kind == TokenKind::Identifier) {
      std::string_view name = t.text;
      if (name.starts_with("MPI_")) name.remove_prefix(4);
      if (name == "MAX" || name == "MIN" || name == "SUM") {
        s_.advance();
        return name == "MAX" ? ReduceOp::Max : name == "MIN" ? ReduceOp::Min : ReduceOp::Sum;
      }
    }
    s_.fail("unexpected " + detail::describe(t), {"MAX", "MIN", "SUM"});
  }

  Stmt comm(ActionKind kind, SourceLoc loc) {
    const char* target_key = nullptr;
    if (kind == ActionKind::Send || kind == ActionKind::Receive) {
      target_key = "peer";
    } else if (kind != ActionKind::Allreduce) {
      target_key = "root";
    }
    std::set<std::string> seen;
    std::optional<Expr> target;
    std::optional<std::string> buffer;
    std::optional<Expr> length;
    std::optional<DataType> dtype;
    std::optional<ReduceOp> op;
    while (s_.peek().kind == TokenKind::Identifier && s_.is_punct("=", 1)) {
      const Token& key_tok = s_.advance();
      std::string key = key_tok.text;
      s_.advance();
      if (!seen.insert(key).second) throw SyntaxError(key_tok.loc, "duplicate argument " + key);
      if (target_key && key == target_key) {
        target = s_.parse_expr();
      } else if (key == "buf") {
        buffer = s_.expect_identifier("buffer name");
      } else if (key == "len") {
        length = s_.parse_expr();
      } else if (key == "dtype") {
        dtype = element_type();
      } else if (key == "op" && kind == ActionKind::Allreduce) {
        op = reduce_op();
      } else {
        throw SyntaxError(key_tok.loc,
                          "unknown argument '" + key + "' for " + to_string(kind));
      }
    }
    auto missing = [&](const std::string& key) {
      s_.fail(to_string(kind) + " is missing argument " + key, {"'" + key + "='"});
    };
    if (target_key && !target) missing(target_key);
    if (!buffer) missing("buf");
    if (!length) missing("len");
    if (kind == ActionKind::Allreduce && !op) missing("op");
    return Stmt{CommStmt{kind, target, *buffer, *length, dtype, op.value_or(ReduceOp::Max)}, loc};
  }

  Stmt statement() {
    const Token& t = s_.peek();
    SourceLoc loc = t.loc;
    if (t.kind != TokenKind::Identifier) s_.fail("unexpected " + detail::describe(t), {"statement"});
    std::string word = t.text;
    s_.advance();
    if (word == "init") return {InitStmt{}, loc};
    if (word == "comm_size") return {CommSizeStmt{}, loc};
    if (word == "comm_rank") return {CommRankStmt{}, loc};
    if (word == "compute") return {ComputeStmt{}, loc};
    if (word == "finalize") return {FinalizeStmt{}, loc};
    if (word == "let") {
      SourceLoc name_loc = s_.peek().loc;
      std::string name = s_.expect_identifier("variable name");
      if (is_reserved(name)) throw SyntaxError(name_loc, "'" + name + "' is reserved");
      s_.expect_punct("=");
      return {LetStmt{std::move(name), s_.parse_expr()}, loc};
    }
    if (word == "buffer") {
      std::string name = s_.expect_identifier("buffer name");
      DataType elem = element_type();
      s_.expect_punct("[");
      Expr cap = s_.parse_expr();
      s_.expect_punct("]");
      return {BufferStmt{std::move(name), elem, std::move(cap)}, loc};
    }
    if (word == "send") return comm(ActionKind::Send, loc);
    if (word == "recv" || word == "receive") return comm(ActionKind::Receive, loc);
    if (word == "scatter") return comm(ActionKind::Scatter, loc);
    if (word == "gather") return comm(ActionKind::Gather, loc);
    if (word == "bcast") return comm(ActionKind::Bcast, loc);
    if (word == "allreduce") return comm(ActionKind::Allreduce, loc);
    if (word == "collloop") return {CollLoopStmt{block()}, loc};
    if (word == "collchoice") {
      StmtList then_body = block();
      return {CollChoiceStmt{std::move(then_body), optional_else()}, loc};
    }
    if (word == "rankif") {
      s_.expect_punct("(");
      Pred guard = s_.parse_pred();
      s_.expect_punct(")");
      StmtList then_body = block();
      return {RankIfStmt{std::move(guard), std::move(then_body), optional_else()}, loc};
    }
    throw SyntaxError(loc, "unknown statement '" + word + "'",
                      {"init", "comm_size", "comm_rank", "let", "buffer", "send", "recv",
                       "scatter", "gather", "bcast", "allreduce", "collloop", "collchoice",
                       "rankif", "compute", "finalize"});
  }

  TokenStream s_;
};

// Enforces the init/finalize bracketing.
class StructureValidator {
 public:
  void validate(const MiniMpiProgram& prog, SourceLoc end_loc) {
    const StmtList& body = prog.body;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const Stmt& s = body[i];
      if (std::holds_alternative<InitStmt>(s.value)) {
        if (init_seen_) throw SyntaxError(s.loc, "init appears more than once");
        init_seen_ = true;
        continue;
      }
      if (std::holds_alternative<FinalizeStmt>(s.value)) {
        if (!init_seen_) throw SyntaxError(s.loc, "finalize before init");
        if (i + 1 != body.size()) {
          throw SyntaxError(body[i + 1].loc, "statement after finalize");
        }
        return;
      }
      nested(s, true);
    }
    if (!init_seen_) throw SyntaxError(end_loc, "program has no init", {"init"});
    throw SyntaxError(end_loc, "program does not end with finalize", {"finalize"});
  }

 private:
  void nested(const Stmt& s, bool top) {
    std::visit(Overloaded{
                   [&](const InitStmt&) {
                     if (!top) throw SyntaxError(s.loc, "init must be a top-level statement");
                   },
                   [&](const FinalizeStmt&) {
                     if (!top) throw SyntaxError(s.loc, "finalize must be a top-level statement");
                   },
                   [&](const CollLoopStmt& l) {
                     require_init(s);
                     for (const auto& c : l.body) nested(c, false);
                   },
                   [&](const CollChoiceStmt& c) {
                     require_init(s);
                     for (const auto& x : c.then_body) nested(x, false);
                     for (const auto& x : c.else_body) nested(x, false);
                   },
                   [&](const RankIfStmt& r) {
                     for (const auto& x : r.then_body) nested(x, false);
                     for (const auto& x : r.else_body) nested(x, false);
                   },
                   [&](const CommStmt&) { require_init(s); },
                   [&](const CommSizeStmt&) { require_init(s); },
                   [&](const CommRankStmt&) { require_init(s); },
                   [](const auto&) {},
               },
               s.value);
  }

  void require_init(const Stmt& s) const {
    if (!init_seen_) throw SyntaxError(s.loc, "MPI statement before init");
  }

  bool init_seen_ = false;
};

// ---------------------------------------------------------------------------
// Shared evaluation state for checking and erasure

struct Scope {
  Env env;
  std::map<std::string, BufferFacts, std::less<>> buffers;
};

Action resolve(const CommStmt& c, const Scope& scope) {
  auto it = scope.buffers.find(c.buffer);
  if (it == scope.buffers.end()) {
    throw std::invalid_argument("unknown buffer '" + c.buffer + "'");
  }
  Action a;
  a.kind = c.kind;
  a.rank = c.target ? eval(*c.target, scope.env) : 0;
  a.dtype = c.dtype.value_or(it->second.element);
  a.length = eval(c.length, scope.env);
  a.op = c.op;
  return a;
}

void declare(const BufferStmt& b, Scope& scope) {
  scope.buffers.insert_or_assign(b.name, BufferFacts{b.element, eval(b.capacity, scope.env)});
}

// ---------------------------------------------------------------------------
// Compliance

class RankChecker {
 public:
  RankChecker(std::int64_t rank, std::int64_t nprocs, Env params, LocalType type)
      : rank_(rank), nprocs_(nprocs), type_(std::move(type)) {
    scope_.env = std::move(params);
  }

  void run(const StmtList& body) { walk(body); }

  std::vector<Diagnostic> diagnostics;
  std::vector<const Stmt*> collectives;

 private:
  // Returns false once the rank has stopped on an error.
  bool walk(const StmtList& stmts) {
    Scope saved = scope_;
    for (const auto& s : stmts) {
      if (!exec(s)) return false;
    }
    scope_ = std::move(saved);
    return true;
  }

  bool fail(const Stmt& s, std::string code, std::string message) {
    diagnostics.push_back({std::move(code), std::move(message), s.loc, {}});
    return false;
  }

  bool fail(const Stmt& s, const StepError& e) { return fail(s, e.code(), e.message()); }

  bool exec(const Stmt& s) {
    try {
      return std::visit(Overloaded{
                            [&](const CommSizeStmt&) {
                              scope_.env.insert_or_assign("np", nprocs_);
                              return true;
                            },
                            [&](const CommRankStmt&) {
                              scope_.env.insert_or_assign("me", rank_);
                              return true;
                            },
                            [&](const LetStmt& l) {
                              scope_.env.insert_or_assign(l.name, eval(l.value, scope_.env));
                              return true;
                            },
                            [&](const BufferStmt& b) {
                              declare(b, scope_);
                              return true;
                            },
                            [&](const CommStmt& c) { return comm(s, c); },
                            [&](const CollLoopStmt& l) { return loop(s, l); },
                            [&](const CollChoiceStmt& c) { return choice(s, c); },
                            [&](const RankIfStmt& r) {
                              return walk(eval(r.guard, scope_.env) ? r.then_body : r.else_body);
                            },
                            [&](const FinalizeStmt&) {
                              if (auto err = check_finalized(type_)) return fail(s, *err);
                              return true;
                            },
                            [](const auto&) { return true; },
                        },
                        s.value);
    } catch (const EvalError& e) {
      return fail(s, "eval-error", e.what());
    } catch (const std::invalid_argument& e) {
      return fail(s, "unknown-buffer", e.what());
    }
  }

  bool comm(const Stmt& s, const CommStmt& c) {
    Action a = resolve(c, scope_);
    const BufferFacts& facts = scope_.buffers.find(c.buffer)->second;
    StepResult r = step(type_, a, facts);
    if (!r.ok()) {
      for (const auto& e : r.errors) fail(s, e);
      return false;
    }
    type_ = *r.type;
    return true;
  }

  bool loop(const Stmt& s, const CollLoopStmt& l) {
    collectives.push_back(&s);
    if (!type_.is_loop()) {
      return fail(s, "expected-loop",
                  "collective loop in the program, but the type is " + head(type_));
    }
    LocalType cont = next(type_);
    type_ = loop_body(type_);
    if (!walk(l.body)) return false;
    if (!type_.is_end()) {
      return fail(s, "body-residual", "loop body ends with residual type " + head(type_));
    }
    type_ = cont;
    return true;
  }

  bool choice(const Stmt& s, const CollChoiceStmt& c) {
    collectives.push_back(&s);
    if (!type_.is_choice()) {
      return fail(s, "expected-choice",
                  "collective choice in the program, but the type is " + head(type_));
    }
    LocalType cont = next(type_);
    auto [on_true, on_false] = choice_branches(type_);
    for (auto [body, type, label] :
         {std::tuple{&c.then_body, on_true, "true"}, std::tuple{&c.else_body, on_false, "false"}}) {
      type_ = type;
      if (!walk(*body)) return false;
      if (!type_.is_end()) {
        return fail(s, "branch-residual",
                    std::string(label) + " branch ends with residual type " + head(type_));
      }
    }
    type_ = cont;
    return true;
  }

  static std::string head(const LocalType& t) {
    const auto& v = t.node().value;
    if (std::holds_alternative<EndNode<LocalAtom>>(v)) return "end";
    if (const auto* p = std::get_if<PrefixNode<LocalAtom>>(&v)) return to_string(p->atom) + "...";
    if (std::holds_alternative<LoopNode<LocalAtom>>(v)) return "loop(...)";
    return "choice(...)";
  }

  std::int64_t rank_;
  std::int64_t nprocs_;
  LocalType type_;
  Scope scope_;
};

// ---------------------------------------------------------------------------
// Erasure

class Eraser {
 public:
  Eraser(std::int64_t rank, std::int64_t nprocs, Env params, DecisionSource& decisions,
         std::vector<Action>& out)
      : rank_(rank), nprocs_(nprocs), decisions_(decisions), out_(out) {
    scope_.env = std::move(params);
  }

  void walk(const StmtList& stmts) {
    Scope saved = scope_;
    for (const auto& s : stmts) exec(s);
    scope_ = std::move(saved);
  }

 private:
  void exec(const Stmt& s) {
    std::visit(Overloaded{
                   [&](const CommSizeStmt&) { scope_.env.insert_or_assign("np", nprocs_); },
                   [&](const CommRankStmt&) { scope_.env.insert_or_assign("me", rank_); },
                   [&](const LetStmt& l) {
                     scope_.env.insert_or_assign(l.name, eval(l.value, scope_.env));
                   },
                   [&](const BufferStmt& b) { declare(b, scope_); },
                   [&](const CommStmt& c) { out_.push_back(resolve(c, scope_)); },
                   [&](const CollLoopStmt& l) {
                     for (int i = 0; decisions_.decide(DecisionKind::LoopContinue, i); ++i) {
                       walk(l.body);
                     }
                   },
                   [&](const CollChoiceStmt& c) {
                     walk(decisions_.decide(DecisionKind::Choice, 0) ? c.then_body : c.else_body);
                   },
                   [&](const RankIfStmt& r) {
                     walk(eval(r.guard, scope_.env) ? r.then_body : r.else_body);
                   },
                   [&](const FinalizeStmt&) { out_.push_back(Action{ActionKind::Finalize}); },
                   [](const auto&) {},
               },
               s.value);
  }

  std::int64_t rank_;
  std::int64_t nprocs_;
  DecisionSource& decisions_;
  std::vector<Action>& out_;
  Scope scope_;
};

}  // namespace

MiniMpiProgram parse_program(std::string_view text) {
  ProgramParser parser(text);
  MiniMpiProgram prog = parser.parse();
  SourceLoc end_loc = detail::tokenize(text).back().loc;
  StructureValidator().validate(prog, end_loc);
  return prog;
}

bool CheckReport::compliant() const {
  if (!program.empty()) return false;
  for (const auto& r : ranks) {
    if (!r.compliant()) return false;
  }
  return true;
}

CheckReport check_compliance(const MiniMpiProgram& prog, const Protocol& p,
                             const Instantiation& inst, const Env& extra) {
  CheckReport report;
  WfReport wf = check_wf(p, inst);
  if (!wf.ok()) {
    for (auto d : wf.diagnostics) {
      d.message = "protocol is not well-formed: " + d.message;
      report.program.push_back(std::move(d));
    }
    return report;
  }

  Env params;
  for (const auto& name : prog.params) {
    if (auto it = inst.values.find(name); it != inst.values.end()) {
      params.insert_or_assign(name, it->second);
    } else if (auto jt = extra.find(name); jt != extra.end()) {
      params.insert_or_assign(name, jt->second);
    } else {
      report.program.push_back(
          {"unbound-param", "program parameter " + name + " has no binding", {}, "param " + name});
    }
  }
  if (!report.program.empty()) return report;

  ProjectionResult proj = project_all(p, inst);
  std::vector<std::vector<const Stmt*>> collectives;
  for (std::int64_t r = 0; r < p.num_procs; ++r) {
    RankChecker checker(r, p.num_procs, params, proj.locals[static_cast<std::size_t>(r)]);
    checker.run(prog.body);
    report.ranks.push_back({r, std::move(checker.diagnostics)});
    collectives.push_back(std::move(checker.collectives));
  }

  // Every rank must traverse the same collective loop/choice statements.
  for (std::size_t r = 1; r < collectives.size(); ++r) {
    if (!report.ranks[r].compliant() || !report.ranks[0].compliant()) continue;
    const auto& mine = collectives[r];
    const auto& ref = collectives[0];
    if (mine == ref) continue;
    std::size_t i = 0;
    while (i < mine.size() && i < ref.size() && mine[i] == ref[i]) ++i;
    SourceLoc loc = i < mine.size() ? mine[i]->loc : ref[i]->loc;
    report.ranks[r].diagnostics.push_back(
        {"collective-divergence",
         "rank " + std::to_string(r) +
             " does not traverse the same collective loops and choices as rank 0",
         loc,
         {}});
  }
  return report;
}

void erase_into(const MiniMpiProgram& prog, std::int64_t rank, const Env& env,
                DecisionSource& decisions, std::vector<Action>& out) {
  auto np = env.find("np");
  if (np == env.end()) throw std::invalid_argument("erasure environment must bind np");
  Env params = env;
  params.erase("np");
  params.erase("me");
  Eraser(rank, np->second, std::move(params), decisions, out).walk(prog.body);
}

std::vector<Action> erase_to_trace(const MiniMpiProgram& prog, std::int64_t rank, const Env& env,
                                   DecisionSource& decisions) {
  std::vector<Action> out;
  erase_into(prog, rank, env, decisions, out);
  return out;
}

}  // namespace commtype
