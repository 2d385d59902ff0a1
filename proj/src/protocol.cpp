#include "commtype/protocol.hpp"

#include "lexer.hpp"

namespace commtype {

namespace {

using detail::TokenKind;
using detail::TokenStream;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

DataType parse_datatype(TokenStream& s) {
  if (s.accept_word("MPI_INT")) return DataType::Int;
  if (s.accept_word("MPI_FLOAT")) return DataType::Float;
  s.fail("unsupported datatype " + detail::describe(s.peek()), {"MPI_INT", "MPI_FLOAT"});
}

ReduceOp parse_reduce_op(TokenStream& s) {
  if (s.accept_word("MPI_MAX")) return ReduceOp::Max;
  if (s.accept_word("MPI_MIN")) return ReduceOp::Min;
  if (s.accept_word("MPI_SUM")) return ReduceOp::Sum;
  s.fail("unsupported reduction " + detail::describe(s.peek()), {"MPI_MAX", "MPI_MIN", "MPI_SUM"});
}

// (root, dtype, length) for scatter/gather/bcast.
template <class Atom>
Atom parse_rooted(TokenStream& s) {
  s.expect_punct("(");
  Expr root = s.parse_expr();
  s.expect_punct(",");
  DataType dt = parse_datatype(s);
  s.expect_punct(",");
  Expr len = s.parse_expr();
  s.expect_punct(")");
  return Atom{root, dt, len};
}

AllreduceAtom parse_allreduce(TokenStream& s) {
  s.expect_punct("(");
  DataType dt = parse_datatype(s);
  s.expect_punct(",");
  Expr len = s.parse_expr();
  s.expect_punct(",");
  ReduceOp op = parse_reduce_op(s);
  s.expect_punct(")");
  return AllreduceAtom{dt, len, op};
}

struct GlobalAtoms {
  static constexpr const char* kNames[] = {"message", "scatter", "gather", "bcast", "allreduce"};

  static std::optional<GlobalAtom> parse(TokenStream& s) {
    if (s.accept_word("message")) {
      s.expect_punct("(");
      Expr src = s.parse_expr();
      s.expect_punct(",");
      Expr dst = s.parse_expr();
      s.expect_punct(",");
      DataType dt = parse_datatype(s);
      s.expect_punct(",");
      Expr len = s.parse_expr();
      s.expect_punct(")");
      return MessageAtom{src, dst, dt, len};
    }
    if (s.accept_word("scatter")) return parse_rooted<ScatterAtom>(s);
    if (s.accept_word("gather")) return parse_rooted<GatherAtom>(s);
    if (s.accept_word("bcast")) return parse_rooted<BcastAtom>(s);
    if (s.accept_word("allreduce")) return parse_allreduce(s);
    return std::nullopt;
  }
};

struct LocalAtoms {
  static constexpr const char* kNames[] = {"send",   "receive", "scatter",
                                           "gather", "bcast",   "allreduce"};

  static std::optional<LocalAtom> parse(TokenStream& s) {
    auto peer_atom = [&](auto tag) {
      using Atom = decltype(tag);
      s.expect_punct("(");
      Expr peer = s.parse_expr();
      s.expect_punct(",");
      DataType dt = parse_datatype(s);
      s.expect_punct(",");
      Expr len = s.parse_expr();
      s.expect_punct(")");
      return Atom{peer, dt, len};
    };
    if (s.accept_word("send")) return peer_atom(SendAtom{0, DataType::Int, 0});
    if (s.accept_word("receive") || s.accept_word("recv")) {
      return peer_atom(ReceiveAtom{0, DataType::Int, 0});
    }
    if (s.accept_word("scatter")) return parse_rooted<ScatterAtom>(s);
    if (s.accept_word("gather")) return parse_rooted<GatherAtom>(s);
    if (s.accept_word("bcast")) return parse_rooted<BcastAtom>(s);
    if (s.accept_word("allreduce")) return parse_allreduce(s);
    return std::nullopt;
  }
};

template <class Atoms, class Atom>
Type<Atom> parse_type(TokenStream& s) {
  TokenStream::DepthGuard guard(s);
  SourceLoc loc = s.peek().loc;
  if (s.accept_word("end")) return Type<Atom>::end(loc);
  if (s.accept_word("loop")) {
    s.expect_punct("(");
    auto body = parse_type<Atoms, Atom>(s);
    s.expect_punct(")");
    s.expect_punct(".");
    auto cont = parse_type<Atoms, Atom>(s);
    return Type<Atom>::loop(body, cont, loc);
  }
  if (s.accept_word("choice")) {
    s.expect_punct("(");
    auto on_true = parse_type<Atoms, Atom>(s);
    s.expect_punct(",");
    auto on_false = parse_type<Atoms, Atom>(s);
    s.expect_punct(")");
    s.expect_punct(".");
    auto cont = parse_type<Atoms, Atom>(s);
    return Type<Atom>::choice(on_true, on_false, cont, loc);
  }
  if (auto atom = Atoms::parse(s)) {
    s.expect_punct(".");
    // Long atom chains are iterated rather than recursed.
    std::vector<std::pair<Atom, SourceLoc>> chain{{std::move(*atom), loc}};
    for (;;) {
      SourceLoc next_loc = s.peek().loc;
      std::size_t saved = s.position();
      auto more = Atoms::parse(s);
      if (!more) {
        s.rewind(saved);
        break;
      }
      s.expect_punct(".");
      chain.emplace_back(std::move(*more), next_loc);
    }
    auto tail = parse_type<Atoms, Atom>(s);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      tail = Type<Atom>::prefix(std::move(it->first), tail, it->second);
    }
    return tail;
  }
  std::vector<std::string> expected = {"'end'", "'loop'", "'choice'"};
  for (const char* name : Atoms::kNames) expected.push_back("'" + std::string(name) + "'");
  s.fail("unexpected " + detail::describe(s.peek()), expected);
}

std::int64_t parse_header_int(TokenStream& s, std::string_view keyword) {
  s.expect_word(keyword);
  std::int64_t v = s.expect_integer();
  s.expect_punct(".");
  return v;
}

// ---------------------------------------------------------------------------
// Printing

std::string atom_args(const Expr& a, DataType dt, const Expr& len) {
  return to_string(a) + "," + to_string(dt) + "," + to_string(len);
}

template <class Atom>
void emit(const Type<Atom>& t, int indent, std::vector<std::string>& lines) {
  std::string pad(static_cast<std::size_t>(indent), ' ');
  const Type<Atom>* cur = &t;
  for (;;) {
    const auto& v = cur->node().value;
    if (const auto* p = std::get_if<PrefixNode<Atom>>(&v)) {
      lines.push_back(pad + to_string(p->atom) + ".");
      cur = &p->cont;
    } else if (const auto* l = std::get_if<LoopNode<Atom>>(&v)) {
      lines.push_back(pad + "loop(");
      emit(l->body, indent + 2, lines);
      lines.back() += ").";
      cur = &l->cont;
    } else if (const auto* c = std::get_if<ChoiceNode<Atom>>(&v)) {
      lines.push_back(pad + "choice(");
      emit(c->on_true, indent + 2, lines);
      lines.back() += ",";
      emit(c->on_false, indent + 2, lines);
      lines.back() += ").";
      cur = &c->cont;
    } else {
      lines.push_back(pad + "end");
      return;
    }
  }
}

template <class Atom>
std::string print_type(const Type<Atom>& t) {
  std::vector<std::string> lines;
  emit(t, 0, lines);
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

std::string to_string(DataType t) { return t == DataType::Int ? "MPI_INT" : "MPI_FLOAT"; }

std::string to_string(ReduceOp op) {
  switch (op) {
    case ReduceOp::Max: return "MPI_MAX";
    case ReduceOp::Min: return "MPI_MIN";
    case ReduceOp::Sum: return "MPI_SUM";
  }
  return "?";
}

std::string to_string(const GlobalAtom& a) {
  return std::visit(
      Overloaded{
          [](const MessageAtom& m) {
            return "message(" + to_string(m.src) + "," + atom_args(m.dst, m.dtype, m.length) + ")";
          },
          [](const ScatterAtom& x) { return "scatter(" + atom_args(x.root, x.dtype, x.length) + ")"; },
          [](const GatherAtom& x) { return "gather(" + atom_args(x.root, x.dtype, x.length) + ")"; },
          [](const BcastAtom& x) { return "bcast(" + atom_args(x.root, x.dtype, x.length) + ")"; },
          [](const AllreduceAtom& x) {
            return "allreduce(" + to_string(x.dtype) + "," + to_string(x.length) + "," +
                   to_string(x.op) + ")";
          },
      },
      a);
}

std::string to_string(const LocalAtom& a) {
  return std::visit(
      Overloaded{
          [](const SendAtom& x) { return "send(" + atom_args(x.peer, x.dtype, x.length) + ")"; },
          [](const ReceiveAtom& x) { return "receive(" + atom_args(x.peer, x.dtype, x.length) + ")"; },
          [](const ScatterAtom& x) { return "scatter(" + atom_args(x.root, x.dtype, x.length) + ")"; },
          [](const GatherAtom& x) { return "gather(" + atom_args(x.root, x.dtype, x.length) + ")"; },
          [](const BcastAtom& x) { return "bcast(" + atom_args(x.root, x.dtype, x.length) + ")"; },
          [](const AllreduceAtom& x) {
            return "allreduce(" + to_string(x.dtype) + "," + to_string(x.length) + "," +
                   to_string(x.op) + ")";
          },
      },
      a);
}

bool is_collective(const GlobalAtom& a) { return !std::holds_alternative<MessageAtom>(a); }

bool is_collective(const LocalAtom& a) {
  return !std::holds_alternative<SendAtom>(a) && !std::holds_alternative<ReceiveAtom>(a);
}

Protocol parse_protocol(std::string_view text) {
  TokenStream s(detail::tokenize(text));
  Protocol p;
  while (s.is_word("Pi")) {
    SourceLoc loc = s.advance().loc;
    std::string name = s.expect_identifier("parameter name");
    s.expect_punct(":");
    Kind kind = s.parse_kind();
    s.expect_punct(".");
    p.binders.push_back({std::move(name), std::move(kind), loc});
  }
  if (s.is_word("nprocs")) {
    p.num_procs_loc = s.peek().loc;
    p.num_procs = parse_header_int(s, "nprocs");
  }
  p.body = parse_type<GlobalAtoms, GlobalAtom>(s);
  s.expect_end();
  return p;
}

GlobalType parse_global_type(std::string_view text) {
  TokenStream s(detail::tokenize(text));
  auto t = parse_type<GlobalAtoms, GlobalAtom>(s);
  s.expect_end();
  return t;
}

LocalType parse_local_type(std::string_view text) {
  TokenStream s(detail::tokenize(text));
  auto t = parse_type<LocalAtoms, LocalAtom>(s);
  s.expect_end();
  return t;
}

LocalTypeFile parse_local_type_file(std::string_view text) {
  TokenStream s(detail::tokenize(text));
  LocalTypeFile f;
  if (s.is_word("rank")) f.rank = parse_header_int(s, "rank");
  if (s.is_word("nprocs")) f.num_procs = parse_header_int(s, "nprocs");
  f.type = parse_type<LocalAtoms, LocalAtom>(s);
  s.expect_end();
  return f;
}

std::string print(const GlobalType& t) { return print_type(t); }
std::string print(const LocalType& t) { return print_type(t); }

std::string print_protocol(const Protocol& p) {
  std::string out;
  for (const auto& b : p.binders) out += "Pi " + b.name + ": " + to_string(b.kind) + ".\n";
  out += "nprocs " + std::to_string(p.num_procs) + ".\n";
  out += print(p.body);
  return out;
}

std::string print_local_type_file(const LocalTypeFile& f) {
  std::string out;
  if (f.rank) out += "rank " + std::to_string(*f.rank) + ".\n";
  if (f.num_procs) out += "nprocs " + std::to_string(*f.num_procs) + ".\n";
  out += print(f.type);
  return out;
}

}  // namespace commtype
