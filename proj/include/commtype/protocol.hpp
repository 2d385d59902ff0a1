#pragma once

// Global and local communication types, and the `.cty` / `.clt` text formats.
//
//   protocol  := binder* ["nprocs" INT "."] type
//   binder    := "Pi" ident ":" kind "."
//   type      := atom "." type
//              | "loop" "(" type ")" "." type
//              | "choice" "(" type "," type ")" "." type
//              | "end"
//
// Global atoms are message/scatter/gather/bcast/allreduce; local atoms replace
// message by send/receive. Loop bodies and choice branches end in `end`; the
// continuation follows the closing parenthesis.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "commtype/diagnostic.hpp"
#include "commtype/expr.hpp"

namespace commtype {

enum class DataType { Int, Float };
enum class ReduceOp { Max, Min, Sum };

std::string to_string(DataType t);
std::string to_string(ReduceOp op);

struct MessageAtom {
  Expr src;
  Expr dst;
  DataType dtype;
  Expr length;
  bool operator==(const MessageAtom&) const = default;
};

struct SendAtom {
  Expr peer;
  DataType dtype;
  Expr length;
  bool operator==(const SendAtom&) const = default;
};

struct ReceiveAtom {
  Expr peer;
  DataType dtype;
  Expr length;
  bool operator==(const ReceiveAtom&) const = default;
};

struct ScatterAtom {
  Expr root;
  DataType dtype;
  Expr length;
  bool operator==(const ScatterAtom&) const = default;
};

struct GatherAtom {
  Expr root;
  DataType dtype;
  Expr length;
  bool operator==(const GatherAtom&) const = default;
};

struct BcastAtom {
  Expr root;
  DataType dtype;
  Expr length;
  bool operator==(const BcastAtom&) const = default;
};

struct AllreduceAtom {
  DataType dtype;
  Expr length;
  ReduceOp op;
  bool operator==(const AllreduceAtom&) const = default;
};

using GlobalAtom = std::variant<MessageAtom, ScatterAtom, GatherAtom, BcastAtom, AllreduceAtom>;
using LocalAtom =
    std::variant<SendAtom, ReceiveAtom, ScatterAtom, GatherAtom, BcastAtom, AllreduceAtom>;

std::string to_string(const GlobalAtom& a);
std::string to_string(const LocalAtom& a);

/// True for scatter/gather/bcast/allreduce.
bool is_collective(const GlobalAtom& a);
bool is_collective(const LocalAtom& a);

// --------------------------------------------------------------------------
// Type terms

template <class Atom>
struct TypeNode;

/// An immutable protocol term: end, atom prefix, loop, or choice. Copies share
/// structure. Equality is structural and ignores source positions.
template <class Atom>
class Type {
 public:
  static Type end(SourceLoc loc = {});
  static Type prefix(Atom atom, Type cont, SourceLoc loc = {});
  static Type loop(Type body, Type cont, SourceLoc loc = {});
  static Type choice(Type on_true, Type on_false, Type cont, SourceLoc loc = {});

  const TypeNode<Atom>& node() const { return *node_; }
  SourceLoc loc() const;

  bool is_end() const;
  bool is_prefix() const;
  bool is_loop() const;
  bool is_choice() const;

  friend bool operator==(const Type& a, const Type& b) {
    return a.node_ == b.node_ || a.node_->value == b.node_->value;
  }

 private:
  explicit Type(std::shared_ptr<const TypeNode<Atom>> node) : node_(std::move(node)) {}
  std::shared_ptr<const TypeNode<Atom>> node_;
};

template <class Atom>
struct EndNode {
  bool operator==(const EndNode&) const = default;
};

template <class Atom>
struct PrefixNode {
  Atom atom;
  Type<Atom> cont;
  bool operator==(const PrefixNode&) const = default;
};

template <class Atom>
struct LoopNode {
  Type<Atom> body;
  Type<Atom> cont;
  bool operator==(const LoopNode&) const = default;
};

template <class Atom>
struct ChoiceNode {
  Type<Atom> on_true;
  Type<Atom> on_false;
  Type<Atom> cont;
  bool operator==(const ChoiceNode&) const = default;
};

template <class Atom>
struct TypeNode {
  std::variant<EndNode<Atom>, PrefixNode<Atom>, LoopNode<Atom>, ChoiceNode<Atom>> value;
  SourceLoc loc;
};

template <class Atom>
Type<Atom> Type<Atom>::end(SourceLoc loc) {
  return Type(std::make_shared<const TypeNode<Atom>>(TypeNode<Atom>{EndNode<Atom>{}, loc}));
}

template <class Atom>
Type<Atom> Type<Atom>::prefix(Atom atom, Type cont, SourceLoc loc) {
  return Type(std::make_shared<const TypeNode<Atom>>(
      TypeNode<Atom>{PrefixNode<Atom>{std::move(atom), std::move(cont)}, loc}));
}

template <class Atom>
Type<Atom> Type<Atom>::loop(Type body, Type cont, SourceLoc loc) {
  return Type(std::make_shared<const TypeNode<Atom>>(
      TypeNode<Atom>{LoopNode<Atom>{std::move(body), std::move(cont)}, loc}));
}

template <class Atom>
Type<Atom> Type<Atom>::choice(Type on_true, Type on_false, Type cont, SourceLoc loc) {
  return Type(std::make_shared<const TypeNode<Atom>>(TypeNode<Atom>{
      ChoiceNode<Atom>{std::move(on_true), std::move(on_false), std::move(cont)}, loc}));
}

template <class Atom>
SourceLoc Type<Atom>::loc() const {
  return node_->loc;
}

template <class Atom>
bool Type<Atom>::is_end() const {
  return std::holds_alternative<EndNode<Atom>>(node_->value);
}

template <class Atom>
bool Type<Atom>::is_prefix() const {
  return std::holds_alternative<PrefixNode<Atom>>(node_->value);
}

template <class Atom>
bool Type<Atom>::is_loop() const {
  return std::holds_alternative<LoopNode<Atom>>(node_->value);
}

template <class Atom>
bool Type<Atom>::is_choice() const {
  return std::holds_alternative<ChoiceNode<Atom>>(node_->value);
}

using GlobalType = Type<GlobalAtom>;
using LocalType = Type<LocalAtom>;

/// Appends `cont` at the terminating `end` of `t`'s spine (not inside loop
/// bodies or choice branches).
template <class Atom>
Type<Atom> sequence(const Type<Atom>& t, const Type<Atom>& cont) {
  const auto& v = t.node().value;
  if (std::holds_alternative<EndNode<Atom>>(v)) return cont;
  if (const auto* p = std::get_if<PrefixNode<Atom>>(&v)) {
    return Type<Atom>::prefix(p->atom, sequence(p->cont, cont), t.loc());
  }
  if (const auto* l = std::get_if<LoopNode<Atom>>(&v)) {
    return Type<Atom>::loop(l->body, sequence(l->cont, cont), t.loc());
  }
  const auto& c = std::get<ChoiceNode<Atom>>(v);
  return Type<Atom>::choice(c.on_true, c.on_false, sequence(c.cont, cont), t.loc());
}

// --------------------------------------------------------------------------
// Protocols

struct PiBinder {
  std::string name;
  Kind kind;
  SourceLoc loc;

  friend bool operator==(const PiBinder& a, const PiBinder& b) {
    return a.name == b.name && a.kind == b.kind;
  }
};

struct Protocol {
  std::vector<PiBinder> binders;
  std::int64_t num_procs = 2;
  GlobalType body = GlobalType::end();
  SourceLoc num_procs_loc;

  friend bool operator==(const Protocol& a, const Protocol& b) {
    return a.binders == b.binders && a.num_procs == b.num_procs && a.body == b.body;
  }
};

/// Contents of a per-rank `.clt` file: optional `rank R.` and `nprocs N.`
/// headers followed by a local type.
struct LocalTypeFile {
  std::optional<std::int64_t> rank;
  std::optional<std::int64_t> num_procs;
  LocalType type = LocalType::end();

  friend bool operator==(const LocalTypeFile&, const LocalTypeFile&) = default;
};

/// Parses `.cty` text. Without an `nprocs` clause the protocol has two
/// processes. Throws SyntaxError with position and expected-token set.
Protocol parse_protocol(std::string_view text);

/// Parses just a global type, without binders or `nprocs`.
GlobalType parse_global_type(std::string_view text);

LocalType parse_local_type(std::string_view text);
LocalTypeFile parse_local_type_file(std::string_view text);

std::string print(const GlobalType& t);
std::string print(const LocalType& t);
std::string print_protocol(const Protocol& p);
std::string print_local_type_file(const LocalTypeFile& f);

}  // namespace commtype
