#pragma once

// Integer expressions, refinement predicates and kinds.
//
// Expressions, predicates and kinds are immutable trees with shared
// structure: copying one is a reference-count bump. Equality is structural.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>

namespace commtype {

/// Identifier -> value bindings. Lookup of an unbound name is an error.
using Env = std::map<std::string, std::int64_t, std::less<>>;

class EvalError : public std::runtime_error {
 public:
  enum class Reason { UnboundVariable, DivisionByZero, Overflow };

  EvalError(Reason reason, std::string message)
      : std::runtime_error(std::move(message)), reason_(reason) {}

  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

class KindMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------------------
// Expr

enum class BinaryOp { Add, Sub, Mul, Div, Mod };

struct ExprNode;

class Expr {
 public:
  Expr(std::int64_t value);  // NOLINT(google-explicit-constructor): literals read naturally

  static Expr literal(std::int64_t value) { return Expr(value); }
  static Expr var(std::string name);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

  const ExprNode& node() const { return *node_; }

  bool is_literal() const;
  /// The literal value, if this expression is a literal.
  std::optional<std::int64_t> literal_value() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct Literal {
  std::int64_t value;
  bool operator==(const Literal&) const = default;
};

struct Variable {
  std::string name;
  bool operator==(const Variable&) const = default;
};

struct Binary {
  BinaryOp op;
  Expr lhs;
  Expr rhs;
  bool operator==(const Binary&) const = default;
};

struct ExprNode {
  std::variant<Literal, Variable, Binary> value;
};

inline Expr operator+(Expr a, Expr b) { return Expr::binary(BinaryOp::Add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return Expr::binary(BinaryOp::Sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return Expr::binary(BinaryOp::Mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return Expr::binary(BinaryOp::Div, std::move(a), std::move(b)); }
inline Expr operator%(Expr a, Expr b) { return Expr::binary(BinaryOp::Mod, std::move(a), std::move(b)); }

// --------------------------------------------------------------------------
// Pred

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

struct PredNode;

class Pred {
 public:
  static Pred constant(bool value);
  static Pred compare(CompareOp op, Expr lhs, Expr rhs);
  static Pred negate(Pred p);
  static Pred conj(Pred a, Pred b);
  static Pred disj(Pred a, Pred b);

  const PredNode& node() const { return *node_; }

  friend bool operator==(const Pred& a, const Pred& b);

 private:
  explicit Pred(std::shared_ptr<const PredNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const PredNode> node_;
};

struct BoolConst {
  bool value;
  bool operator==(const BoolConst&) const = default;
};
struct Compare {
  CompareOp op;
  Expr lhs;
  Expr rhs;
  bool operator==(const Compare&) const = default;
};
struct Not {
  Pred operand;
  bool operator==(const Not&) const = default;
};
struct And {
  Pred lhs;
  Pred rhs;
  bool operator==(const And&) const = default;
};
struct Or {
  Pred lhs;
  Pred rhs;
  bool operator==(const Or&) const = default;
};

struct PredNode {
  std::variant<BoolConst, Compare, Not, And, Or> value;
};

inline Pred operator&&(Pred a, Pred b) { return Pred::conj(std::move(a), std::move(b)); }
inline Pred operator||(Pred a, Pred b) { return Pred::disj(std::move(a), std::move(b)); }
inline Pred operator!(Pred p) { return Pred::negate(std::move(p)); }

// --------------------------------------------------------------------------
// Kind

struct KindNode;

class Kind {
 public:
  static Kind integer();
  static Kind nat();
  static Kind floating();
  static Kind array(Kind element, Expr length);
  static Kind refined(Kind base, std::string var, Pred pred);

  const KindNode& node() const { return *node_; }

  /// int, nat, or any refinement thereof.
  bool is_integer_valued() const;

  friend bool operator==(const Kind& a, const Kind& b);

 private:
  explicit Kind(std::shared_ptr<const KindNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const KindNode> node_;
};

struct IntKind {
  bool operator==(const IntKind&) const = default;
};
struct NatKind {
  bool operator==(const NatKind&) const = default;
};
struct FloatKind {
  bool operator==(const FloatKind&) const = default;
};
struct ArrayKind {
  Kind element;
  Expr length;
  bool operator==(const ArrayKind&) const = default;
};
struct RefinedKind {
  Kind base;
  std::string var;
  Pred pred;
  bool operator==(const RefinedKind&) const = default;
};

struct KindNode {
  std::variant<IntKind, NatKind, FloatKind, ArrayKind, RefinedKind> value;
};

// --------------------------------------------------------------------------
// Operations

/// C semantics on signed 64-bit integers: division truncates toward zero,
/// `%` takes the sign of the dividend. Overflow is an error.
std::int64_t eval(const Expr& e, const Env& env);

bool eval(const Pred& p, const Env& env);

/// Replaces every `nat` by `{n:int|n>=0}`.
Kind desugar(const Kind& k);

/// True iff `v` satisfies every refinement layer of `k`. Throws KindMismatch
/// for float and array kinds.
bool check_refinement(const Kind& k, std::int64_t v, const Env& env);

/// Compares by value under `env`; never symbolically.
bool expr_equal(const Expr& a, const Expr& b, const Env& env);

std::set<std::string> free_variables(const Expr& e);
std::set<std::string> free_variables(const Pred& p);

std::string to_string(BinaryOp op);
std::string to_string(CompareOp op);
std::string to_string(const Expr& e);
std::string to_string(const Pred& p);
std::string to_string(const Kind& k);

}  // namespace commtype
