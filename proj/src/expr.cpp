#include "commtype/expr.hpp"

#include <limits>

namespace commtype {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void overflow(BinaryOp op, std::int64_t a, std::int64_t b) {
  throw EvalError(EvalError::Reason::Overflow, "integer overflow in " + std::to_string(a) + " " +
                                                   to_string(op) + " " + std::to_string(b));
}

std::int64_t apply(BinaryOp op, std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  switch (op) {
    case BinaryOp::Add:
      if (__builtin_add_overflow(a, b, &r)) overflow(op, a, b);
      return r;
    case BinaryOp::Sub:
      if (__builtin_sub_overflow(a, b, &r)) overflow(op, a, b);
      return r;
    case BinaryOp::Mul:
      if (__builtin_mul_overflow(a, b, &r)) overflow(op, a, b);
      return r;
    case BinaryOp::Div:
    case BinaryOp::Mod:
      if (b == 0) {
        throw EvalError(EvalError::Reason::DivisionByZero,
                        "division by zero in " + std::to_string(a) + " " + to_string(op) + " 0");
      }
      if (a == std::numeric_limits<std::int64_t>::min() && b == -1) {
        if (op == BinaryOp::Mod) return 0;
        overflow(op, a, b);
      }
      // C++ shares C's truncating division and dividend-signed remainder.
      return op == BinaryOp::Div ? a / b : a % b;
  }
  return 0;
}

int precedence(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add:
    case BinaryOp::Sub:
      return 1;
    case BinaryOp::Mul:
    case BinaryOp::Div:
    case BinaryOp::Mod:
      return 2;
  }
  return 0;
}

// Precedence of the top-level operator; atoms bind tightest.
int precedence(const Expr& e) {
  if (const auto* b = std::get_if<Binary>(&e.node().value)) return precedence(b->op);
  return 3;
}

int precedence(const Pred& p) {
  return std::visit(Overloaded{
                        [](const Or&) { return 1; },
                        [](const And&) { return 2; },
                        [](const Not&) { return 3; },
                        [](const auto&) { return 4; },
                    },
                    p.node().value);
}

void collect(const Expr& e, std::set<std::string>& out) {
  std::visit(Overloaded{
                 [](const Literal&) {},
                 [&](const Variable& v) { out.insert(v.name); },
                 [&](const Binary& b) {
                   collect(b.lhs, out);
                   collect(b.rhs, out);
                 },
             },
             e.node().value);
}

void collect(const Pred& p, std::set<std::string>& out) {
  std::visit(Overloaded{
                 [](const BoolConst&) {},
                 [&](const Compare& c) {
                   collect(c.lhs, out);
                   collect(c.rhs, out);
                 },
                 [&](const Not& n) { collect(n.operand, out); },
                 [&](const And& a) {
                   collect(a.lhs, out);
                   collect(a.rhs, out);
                 },
                 [&](const Or& o) {
                   collect(o.lhs, out);
                   collect(o.rhs, out);
                 },
             },
             p.node().value);
}

}  // namespace

// --------------------------------------------------------------------------
// Construction and equality

Expr::Expr(std::int64_t value)
    : node_(std::make_shared<const ExprNode>(ExprNode{Literal{value}})) {}

Expr Expr::var(std::string name) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{Variable{std::move(name)}}));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  return Expr(std::make_shared<const ExprNode>(
      ExprNode{Binary{op, std::move(lhs), std::move(rhs)}}));
}

bool Expr::is_literal() const { return std::holds_alternative<Literal>(node_->value); }

std::optional<std::int64_t> Expr::literal_value() const {
  if (const auto* l = std::get_if<Literal>(&node_->value)) return l->value;
  return std::nullopt;
}

bool operator==(const Expr& a, const Expr& b) {
  return a.node_ == b.node_ || a.node_->value == b.node_->value;
}

Pred Pred::constant(bool value) {
  return Pred(std::make_shared<const PredNode>(PredNode{BoolConst{value}}));
}

Pred Pred::compare(CompareOp op, Expr lhs, Expr rhs) {
  return Pred(std::make_shared<const PredNode>(
      PredNode{Compare{op, std::move(lhs), std::move(rhs)}}));
}

Pred Pred::negate(Pred p) {
  return Pred(std::make_shared<const PredNode>(PredNode{Not{std::move(p)}}));
}

Pred Pred::conj(Pred a, Pred b) {
  return Pred(std::make_shared<const PredNode>(PredNode{And{std::move(a), std::move(b)}}));
}

Pred Pred::disj(Pred a, Pred b) {
  return Pred(std::make_shared<const PredNode>(PredNode{Or{std::move(a), std::move(b)}}));
}

bool operator==(const Pred& a, const Pred& b) {
  return a.node_ == b.node_ || a.node_->value == b.node_->value;
}

Kind Kind::integer() { return Kind(std::make_shared<const KindNode>(KindNode{IntKind{}})); }
Kind Kind::nat() { return Kind(std::make_shared<const KindNode>(KindNode{NatKind{}})); }
Kind Kind::floating() { return Kind(std::make_shared<const KindNode>(KindNode{FloatKind{}})); }

Kind Kind::array(Kind element, Expr length) {
  return Kind(std::make_shared<const KindNode>(
      KindNode{ArrayKind{std::move(element), std::move(length)}}));
}

Kind Kind::refined(Kind base, std::string var, Pred pred) {
  return Kind(std::make_shared<const KindNode>(
      KindNode{RefinedKind{std::move(base), std::move(var), std::move(pred)}}));
}

bool Kind::is_integer_valued() const {
  return std::visit(Overloaded{
                        [](const IntKind&) { return true; },
                        [](const NatKind&) { return true; },
                        [](const RefinedKind& r) { return r.base.is_integer_valued(); },
                        [](const auto&) { return false; },
                    },
                    node_->value);
}

bool operator==(const Kind& a, const Kind& b) {
  return a.node_ == b.node_ || a.node_->value == b.node_->value;
}

// --------------------------------------------------------------------------
// Evaluation

std::int64_t eval(const Expr& e, const Env& env) {
  return std::visit(Overloaded{
                        [](const Literal& l) { return l.value; },
                        [&](const Variable& v) {
                          auto it = env.find(v.name);
                          if (it == env.end()) {
                            throw EvalError(EvalError::Reason::UnboundVariable,
                                            "unbound variable '" + v.name + "'");
                          }
                          return it->second;
                        },
                        [&](const Binary& b) {
                          std::int64_t lhs = eval(b.lhs, env);
                          std::int64_t rhs = eval(b.rhs, env);
                          return apply(b.op, lhs, rhs);
                        },
                    },
                    e.node().value);
}

bool eval(const Pred& p, const Env& env) {
  return std::visit(Overloaded{
                        [](const BoolConst& c) { return c.value; },
                        [&](const Compare& c) {
                          std::int64_t a = eval(c.lhs, env);
                          std::int64_t b = eval(c.rhs, env);
                          switch (c.op) {
                            case CompareOp::Eq: return a == b;
                            case CompareOp::Ne: return a != b;
                            case CompareOp::Lt: return a < b;
                            case CompareOp::Le: return a <= b;
                            case CompareOp::Gt: return a > b;
                            case CompareOp::Ge: return a >= b;
                          }
                          return false;
                        },
                        [&](const Not& n) { return !eval(n.operand, env); },
                        [&](const And& a) { return eval(a.lhs, env) && eval(a.rhs, env); },
                        [&](const Or& o) { return eval(o.lhs, env) || eval(o.rhs, env); },
                    },
                    p.node().value);
}

Kind desugar(const Kind& k) {
  return std::visit(Overloaded{
                        [](const NatKind&) {
                          return Kind::refined(
                              Kind::integer(), "n",
                              Pred::compare(CompareOp::Ge, Expr::var("n"), Expr::literal(0)));
                        },
                        [](const ArrayKind& a) { return Kind::array(desugar(a.element), a.length); },
                        [](const RefinedKind& r) {
                          return Kind::refined(desugar(r.base), r.var, r.pred);
                        },
                        [&](const auto&) { return k; },
                    },
                    k.node().value);
}

namespace {

bool check_layers(const Kind& k, std::int64_t v, const Env& env) {
  return std::visit(Overloaded{
                        [](const IntKind&) { return true; },
                        [&](const RefinedKind& r) {
                          if (!check_layers(r.base, v, env)) return false;
                          Env scoped = env;
                          scoped.insert_or_assign(r.var, v);
                          return eval(r.pred, scoped);
                        },
                        [&](const auto&) -> bool {
                          throw KindMismatch("kind " + to_string(k) + " is not integer-valued");
                        },
                    },
                    k.node().value);
}

}  // namespace

bool check_refinement(const Kind& k, std::int64_t v, const Env& env) {
  return check_layers(desugar(k), v, env);
}

bool expr_equal(const Expr& a, const Expr& b, const Env& env) {
  return eval(a, env) == eval(b, env);
}

std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  collect(e, out);
  return out;
}

std::set<std::string> free_variables(const Pred& p) {
  std::set<std::string> out;
  collect(p, out);
  return out;
}

// --------------------------------------------------------------------------
// Printing

std::string to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
  }
  return "?";
}

std::string to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "==";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "?";
}

std::string to_string(const Expr& e) {
  return std::visit(Overloaded{
                        [](const Literal& l) { return std::to_string(l.value); },
                        [](const Variable& v) { return v.name; },
                        [](const Binary& b) {
                          // Left-associative: the right operand needs parentheses at
                          // equal precedence, the left only at lower.
                          int prec = precedence(b.op);
                          std::string lhs = to_string(b.lhs);
                          std::string rhs = to_string(b.rhs);
                          if (precedence(b.lhs) < prec) lhs = "(" + lhs + ")";
                          if (precedence(b.rhs) <= prec) rhs = "(" + rhs + ")";
                          return lhs + to_string(b.op) + rhs;
                        },
                    },
                    e.node().value);
}

std::string to_string(const Pred& p) {
  auto wrap = [](const Pred& sub, int min_prec) {
    std::string s = to_string(sub);
    return precedence(sub) < min_prec ? "(" + s + ")" : s;
  };
  return std::visit(Overloaded{
                        [](const BoolConst& c) { return std::string(c.value ? "true" : "false"); },
                        [](const Compare& c) {
                          return to_string(c.lhs) + to_string(c.op) + to_string(c.rhs);
                        },
                        [&](const Not& n) {
                          // `!a<b` would read as C's `(!a)<b`.
                          return "!" + wrap(n.operand, std::holds_alternative<Compare>(
                                                           n.operand.node().value)
                                                           ? 5
                                                           : 3);
                        },
                        [&](const And& a) { return wrap(a.lhs, 2) + " && " + wrap(a.rhs, 3); },
                        [&](const Or& o) { return wrap(o.lhs, 1) + " || " + wrap(o.rhs, 2); },
                    },
                    p.node().value);
}

std::string to_string(const Kind& k) {
  return std::visit(Overloaded{
                        [](const IntKind&) { return std::string("int"); },
                        [](const NatKind&) { return std::string("nat"); },
                        [](const FloatKind&) { return std::string("float"); },
                        [](const ArrayKind& a) {
                          return to_string(a.element) + "[" + to_string(a.length) + "]";
                        },
                        [](const RefinedKind& r) {
                          return "{" + r.var + ":" + to_string(r.base) + "|" + to_string(r.pred) +
                                 "}";
                        },
                    },
                    k.node().value);
}

}  // namespace commtype
