#include "lexer.hpp"

#include <array>
#include <cctype>
#include <limits>

namespace commtype::detail {

namespace {

constexpr int kMaxDepth = 256;

// No "--"/"++": `a--3` must lex as a - -3.
constexpr std::array<std::string_view, 6> kTwoCharPuncts = {"==", "!=", "<=", ">=", "&&", "||"};

constexpr std::string_view kOneCharPuncts = ".,;:()[]{}|+-*/%<>!=";

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto bump = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };

  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      bump(1);
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') bump(1);
      continue;
    }
    SourceLoc loc{line, col};
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      out.push_back({TokenKind::Identifier, std::string(text.substr(i, j - i)), 0, loc});
      bump(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      std::uint64_t value = 0;
      bool overflow = false;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
        auto digit = static_cast<std::uint64_t>(text[j] - '0');
        if (value > (std::numeric_limits<std::uint64_t>::max() - digit) / 10) overflow = true;
        value = value * 10 + digit;
        ++j;
      }
      if (j < text.size() && is_ident_start(text[j])) {
        throw SyntaxError(loc, "malformed number");
      }
      // One past INT64_MAX is admitted so that a negated literal can reach INT64_MIN.
      constexpr auto kLimit =
          static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) + 1;
      if (overflow || value > kLimit) {
        throw SyntaxError(loc, "integer literal out of range");
      }
      out.push_back({TokenKind::Integer, std::string(text.substr(i, j - i)), value, loc});
      bump(j - i);
      continue;
    }
    bool matched = false;
    if (i + 1 < text.size()) {
      std::string_view two = text.substr(i, 2);
      for (auto p : kTwoCharPuncts) {
        if (two == p) {
          out.push_back({TokenKind::Punct, std::string(p), 0, loc});
          bump(2);
          matched = true;
          break;
        }
      }
    }
    if (matched) continue;
    if (kOneCharPuncts.find(c) != std::string_view::npos) {
      out.push_back({TokenKind::Punct, std::string(1, c), 0, loc});
      bump(1);
      continue;
    }
    std::string shown = std::isprint(static_cast<unsigned char>(c))
                            ? std::string("'") + c + "'"
                            : "byte " + std::to_string(static_cast<unsigned char>(c));
    throw SyntaxError(loc, "unexpected character " + shown);
  }
  out.push_back({TokenKind::End, "", 0, SourceLoc{line, col}});
  return out;
}

std::string describe(const Token& t) {
  switch (t.kind) {
    case TokenKind::End:
      return "end of input";
    case TokenKind::Integer:
      return "integer " + t.text;
    case TokenKind::Identifier:
      return "'" + t.text + "'";
    case TokenKind::Punct:
      return "'" + t.text + "'";
  }
  return "?";
}

TokenStream::TokenStream(std::vector<Token> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_.back().kind != TokenKind::End) {
    tokens_.push_back({TokenKind::End, "", 0, {}});
  }
}

const Token& TokenStream::peek(std::size_t ahead) const {
  std::size_t idx = std::min(pos_ + ahead, tokens_.size() - 1);
  return tokens_[idx];
}

const Token& TokenStream::advance() {
  const Token& t = tokens_[pos_];
  if (pos_ + 1 < tokens_.size()) ++pos_;
  return t;
}

bool TokenStream::is_punct(std::string_view p, std::size_t ahead) const {
  const Token& t = peek(ahead);
  return t.kind == TokenKind::Punct && t.text == p;
}

bool TokenStream::is_word(std::string_view w, std::size_t ahead) const {
  const Token& t = peek(ahead);
  return t.kind == TokenKind::Identifier && t.text == w;
}

bool TokenStream::accept_punct(std::string_view p) {
  if (!is_punct(p)) return false;
  advance();
  return true;
}

bool TokenStream::accept_word(std::string_view w) {
  if (!is_word(w)) return false;
  advance();
  return true;
}

const Token& TokenStream::expect_punct(std::string_view p) {
  if (!is_punct(p)) fail("unexpected " + describe(peek()), {"'" + std::string(p) + "'"});
  return advance();
}

const Token& TokenStream::expect_word(std::string_view w) {
  if (!is_word(w)) fail("unexpected " + describe(peek()), {"'" + std::string(w) + "'"});
  return advance();
}

std::string TokenStream::expect_identifier(std::string_view what) {
  if (peek().kind != TokenKind::Identifier) fail("unexpected " + describe(peek()), {std::string(what)});
  return advance().text;
}

std::int64_t TokenStream::expect_integer() {
  bool negative = accept_punct("-");
  if (peek().kind != TokenKind::Integer) fail("unexpected " + describe(peek()), {"integer"});
  const Token& t = advance();
  constexpr auto kMax = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
  if (negative) {
    if (t.integer == kMax + 1) return std::numeric_limits<std::int64_t>::min();
    return -static_cast<std::int64_t>(t.integer);
  }
  if (t.integer > kMax) throw SyntaxError(t.loc, "integer literal out of range");
  return static_cast<std::int64_t>(t.integer);
}

void TokenStream::expect_end() {
  if (!at_end()) fail("unexpected " + describe(peek()) + " after end of input", {"end of input"});
}

void TokenStream::fail(std::string message, std::vector<std::string> expected) const {
  throw SyntaxError(peek().loc, std::move(message), std::move(expected));
}

TokenStream::DepthGuard::DepthGuard(TokenStream& s) : s_(s) {
  if (++s_.depth_ > kMaxDepth) {
    --s_.depth_;
    s_.fail("nesting too deep");
  }
}

TokenStream::DepthGuard::~DepthGuard() { --s_.depth_; }

// --------------------------------------------------------------------------
// Expressions

Expr TokenStream::parse_expr() { return parse_additive(); }

Expr TokenStream::parse_additive() {
  Expr lhs = parse_multiplicative();
  for (;;) {
    if (accept_punct("+")) {
      lhs = Expr::binary(BinaryOp::Add, lhs, parse_multiplicative());
    } else if (accept_punct("-")) {
      lhs = Expr::binary(BinaryOp::Sub, lhs, parse_multiplicative());
    } else {
      return lhs;
    }
  }
}

Expr TokenStream::parse_multiplicative() {
  Expr lhs = parse_unary();
  for (;;) {
    if (accept_punct("*")) {
      lhs = Expr::binary(BinaryOp::Mul, lhs, parse_unary());
    } else if (accept_punct("/")) {
      lhs = Expr::binary(BinaryOp::Div, lhs, parse_unary());
    } else if (accept_punct("%")) {
      lhs = Expr::binary(BinaryOp::Mod, lhs, parse_unary());
    } else {
      return lhs;
    }
  }
}

Expr TokenStream::parse_unary() {
  DepthGuard guard(*this);
  if (is_punct("-")) {
    // A negated literal folds into a literal; anything else becomes 0 - e.
    if (peek(1).kind == TokenKind::Integer) return Expr::literal(expect_integer());
    advance();
    return Expr::binary(BinaryOp::Sub, Expr::literal(0), parse_unary());
  }
  return parse_primary();
}

Expr TokenStream::parse_primary() {
  const Token& t = peek();
  if (t.kind == TokenKind::Integer) return Expr::literal(expect_integer());
  if (t.kind == TokenKind::Identifier) return Expr::var(advance().text);
  if (accept_punct("(")) {
    Expr e = parse_expr();
    expect_punct(")");
    return e;
  }
  fail("unexpected " + describe(t), {"integer", "identifier", "'('", "'-'"});
}

// --------------------------------------------------------------------------
// Predicates

Pred TokenStream::parse_pred() { return parse_or(); }

Pred TokenStream::parse_or() {
  Pred lhs = parse_and();
  while (accept_punct("||")) lhs = Pred::disj(lhs, parse_and());
  return lhs;
}

Pred TokenStream::parse_and() {
  Pred lhs = parse_not();
  while (accept_punct("&&")) lhs = Pred::conj(lhs, parse_not());
  return lhs;
}

Pred TokenStream::parse_not() {
  DepthGuard guard(*this);
  if (accept_punct("!")) return Pred::negate(parse_not());
  if (accept_word("true")) return Pred::constant(true);
  if (accept_word("false")) return Pred::constant(false);
  if (is_punct("(")) {
    // `(` opens either a parenthesized predicate or an arithmetic operand of
    // a comparison; try the predicate reading first.
    std::size_t saved = position();
    try {
      advance();
      Pred inner = parse_pred();
      expect_punct(")");
      if (!is_punct("==") && !is_punct("!=") && !is_punct("<") && !is_punct("<=") &&
          !is_punct(">") && !is_punct(">=") && !is_punct("+") && !is_punct("-") &&
          !is_punct("*") && !is_punct("/") && !is_punct("%")) {
        return inner;
      }
    } catch (const SyntaxError&) {
    }
    rewind(saved);
  }
  return parse_comparison();
}

Pred TokenStream::parse_comparison() {
  Expr lhs = parse_expr();
  static constexpr std::array<std::pair<std::string_view, CompareOp>, 6> kOps = {{
      {"==", CompareOp::Eq},
      {"!=", CompareOp::Ne},
      {"<=", CompareOp::Le},
      {">=", CompareOp::Ge},
      {"<", CompareOp::Lt},
      {">", CompareOp::Gt},
  }};
  for (auto [text, op] : kOps) {
    if (accept_punct(text)) return Pred::compare(op, lhs, parse_expr());
  }
  fail("unexpected " + describe(peek()), {"comparison operator"});
}

// --------------------------------------------------------------------------
// Kinds

Kind TokenStream::parse_kind() {
  DepthGuard guard(*this);
  Kind k = Kind::integer();
  if (accept_word("int")) {
    k = Kind::integer();
  } else if (accept_word("nat")) {
    k = Kind::nat();
  } else if (accept_word("float")) {
    k = Kind::floating();
  } else if (accept_punct("{")) {
    std::string var = expect_identifier("bound variable");
    expect_punct(":");
    Kind base = parse_kind();
    expect_punct("|");
    Pred pred = parse_pred();
    expect_punct("}");
    k = Kind::refined(base, var, pred);
  } else {
    fail("unexpected " + describe(peek()), {"'int'", "'nat'", "'float'", "'{'"});
  }
  while (accept_punct("[")) {
    Expr len = parse_expr();
    expect_punct("]");
    k = Kind::array(k, len);
  }
  return k;
}

}  // namespace commtype::detail
