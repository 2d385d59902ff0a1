#pragma once

// Tokenizer and recursive-descent helpers shared by the protocol, local-type
// and MiniMPI parsers.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "commtype/diagnostic.hpp"
#include "commtype/expr.hpp"

namespace commtype::detail {

enum class TokenKind { Identifier, Integer, Punct, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;
  std::uint64_t integer = 0;  // magnitude; Integer tokens only
  SourceLoc loc;
};

/// `//` comments run to end of line. Throws SyntaxError on stray characters.
std::vector<Token> tokenize(std::string_view text);

class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> tokens);

  const Token& peek(std::size_t ahead = 0) const;
  const Token& advance();
  std::size_t position() const { return pos_; }
  void rewind(std::size_t pos) { pos_ = pos; }

  bool at_end() const { return peek().kind == TokenKind::End; }
  bool is_punct(std::string_view p, std::size_t ahead = 0) const;
  bool is_word(std::string_view w, std::size_t ahead = 0) const;

  bool accept_punct(std::string_view p);
  bool accept_word(std::string_view w);

  const Token& expect_punct(std::string_view p);
  const Token& expect_word(std::string_view w);
  std::string expect_identifier(std::string_view what = "identifier");
  std::int64_t expect_integer();
  void expect_end();

  [[noreturn]] void fail(std::string message, std::vector<std::string> expected = {}) const;

  /// Guards recursive descent against pathological nesting.
  class DepthGuard {
   public:
    explicit DepthGuard(TokenStream& s);
    ~DepthGuard();
    DepthGuard(const DepthGuard&) = delete;
    DepthGuard& operator=(const DepthGuard&) = delete;

   private:
    TokenStream& s_;
  };

  // Expression grammar shared by every front end.
  Expr parse_expr();
  Pred parse_pred();
  Kind parse_kind();

 private:
  Expr parse_additive();
  Expr parse_multiplicative();
  Expr parse_unary();
  Expr parse_primary();
  Pred parse_or();
  Pred parse_and();
  Pred parse_not();
  Pred parse_comparison();

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

std::string describe(const Token& t);

}  // namespace commtype::detail
