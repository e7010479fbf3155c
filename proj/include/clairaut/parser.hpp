#pragma once

// Tokenizer and recursive-descent parser for infix expressions.
//
// Precedence, tightest first: '^' (right-associative), unary '-', '*' '/',
// '+' '-'. A velocity is written d(name) and becomes the flat symbol "d(name)".

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clairaut/errors.hpp"
#include "clairaut/expr.hpp"

namespace clairaut {

struct Token {
  enum class Type { Ident, Number, Punct, End };
  Type type = Type::End;
  std::string text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

/// Splits text into identifiers, numbers and single-character punctuation.
/// '#' starts a comment running to the end of the line.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t k) {
    for (std::size_t j = 0; j < k; ++j, ++i) {
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
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      t.type = Token::Type::Ident;
      t.text = std::string(text.substr(i, j - i));
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && text[j] == '.') {
        ++j;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
          while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
          j = k;
        }
      }
      t.type = Token::Type::Number;
      t.text = std::string(text.substr(i, j - i));
      if (t.text == ".") throw ParseError("malformed number", line, col, {"number"});
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
        throw ParseError("malformed number '" + t.text + "'", line, col, {"number"});
      advance(j - i);
    } else if (std::string_view("+-*/^(),;={}").find(c) != std::string_view::npos) {
      t.type = Token::Type::Punct;
      t.text = std::string(1, c);
      advance(1);
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.type = Token::Type::End;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

inline std::string velocity_name(std::string_view coord) {
  return "d(" + std::string(coord) + ")";
}

/// Cursor over a token stream; shared by the expression and model parsers.
class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  const Token& peek(std::size_t k = 0) const {
    return tokens_[std::min(pos_ + k, tokens_.size() - 1)];
  }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < tokens_.size() - 1) ++pos_;
    return t;
  }
  bool at_end() const { return peek().type == Token::Type::End; }
  bool is_punct(char c, std::size_t k = 0) const {
    const auto& t = peek(k);
    return t.type == Token::Type::Punct && t.text[0] == c;
  }
  bool is_ident(std::string_view word) const {
    return peek().type == Token::Type::Ident && peek().text == word;
  }

  [[noreturn]] void fail(const std::string& message, std::set<std::string> expected) const {
    const auto& t = peek();
    std::string got = t.type == Token::Type::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(message + ", got " + got, t.line, t.column, std::move(expected));
  }

  const Token& expect_punct(char c) {
    if (!is_punct(c)) fail("unexpected token", {std::string("'") + c + "'"});
    return next();
  }
  const Token& expect_ident() {
    if (peek().type != Token::Type::Ident) fail("unexpected token", {"identifier"});
    return next();
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

class ExpressionParser {
 public:
  explicit ExpressionParser(TokenStream& ts) : ts_(ts) {}

  Expr parse_expr() {
    std::vector<Expr> terms;
    terms.push_back(parse_term());
    while (ts_.is_punct('+') || ts_.is_punct('-')) {
      bool minus = ts_.next().text[0] == '-';
      Expr t = parse_term();
      terms.push_back(minus ? Expr::negate(std::move(t)) : std::move(t));
    }
    return terms.size() == 1 ? terms.front() : Expr::sum(std::move(terms));
  }

 private:
  static const std::set<std::string>& operand_starts() {
    static const std::set<std::string> s{"number", "identifier", "'('", "'-'"};
    return s;
  }

  Expr parse_term() {
    std::vector<Expr> factors;
    factors.push_back(parse_unary());
    while (ts_.is_punct('*') || ts_.is_punct('/')) {
      bool divide = ts_.next().text[0] == '/';
      Expr rhs = parse_unary();
      if (divide) {
        Expr num = factors.size() == 1 ? factors.front() : Expr::product(std::move(factors));
        factors.clear();
        factors.push_back(Expr::quotient(std::move(num), std::move(rhs)));
      } else {
        factors.push_back(std::move(rhs));
      }
    }
    return factors.size() == 1 ? factors.front() : Expr::product(std::move(factors));
  }

  Expr parse_unary() {
    if (ts_.is_punct('-')) {
      ts_.next();
      Expr inner = parse_unary();
      // A negated literal is a negative constant.
      if (inner.is_constant()) return Expr::constant(-inner.value());
      return Expr::negate(std::move(inner));
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (ts_.is_punct('^')) {
      ts_.next();
      Expr exponent = parse_unary();
      return Expr::power(std::move(base), std::move(exponent));
    }
    return base;
  }

  Expr parse_primary() {
    const Token& t = ts_.peek();
    if (t.type == Token::Type::Number) {
      ts_.next();
      return Expr::constant(t.number);
    }
    if (t.type == Token::Type::Ident) {
      std::string name = t.text;
      if (ts_.is_punct('(', 1)) {
        if (name == "d") {
          ts_.next();
          ts_.next();
          const Token& id = ts_.expect_ident();
          std::string coord = id.text;
          ts_.expect_punct(')');
          return Expr::symbol(velocity_name(coord));
        }
        auto f = find_function(name);
        if (!f) throw ParseError("unknown function '" + name + "'", t.line, t.column,
                                 {"sin", "cos", "exp", "log", "sqrt", "d"});
        ts_.next();
        ts_.next();
        Expr arg = parse_expr();
        ts_.expect_punct(')');
        return Expr::call(*f, std::move(arg));
      }
      ts_.next();
      return Expr::symbol(name);
    }
    if (ts_.is_punct('(')) {
      ts_.next();
      Expr inner = parse_expr();
      ts_.expect_punct(')');
      return inner;
    }
    ts_.fail("expected an operand", operand_starts());
  }

  TokenStream& ts_;
};

/// Parses a complete expression; trailing tokens are an error.
inline Expr parse_expression(std::string_view text) {
  TokenStream ts(tokenize(text));
  ExpressionParser p(ts);
  Expr e = p.parse_expr();
  if (!ts.at_end()) ts.fail("unexpected trailing input", {"operator", "end of input"});
  return e;
}

}  // namespace clairaut
