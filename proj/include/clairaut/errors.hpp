#pragma once

#include <set>
#include <stdexcept>
#include <string>

namespace clairaut {

/// Root of every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression or model text. Line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, int column,
             std::set<std::string> expected = {})
      : Error(format(message, line, column, expected)),
        line_(line),
        column_(column),
        expected_(std::move(expected)) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::set<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string format(const std::string& message, int line, int column,
                            const std::set<std::string>& expected) {
    std::string out = "syntax error at line " + std::to_string(line) +
                      ", column " + std::to_string(column) + ": " + message;
    if (!expected.empty()) {
      out += " (expected one of:";
      for (const auto& e : expected) out += " " + e;
      out += ")";
    }
    return out;
  }

  int line_;
  int column_;
  std::set<std::string> expected_;
};

/// Semantic problems with a model: undeclared names, duplicates, missing statements.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Evaluation failures: a free symbol without a value, or a point outside the
/// domain of log, sqrt, division or pow.
class EvalError : public Error {
 public:
  enum class Kind { UnboundSymbol, Domain };

  EvalError(Kind kind, const std::string& message, std::string symbol = {})
      : Error(message), kind_(kind), symbol_(std::move(symbol)) {}

  static EvalError unbound(const std::string& name) {
    return EvalError(Kind::UnboundSymbol, "unbound symbol '" + name + "'", name);
  }
  static EvalError domain(const std::string& what) {
    return EvalError(Kind::Domain, "domain error: " + what);
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& symbol() const noexcept { return symbol_; }

 private:
  Kind kind_;
  std::string symbol_;
};

/// Newton iteration failed to converge or met a singular Jacobian.
class NewtonError : public Error {
 public:
  enum class Kind { NonConvergence, SingularJacobian, NoMaximum };

  NewtonError(Kind kind, const std::string& message, double residual)
      : Error(message), kind_(kind), residual_(residual) {}

  Kind kind() const noexcept { return kind_; }
  double residual() const noexcept { return residual_; }

 private:
  Kind kind_;
  double residual_;
};

/// Rank assumptions violated: rank varies across probes, a chosen minor is
/// singular, or a solve needs more rank than the matrix has.
class RankError : public Error {
 public:
  using Error::Error;
};

/// The dependent rows of the degenerate-velocity system stopped holding
/// along a trajectory.
class IntegrabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace clairaut
