#pragma once

// The multidimensional Clairaut equation y = sum x_j dy/dx_j - f(dy/dx)
// and its general, envelope and s-mixed solution families.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "clairaut/differentiate.hpp"
#include "clairaut/errors.hpp"
#include "clairaut/evaluate.hpp"
#include "clairaut/linalg.hpp"
#include "clairaut/newton.hpp"
#include "clairaut/parser.hpp"

namespace clairaut {

class ClairautProblem {
 public:
  ClairautProblem(std::size_t n, Expr f) : n_(n), f_(std::move(f)) {
    if (n_ == 0) throw ModelError("Clairaut problem needs n >= 1");
    for (std::size_t k = 0; k < n_; ++k) table_.add(variable(k));
    for (const auto& s : free_symbols(f_))
      if (!table_.find(s)) throw ModelError("f may only use z1..z" + std::to_string(n_) + ", found '" + s + "'");
    value_ = CompiledExpr(f_, table_);
    std::vector<Expr> grad;
    for (std::size_t k = 0; k < n_; ++k) {
      grad.push_back(differentiate(f_, variable(k)));
      grad_.emplace_back(grad.back(), table_);
    }
    hess_.assign(n_, std::vector<CompiledExpr>(n_));
    for (std::size_t a = 0; a < n_; ++a)
      for (std::size_t b = 0; b < n_; ++b) hess_[a][b] = CompiledExpr(differentiate(grad[a], variable(b)), table_);
  }

  /// n is the largest zK index used, at least 1.
  static ClairautProblem parse(std::string_view text, std::size_t min_n = 1) {
    Expr f = parse_expression(text);
    std::size_t n = min_n;
    for (const auto& s : free_symbols(f)) {
      std::size_t k = 0;
      if (s.size() < 2 || s[0] != 'z' || s.find_first_not_of("0123456789", 1) != std::string::npos ||
          (k = std::stoul(s.substr(1))) == 0)
        throw ModelError("f may only use z1, z2, ...; found '" + s + "'");
      n = std::max(n, k);
    }
    return ClairautProblem(n, f);
  }

  static std::string variable(std::size_t k) { return "z" + std::to_string(k + 1); }

  std::size_t n() const { return n_; }
  const Expr& f() const { return f_; }
  double value(const std::vector<double>& z) const { return value_(z); }
  Vector gradient(const std::vector<double>& z) const {
    Vector g(n_);
    for (std::size_t k = 0; k < n_; ++k) g(k) = grad_[k](z);
    return g;
  }
  Matrix hessian(const std::vector<double>& z) const {
    Matrix h(n_, n_);
    for (std::size_t a = 0; a < n_; ++a)
      for (std::size_t b = 0; b < n_; ++b) h(a, b) = hess_[a][b](z);
    return h;
  }

 private:
  std::size_t n_;
  Expr f_;
  SymbolTable table_;
  CompiledExpr value_;
  std::vector<CompiledExpr> grad_;
  std::vector<std::vector<CompiledExpr>> hess_;
};

using Solution = std::function<double(const std::vector<double>&)>;

/// x -> sum x_j c_j - f(c).
inline Solution general_solution(const ClairautProblem& prob, const std::vector<double>& c) {
  if (c.size() != prob.n()) throw Error("general_solution: need " + std::to_string(prob.n()) + " constants");
  double fc = prob.value(c);
  return [c, fc](const std::vector<double>& x) {
    double s = -fc;
    for (std::size_t j = 0; j < c.size(); ++j) s += x[j] * c[j];
    return s;
  };
}

namespace detail {

// Largest rank of the leading s x s Hessian block over a few seeded points.
inline int leading_rank(const ClairautProblem& prob, std::size_t s, const std::vector<double>& tail) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int best = 0;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> z(prob.n());
    for (std::size_t j = 0; j < prob.n(); ++j) z[j] = j < s ? (k == 0 ? 0.0 : u(rng)) : tail[j - s];
    try {
      Matrix h = prob.hessian(z).topLeftCorner(s, s);
      best = std::max(best, numeric_rank(h, 1e-9).rank);
    } catch (const EvalError&) {
    }
  }
  return best;
}

}  // namespace detail

/// Resolves x_i = df/dz_i for the first s slots (others fixed to c_tail)
/// and returns sum_{i<s} x_i z_i + sum_{j>=s} x_j c_j - f(z, c).
inline double mixed_solution(const ClairautProblem& prob, std::size_t s, const std::vector<double>& c_tail,
                             const std::vector<double>& x, const NewtonConfig& cfg = {}) {
  std::size_t n = prob.n();
  if (s > n) throw RankError("s = " + std::to_string(s) + " exceeds the dimension " + std::to_string(n));
  if (c_tail.size() != n - s) throw Error("mixed_solution: need " + std::to_string(n - s) + " constants");
  if (x.size() != n) throw Error("mixed_solution: need " + std::to_string(n) + " coordinates");
  if (s > 0) {
    int r = detail::leading_rank(prob, s, c_tail);
    if (r < static_cast<int>(s))
      throw RankError("Hessian of f has rank " + std::to_string(r) + " on the leading " + std::to_string(s) +
                      " slots; no solution resolving " + std::to_string(s) + " conditions");
  }
  std::vector<double> z(n);
  for (std::size_t j = s; j < n; ++j) z[j] = c_tail[j - s];
  if (s > 0) {
    NewtonSystem sys = [&](const Vector& v, Vector& g, Matrix& jac) {
      for (std::size_t i = 0; i < s; ++i) z[i] = v(i);
      Vector grad = prob.gradient(z);
      Matrix h = prob.hessian(z);
      g.resize(s);
      for (std::size_t i = 0; i < s; ++i) g(i) = grad(i) - x[i];
      jac = h.topLeftCorner(s, s);
    };
    double scale = 0.0;
    for (std::size_t i = 0; i < s; ++i) scale = std::max(scale, std::abs(x[i]));
    auto res = newton_solve(sys, Vector::Zero(s), cfg.tol * (1 + scale), cfg);
    for (std::size_t i = 0; i < s; ++i) z[i] = res.x(i);
  }
  double out = -prob.value(z);
  for (std::size_t j = 0; j < n; ++j) out += x[j] * z[j];
  return out;
}

inline double envelope_solution(const ClairautProblem& prob, const std::vector<double>& x,
                                const NewtonConfig& cfg = {}) {
  return mixed_solution(prob, prob.n(), {}, x, cfg);
}

/// |y - sum x_j dy/dx_j + f(dy/dx)| with the gradient of y by central differences.
inline double clairaut_pde_residual(const ClairautProblem& prob, const Solution& y, const std::vector<double>& x,
                                    double h = 1e-6) {
  std::vector<double> grad(prob.n());
  double sum = 0.0;
  for (std::size_t j = 0; j < prob.n(); ++j) {
    double s = h * (1 + std::abs(x[j]));
    auto up = x, dn = x;
    up[j] += s;
    dn[j] -= s;
    grad[j] = (y(up) - y(dn)) / (2 * s);
    sum += x[j] * grad[j];
  }
  return std::abs(y(x) - sum + prob.value(grad));
}

}  // namespace clairaut
