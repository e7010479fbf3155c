#pragma once

// Damped Newton iteration for square systems G(x) = 0.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include "clairaut/errors.hpp"
#include "clairaut/linalg.hpp"

namespace clairaut {

struct NewtonConfig {
  int max_iter = 100;
  double tol = 1e-12;       // scaled by (1 + scale) supplied per solve
  int restarts = 8;         // random restarts in [-1,1]^r after a failed start
  std::uint64_t seed = 42;
  int max_halvings = 30;
};

/// System callback: fills residual and Jacobian at x. May throw EvalError,
/// which the solver treats as "outside the domain" and damps away from.
using NewtonSystem = std::function<void(const Vector& x, Vector& residual, Matrix& jacobian)>;

struct NewtonResult {
  Vector x;
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

inline NewtonResult newton_once(const NewtonSystem& sys, Vector x, double tol, const NewtonConfig& cfg) {
  Vector g;
  Matrix j;
  sys(x, g, j);
  double res = g.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < cfg.max_iter; ++it) {
    if (res <= tol) return {x, res, it};
    Eigen::FullPivLU<Matrix> lu(j);
    if (!lu.isInvertible())
      throw NewtonError(NewtonError::Kind::SingularJacobian, "singular Jacobian in Newton iteration", res);
    Vector dx = lu.solve(-g);
    double lambda = 1.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h, lambda *= 0.5) {
      Vector xn = x + lambda * dx;
      Vector gn;
      Matrix jn;
      try {
        sys(xn, gn, jn);
      } catch (const EvalError&) {
        continue;
      }
      double rn = gn.lpNorm<Eigen::Infinity>();
      if (!std::isfinite(rn)) continue;
      if (rn < res || h == cfg.max_halvings || rn <= tol) {
        x = std::move(xn);
        g = std::move(gn);
        j = std::move(jn);
        res = rn;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw NewtonError(NewtonError::Kind::NonConvergence, "Newton step left the domain", res);
  }
  if (res <= tol) return {x, res, cfg.max_iter};
  throw NewtonError(NewtonError::Kind::NonConvergence,
                    "Newton did not converge in " + std::to_string(cfg.max_iter) +
                        " iterations (residual " + std::to_string(res) + ")",
                    res);
}

}  // namespace detail

/// Newton from x0, then from seeded random starts. Throws the last failure.
inline NewtonResult newton_solve(const NewtonSystem& sys, const Vector& x0, double tol,
                                 const NewtonConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector start = x0;
  double last = std::numeric_limits<double>::infinity();
  NewtonError::Kind kind = NewtonError::Kind::NonConvergence;
  std::string message;
  for (int attempt = 0; attempt <= cfg.restarts; ++attempt) {
    try {
      return detail::newton_once(sys, start, tol, cfg);
    } catch (const NewtonError& e) {
      last = e.residual();
      kind = e.kind();
      message = e.what();
    } catch (const EvalError& e) {
      message = e.what();
    }
    start = Vector(x0.size());
    for (Eigen::Index k = 0; k < start.size(); ++k) start(k) = u(rng);
  }
  throw NewtonError(kind, message + " after " + std::to_string(cfg.restarts) + " restarts", last);
}

}  // namespace clairaut
