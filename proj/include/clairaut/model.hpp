#pragma once

// Model files, the velocity Hessian and the regular/degenerate split.

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clairaut/differentiate.hpp"
#include "clairaut/errors.hpp"
#include "clairaut/evaluate.hpp"
#include "clairaut/linalg.hpp"
#include "clairaut/parser.hpp"

namespace clairaut {

inline constexpr const char* kTimeSymbol = "t";

inline std::string momentum_name(std::string_view coord) { return "p_" + std::string(coord); }

struct LagrangianModel {
  std::vector<std::string> coords;
  std::map<std::string, double> params;
  Expr lagrangian;
  std::vector<std::string> pinned_degenerate;  // empty unless the file pins the split
  bool pinned = false;

  std::size_t n() const { return coords.size(); }
  std::vector<std::string> velocities() const {
    std::vector<std::string> out;
    for (const auto& c : coords) out.push_back(velocity_name(c));
    return out;
  }
  std::size_t index_of(const std::string& coord) const {
    for (std::size_t i = 0; i < coords.size(); ++i)
      if (coords[i] == coord) return i;
    throw ModelError("unknown coordinate '" + coord + "'");
  }
};

namespace detail {

inline void validate_model(LagrangianModel& m) {
  if (m.coords.empty()) throw ModelError("model declares no coordinates");
  std::set<std::string> coords(m.coords.begin(), m.coords.end());
  for (const auto& s : free_symbols(m.lagrangian)) {
    if (s.rfind("d(", 0) == 0) {
      std::string c = s.substr(2, s.size() - 3);
      if (!coords.count(c)) throw ModelError("velocity d(" + c + ") of undeclared coordinate '" + c + "'");
      continue;
    }
    if (s == kTimeSymbol) throw ModelError("time symbol 't' is not allowed in a time-independent model");
    if (!coords.count(s) && !m.params.count(s)) throw ModelError("undeclared symbol '" + s + "'");
  }
  for (const auto& d : m.pinned_degenerate)
    if (!coords.count(d)) throw ModelError("degenerate block names undeclared coordinate '" + d + "'");
}

}  // namespace detail

/// Parses the model DSL; see README for the grammar.
inline LagrangianModel parse_model(std::string_view text) {
  TokenStream ts(tokenize(text));
  LagrangianModel m;
  std::set<std::string> declared;
  bool have_lagrangian = false;
  auto declare = [&](const Token& t) {
    if (t.text == kTimeSymbol) throw ModelError("'t' is reserved for time");
    if (t.text == "d" || find_function(t.text) || t.text.rfind("p_", 0) == 0)
      throw ModelError("reserved name '" + t.text + "' at line " + std::to_string(t.line));
    if (!declared.insert(t.text).second)
      throw ModelError("duplicate declaration of '" + t.text + "' at line " + std::to_string(t.line));
  };
  const std::set<std::string> statements{"coord", "param", "degenerate", "lagrangian"};
  while (!ts.at_end()) {
    if (ts.is_ident("coord")) {
      ts.next();
      do {
        const Token& id = ts.expect_ident();
        declare(id);
        m.coords.push_back(id.text);
      } while (ts.is_punct(',') && (ts.next(), true));
      ts.expect_punct(';');
    } else if (ts.is_ident("param")) {
      ts.next();
      const Token& id = ts.expect_ident();
      declare(id);
      std::string name = id.text;
      ts.expect_punct('=');
      double sign = 1.0;
      if (ts.is_punct('-')) {
        ts.next();
        sign = -1.0;
      }
      if (ts.peek().type != Token::Type::Number) ts.fail("unexpected token", {"number"});
      m.params[name] = sign * ts.next().number;
      ts.expect_punct(';');
    } else if (ts.is_ident("degenerate")) {
      ts.next();
      ts.expect_punct('{');
      m.pinned = true;
      if (!ts.is_punct('}')) {
        do {
          m.pinned_degenerate.push_back(ts.expect_ident().text);
        } while (ts.is_punct(',') && (ts.next(), true));
      }
      ts.expect_punct('}');
      ts.expect_punct(';');
    } else if (ts.is_ident("lagrangian")) {
      const Token& kw = ts.next();
      if (have_lagrangian)
        throw ModelError("second lagrangian statement at line " + std::to_string(kw.line));
      ts.expect_punct('=');
      ExpressionParser p(ts);
      m.lagrangian = p.parse_expr();
      have_lagrangian = true;
      ts.expect_punct(';');
    } else {
      ts.fail("unknown statement", statements);
    }
  }
  if (!have_lagrangian) throw ModelError("missing lagrangian statement");
  detail::validate_model(m);
  return m;
}

inline LagrangianModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

using ExprMatrix = std::vector<std::vector<Expr>>;

/// W_AB = d2L/dv^A dv^B; upper triangle computed and mirrored.
inline ExprMatrix hessian_matrix(const LagrangianModel& m) {
  auto vs = m.velocities();
  std::size_t n = vs.size();
  ExprMatrix w(n, std::vector<Expr>(n));
  for (std::size_t a = 0; a < n; ++a) {
    Expr la = differentiate(m.lagrangian, vs[a]);
    for (std::size_t b = a; b < n; ++b) {
      w[a][b] = differentiate(la, vs[b]);
      w[b][a] = w[a][b];
    }
  }
  return w;
}

inline Matrix evaluate_matrix(const ExprMatrix& w, const Bindings& b) {
  std::size_t n = w.size();
  Matrix out(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = 0; c < n; ++c) out(a, c) = evaluate(w[a][c], b);
  return out;
}

/// Adds the model parameters to a binding set unless already present.
inline Bindings with_params(const LagrangianModel& m, Bindings b) {
  for (const auto& [k, v] : m.params) b.emplace(k, v);
  return b;
}

struct VariableSplit {
  int r = 0;
  std::vector<int> permutation;  // permutation[A] = position of coords[A] after rearrangement
  std::vector<std::string> regular;
  std::vector<std::string> degenerate;
  std::vector<int> regular_index;     // into model.coords
  std::vector<int> degenerate_index;  // into model.coords

  /// Reorders values given in declaration order into regular-first order.
  std::vector<double> apply(const std::vector<double>& v) const {
    std::vector<double> out(v.size());
    for (std::size_t a = 0; a < v.size(); ++a) out[static_cast<std::size_t>(permutation[a])] = v[a];
    return out;
  }
  std::vector<double> unapply(const std::vector<double>& v) const {
    std::vector<double> out(v.size());
    for (std::size_t a = 0; a < v.size(); ++a) out[a] = v[static_cast<std::size_t>(permutation[a])];
    return out;
  }
};

inline constexpr double kDefaultRankTol = 1e-9;

namespace detail {

inline VariableSplit split_from_columns(const LagrangianModel& m, const std::vector<int>& regular_cols) {
  VariableSplit s;
  s.r = static_cast<int>(regular_cols.size());
  std::set<int> reg(regular_cols.begin(), regular_cols.end());
  s.permutation.assign(m.n(), 0);
  int next = 0;
  for (int a = 0; a < static_cast<int>(m.n()); ++a)
    if (reg.count(a)) {
      s.regular.push_back(m.coords[a]);
      s.regular_index.push_back(a);
      s.permutation[a] = next++;
    }
  for (int a = 0; a < static_cast<int>(m.n()); ++a)
    if (!reg.count(a)) {
      s.degenerate.push_back(m.coords[a]);
      s.degenerate_index.push_back(a);
      s.permutation[a] = next++;
    }
  return s;
}

}  // namespace detail

/// Rank of W at each probe must agree; regular coordinates are the pivot
/// columns at the first probe (or the complement of a pinned degenerate block).
inline VariableSplit split_variables(const LagrangianModel& m, const std::vector<Bindings>& probes,
                                     double tol = kDefaultRankTol) {
  if (probes.empty()) throw RankError("split_variables needs at least one probe");
  auto w = hessian_matrix(m);
  std::vector<Matrix> values;
  std::vector<RankInfo> ranks;
  for (const auto& p : probes) {
    values.push_back(evaluate_matrix(w, with_params(m, p)));
    ranks.push_back(numeric_rank(values.back(), tol));
  }
  for (std::size_t k = 1; k < ranks.size(); ++k)
    if (ranks[k].rank != ranks[0].rank)
      throw RankError("Hessian rank " + std::to_string(ranks[0].rank) + " at probe 0 but " +
                      std::to_string(ranks[k].rank) + " at probe " + std::to_string(k));
  std::vector<int> cols = ranks[0].columns;
  if (m.pinned) {
    std::set<std::string> deg(m.pinned_degenerate.begin(), m.pinned_degenerate.end());
    cols.clear();
    for (int a = 0; a < static_cast<int>(m.n()); ++a)
      if (!deg.count(m.coords[a])) cols.push_back(a);
    if (static_cast<int>(cols.size()) != ranks[0].rank)
      throw RankError("pinned split has " + std::to_string(cols.size()) +
                      " regular coordinates but the Hessian rank is " + std::to_string(ranks[0].rank));
  }
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!nonsingular(principal_minor(values[k], cols), tol))
      throw RankError("regular block of the Hessian is singular at probe " + std::to_string(k));
  return detail::split_from_columns(m, cols);
}

struct RankReport {
  bool pass = true;
  std::vector<int> ranks;
  std::vector<bool> minor_ok;
};

inline RankReport check_rank_constancy(const LagrangianModel& m, const VariableSplit& split,
                                       const std::vector<Bindings>& probes,
                                       double tol = kDefaultRankTol) {
  RankReport rep;
  auto w = hessian_matrix(m);
  for (const auto& p : probes) {
    Matrix v = evaluate_matrix(w, with_params(m, p));
    int r = numeric_rank(v, tol).rank;
    bool ok = nonsingular(principal_minor(v, split.regular_index), tol);
    rep.ranks.push_back(r);
    rep.minor_ok.push_back(ok);
    if (r != split.r || !ok) rep.pass = false;
  }
  return rep;
}

namespace detail {

// Subexpressions whose values must stay away from zero at a probe:
// denominators, log arguments and bases raised to negative powers (margin
// 0.1), and sqrt arguments (margin 0.01).
inline void collect_guards(const Expr& e, std::vector<std::pair<Expr, double>>& out) {
  using K = Expr::Kind;
  if (e.kind() == K::Quotient) out.push_back({e.child(1), 0.1});
  if (e.kind() == K::Call && e.func() == Func::Log) out.push_back({e.child(0), 0.1});
  if (e.kind() == K::Call && e.func() == Func::Sqrt) out.push_back({e.child(0), 0.01});
  if (e.kind() == K::Power) {
    const Expr& x = e.child(1);
    if (!x.is_constant() || x.value() < 0 || !is_integer(x.value())) out.push_back({e.child(0), 0.1});
  }
  for (const auto& c : e.children()) collect_guards(c, out);
}

}  // namespace detail

/// Uniform probes in [-1,1] for every coordinate and velocity, rejecting
/// points near the singular set of L or W. The distance to the zero set of a
/// guarded expression g is estimated as |g| / |grad g|. Deterministic for a
/// given seed.
inline std::vector<Bindings> generate_probes(const LagrangianModel& m, std::size_t count = 17,
                                             std::uint64_t seed = 42) {
  auto w = hessian_matrix(m);
  std::vector<std::pair<Expr, double>> guards;
  detail::collect_guards(m.lagrangian, guards);
  for (const auto& row : w)
    for (const auto& e : row) detail::collect_guards(e, guards);
  std::vector<std::string> vars = m.coords;
  for (const auto& c : m.coords) vars.push_back(velocity_name(c));
  std::vector<std::vector<Expr>> grads;
  for (const auto& [g, margin] : guards) {
    grads.emplace_back();
    for (const auto& v : vars) grads.back().push_back(differentiate(g, v));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Bindings> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 100000) throw ModelError("could not find admissible probe points");
    Bindings b;
    for (const auto& c : m.coords) b[c] = u(rng);
    for (const auto& c : m.coords) b[velocity_name(c)] = u(rng);
    Bindings full = with_params(m, b);
    bool ok = true;
    try {
      for (std::size_t k = 0; k < guards.size() && ok; ++k) {
        const auto& [g, margin] = guards[k];
        double v = evaluate(g, full);
        double norm = 0.0;
        for (const auto& d : grads[k]) norm += std::pow(evaluate(d, full), 2);
        norm = std::sqrt(norm);
        double dist = norm > 0 ? std::abs(v) / norm : std::abs(v);
        // sqrt arguments must also be positive
        if ((margin < 0.1 && v <= 0) || dist < margin) ok = false;
      }
      if (ok) {
        evaluate(m.lagrangian, full);
        evaluate_matrix(w, full);
      }
    } catch (const EvalError&) {
      ok = false;
    }
    if (ok) out.push_back(std::move(b));
  }
  return out;
}

}  // namespace clairaut
