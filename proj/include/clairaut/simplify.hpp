#pragma once

// Normal form: constants folded where the fold is well defined, 0 and 1
// identities removed, nested sums and products flattened, like terms and
// like powers collected, operands in a canonical order. Negation is carried
// as a -1 coefficient. There are no trig identities and no factoring.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "clairaut/expr.hpp"

namespace clairaut {

Expr simplify(const Expr& e);

namespace detail {

inline bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

// Ordering key for factors: (base, exponent), so x^2*y sorts like x*y.
inline std::pair<Expr, Expr> base_exponent(const Expr& f) {
  if (f.kind() == Expr::Kind::Power) return {f.child(0), f.child(1)};
  return {f, Expr::constant(1.0)};
}

inline bool factor_less(const Expr& a, const Expr& b) {
  auto [ba, ea] = base_exponent(a);
  auto [bb, eb] = base_exponent(b);
  if (int c = compare(ba, bb); c != 0) return c < 0;
  return compare(ea, eb) < 0;
}

// Splits a normal term into (coefficient, rest); rest is the term with its
// leading constant removed.
inline std::pair<double, Expr> split_coefficient(const Expr& t) {
  if (t.kind() == Expr::Kind::Product && t.child(0).is_constant()) {
    std::vector<Expr> rest(t.children().begin() + 1, t.children().end());
    if (rest.size() == 1) return {t.child(0).value(), rest.front()};
    return {t.child(0).value(), Expr::product(std::move(rest))};
  }
  return {1.0, t};
}

Expr add_normal(std::vector<Expr> terms);
Expr mul_normal(std::vector<Expr> factors);

inline Expr power_normal(const Expr& base, const Expr& exponent) {
  if (exponent.is_constant(0.0)) return Expr::constant(1.0);
  if (exponent.is_constant(1.0)) return base;
  if (base.is_constant(1.0)) return Expr::constant(1.0);
  if (base.is_constant() && exponent.is_constant()) {
    double b = base.value();
    double x = exponent.value();
    bool defined = (b > 0) || (b < 0 && is_integer(x)) || (b == 0 && x > 0);
    if (defined) {
      double v = std::pow(b, x);
      if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::power(base, exponent);
  }
  // (b^e)^k = b^(e*k) for integer k.
  if (base.kind() == Expr::Kind::Power && exponent.is_constant() &&
      is_integer(exponent.value())) {
    return power_normal(base.child(0), mul_normal({base.child(1), exponent}));
  }
  return Expr::power(base, exponent);
}

inline Expr mul_normal(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  double coef = 1.0;
  for (auto& f : factors) {
    if (f.kind() == Expr::Kind::Product) {
      for (const auto& g : f.children()) flat.push_back(g);
    } else {
      flat.push_back(std::move(f));
    }
  }
  std::vector<Expr> others;
  for (auto& f : flat) {
    if (f.is_constant()) {
      coef *= f.value();
    } else {
      others.push_back(std::move(f));
    }
  }
  if (coef == 0.0) return Expr::constant(0.0);

  // Group by base, summing exponents.
  std::vector<std::pair<Expr, std::vector<Expr>>> groups;
  std::vector<Expr> originals;
  for (const auto& f : others) {
    auto [b, x] = base_exponent(f);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == b; });
    if (it == groups.end()) {
      groups.push_back({b, {x}});
      originals.push_back(f);
    } else {
      it->second.push_back(x);
    }
  }
  std::vector<Expr> result;
  bool regroup = false;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Expr f = groups[g].second.size() == 1
                 ? originals[g]
                 : power_normal(groups[g].first, add_normal(groups[g].second));
    if (f.is_constant()) {
      coef *= f.value();
    } else if (f.kind() == Expr::Kind::Product) {
      regroup = true;
      for (const auto& h : f.children()) {
        if (h.is_constant())
          coef *= h.value();
        else
          result.push_back(h);
      }
    } else {
      result.push_back(std::move(f));
    }
  }
  if (coef == 0.0) return Expr::constant(0.0);
  if (regroup) {
    // A collapsed power exposed a product; its factors may join other groups.
    result.push_back(Expr::constant(coef));
    return mul_normal(std::move(result));
  }
  std::sort(result.begin(), result.end(), factor_less);
  if (result.empty()) return Expr::constant(coef);
  if (coef == 1.0 && result.size() == 1) return result.front();
  if (coef != 1.0) result.insert(result.begin(), Expr::constant(coef));
  return Expr::product(std::move(result));
}

inline Expr add_normal(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  for (auto& t : terms) {
    if (t.kind() == Expr::Kind::Sum) {
      for (const auto& u : t.children()) flat.push_back(u);
    } else {
      flat.push_back(std::move(t));
    }
  }
  double constant = 0.0;
  std::vector<std::pair<Expr, double>> groups;  // rest -> coefficient
  std::vector<Expr> originals;
  std::vector<int> counts;
  for (const auto& t : flat) {
    if (t.is_constant()) {
      constant += t.value();
      continue;
    }
    auto [c, rest] = split_coefficient(t);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == rest; });
    if (it == groups.end()) {
      groups.push_back({rest, c});
      originals.push_back(t);
      counts.push_back(1);
    } else {
      it->second += c;
      ++counts[static_cast<std::size_t>(it - groups.begin())];
    }
  }
  std::vector<std::pair<Expr, Expr>> keyed;  // (rest, term)
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& [rest, c] = groups[g];
    if (c == 0.0) continue;
    Expr term = counts[g] == 1 ? originals[g] : mul_normal({Expr::constant(c), rest});
    keyed.push_back({rest, term});
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (int c = compare(a.first, b.first); c != 0) return c < 0;
    return compare(a.second, b.second) < 0;
  });
  std::vector<Expr> result;
  for (auto& k : keyed) result.push_back(std::move(k.second));
  if (constant != 0.0) result.push_back(Expr::constant(constant));
  if (result.empty()) return Expr::constant(0.0);
  if (result.size() == 1) return result.front();
  return Expr::sum(std::move(result));
}

inline Expr quotient_normal(const Expr& num, const Expr& den) {
  if (den.is_constant()) {
    double d = den.value();
    if (d == 0.0) return Expr::quotient(num, den);
    if (num.is_constant()) return Expr::constant(num.value() / d);
    if (d == 1.0) return num;
    return mul_normal({Expr::constant(1.0 / d), num});
  }
  if (num.is_constant(0.0)) return Expr::constant(0.0);
  return Expr::quotient(num, den);
}

inline Expr call_normal(Func f, const Expr& arg) {
  if (arg.is_constant() && in_domain(f, arg.value())) {
    double v = function_info(f).apply(arg.value());
    if (std::isfinite(v)) return Expr::constant(v);
  }
  return Expr::call(f, arg);
}

}  // namespace detail

/// Rewrites e into normal form. Numeric value is unchanged up to rounding;
/// folds that would divide by zero or leave a function's domain are kept
/// symbolic so the error surfaces at evaluation.
inline Expr simplify(const Expr& e) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Constant:
    case K::Symbol:
      return e;
    case K::Negate:
      return detail::mul_normal({Expr::constant(-1.0), simplify(e.child(0))});
    case K::Sum: {
      std::vector<Expr> terms;
      for (const auto& c : e.children()) terms.push_back(simplify(c));
      return detail::add_normal(std::move(terms));
    }
    case K::Product: {
      std::vector<Expr> factors;
      for (const auto& c : e.children()) factors.push_back(simplify(c));
      return detail::mul_normal(std::move(factors));
    }
    case K::Power:
      return detail::power_normal(simplify(e.child(0)), simplify(e.child(1)));
    case K::Quotient:
      return detail::quotient_normal(simplify(e.child(0)), simplify(e.child(1)));
    case K::Call:
      return detail::call_normal(e.func(), simplify(e.child(0)));
  }
  return e;
}

}  // namespace clairaut
