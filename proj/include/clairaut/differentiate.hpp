#pragma once

#include <string>
#include <vector>

#include "clairaut/expr.hpp"
#include "clairaut/simplify.hpp"

namespace clairaut {

namespace detail {

inline Expr diff_raw(const Expr& e, const std::string& s) {
  using K = Expr::Kind;
  if (!depends_on(e, s)) return Expr::constant(0.0);
  switch (e.kind()) {
    case K::Constant:
      return Expr::constant(0.0);
    case K::Symbol:
      return Expr::constant(e.name() == s ? 1.0 : 0.0);
    case K::Sum: {
      std::vector<Expr> terms;
      for (const auto& c : e.children())
        if (depends_on(c, s)) terms.push_back(diff_raw(c, s));
      return Expr::sum(std::move(terms));
    }
    case K::Product: {
      const auto& fs = e.children();
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < fs.size(); ++i) {
        if (!depends_on(fs[i], s)) continue;
        std::vector<Expr> factors(fs.begin(), fs.end());
        factors[i] = diff_raw(fs[i], s);
        terms.push_back(Expr::product(std::move(factors)));
      }
      return Expr::sum(std::move(terms));
    }
    case K::Power: {
      const Expr& b = e.child(0);
      const Expr& x = e.child(1);
      bool db = depends_on(b, s);
      bool dx = depends_on(x, s);
      if (!dx) {
        // x * b^(x-1) * b'
        return Expr::product(
            {x, Expr::power(b, Expr::sum({x, Expr::constant(-1.0)})), diff_raw(b, s)});
      }
      Expr logb = Expr::call(Func::Log, b);
      if (!db) return Expr::product({e, logb, diff_raw(x, s)});
      return Expr::product(
          {e, Expr::sum({Expr::product({diff_raw(x, s), logb}),
                         Expr::quotient(Expr::product({x, diff_raw(b, s)}), b)})});
    }
    case K::Negate:
      return Expr::negate(diff_raw(e.child(0), s));
    case K::Quotient: {
      const Expr& n = e.child(0);
      const Expr& d = e.child(1);
      if (!depends_on(d, s)) return Expr::quotient(diff_raw(n, s), d);
      Expr top = Expr::sum({Expr::product({diff_raw(n, s), d}),
                            Expr::negate(Expr::product({n, diff_raw(d, s)}))});
      return Expr::quotient(top, Expr::power(d, Expr::constant(2.0)));
    }
    case K::Call: {
      const Expr& c = e.child(0);
      Expr dc = diff_raw(c, s);
      switch (e.func()) {
        case Func::Sin:
          return Expr::product({Expr::call(Func::Cos, c), dc});
        case Func::Cos:
          return Expr::negate(Expr::product({Expr::call(Func::Sin, c), dc}));
        case Func::Exp:
          return Expr::product({e, dc});
        case Func::Log:
          return Expr::quotient(dc, c);
        case Func::Sqrt:
          return Expr::quotient(dc, Expr::product({Expr::constant(2.0), e}));
      }
    }
  }
  return Expr::constant(0.0);
}

}  // namespace detail

/// Exact partial derivative in s, simplified. Other symbols are independent.
inline Expr differentiate(const Expr& e, const std::string& s) {
  return simplify(detail::diff_raw(e, s));
}

}  // namespace clairaut
