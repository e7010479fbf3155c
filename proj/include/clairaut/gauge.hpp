#pragma once

// Degenerate-sector structure: physical bracket, long derivative, field
// strength, classification and the corrected brackets. Quantities built
// from L up to second order are analytic; identities needing one more
// derivative (Maxwell, Bianchi, commutators) use central differences on
// top of them.

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "clairaut/legendre.hpp"

namespace clairaut {

/// Value with gradient over q (n, declaration order) and regular p (r).
struct Jet {
  double value = 0.0;
  Vector dq;
  Vector dp;
};

/// Scalar function on phase space, used where derivatives are numeric.
using Field = std::function<double(const PhasePoint&)>;

class Observable {
 public:
  Observable(const ClairautTransform& ct, Expr e) : expr_(std::move(e)) {
    std::set<std::string> allowed(ct.model().coords.begin(), ct.model().coords.end());
    for (const auto& name : ct.split().regular) allowed.insert(momentum_name(name));
    for (const auto& [k, v] : ct.model().params) allowed.insert(k);
    for (const auto& s : free_symbols(expr_))
      if (!allowed.count(s))
        throw ModelError("observable uses '" + s + "', expected coordinates, regular momenta or parameters");
    const auto& tab = ct.symbols().table();
    value_ = CompiledExpr(expr_, tab);
    for (const auto& c : ct.model().coords) dq_.emplace_back(differentiate(expr_, c), tab);
    for (const auto& c : ct.split().regular) dp_.emplace_back(differentiate(expr_, momentum_name(c)), tab);
  }

  static Observable parse(const ClairautTransform& ct, std::string_view text) {
    return Observable(ct, parse_expression(text));
  }

  const Expr& expr() const { return expr_; }
  double value(const std::vector<double>& slots) const { return value_(slots); }
  double value(const ClairautTransform& ct, const PhasePoint& pt) const { return value_(ct.slots_for(pt)); }

  Jet jet(const std::vector<double>& slots) const {
    Jet j;
    j.value = value_(slots);
    j.dq.resize(static_cast<Eigen::Index>(dq_.size()));
    j.dp.resize(static_cast<Eigen::Index>(dp_.size()));
    for (std::size_t a = 0; a < dq_.size(); ++a) j.dq(a) = dq_[a](slots);
    for (std::size_t i = 0; i < dp_.size(); ++i) j.dp(i) = dp_[i](slots);
    return j;
  }

 private:
  Expr expr_;
  CompiledExpr value_;
  std::vector<CompiledExpr> dq_, dp_;
};

inline Jet h_jet(const PointData& pd) { return {pd.H, pd.dH_dq, pd.dH_dp}; }

inline Jet b_jet(const PointData& pd, std::size_t alpha) {
  return {pd.B(alpha), pd.dB_dq.row(alpha).transpose(), pd.dB_dp.row(alpha).transpose()};
}

/// Physical bracket of two jets: sum over regular i of X_q^i Y_p_i - Y_q^i X_p_i.
inline double poisson(const ClairautTransform& ct, const Jet& x, const Jet& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < ct.r(); ++i) s += x.dq(ct.reg(i)) * y.dp(i) - y.dq(ct.reg(i)) * x.dp(i);
  return s;
}

inline double poisson_phys(const ClairautTransform& ct, const Observable& x, const Observable& y,
                           const PhasePoint& pt) {
  auto s = ct.slots_for(pt);
  return poisson(ct, x.jet(s), y.jet(s));
}

/// D_a X = dX/dq^a + {B_a, X}_phys.
inline double long_derivative(const ClairautTransform& ct, const PointData& pd, const Jet& x, std::size_t alpha) {
  return x.dq(ct.deg(alpha)) + poisson(ct, b_jet(pd, alpha), x);
}

inline double long_derivative(const ClairautTransform& ct, const Observable& x, std::size_t alpha,
                              const PhasePoint& pt) {
  auto pd = ct.resolve(pt);
  return long_derivative(ct, pd, x.jet(pd.slots), alpha);
}

/// D_a H_phys for every degenerate a.
inline Vector long_derivative_H(const ClairautTransform& ct, const PointData& pd) {
  Vector out(ct.d());
  Jet h = h_jet(pd);
  for (std::size_t a = 0; a < ct.d(); ++a) out(a) = long_derivative(ct, pd, h, a);
  return out;
}

inline double delta_B(const ClairautTransform& ct, std::size_t alpha, const Observable& x, const PhasePoint& pt) {
  auto pd = ct.resolve(pt);
  return poisson(ct, b_jet(pd, alpha), x.jet(pd.slots));
}

inline Matrix field_strength(const ClairautTransform& ct, const PointData& pd) {
  std::size_t D = ct.d();
  Matrix f = Matrix::Zero(D, D);
  for (std::size_t a = 0; a < D; ++a)
    for (std::size_t b = a + 1; b < D; ++b) {
      double v = pd.dB_dq(b, ct.deg(a)) - pd.dB_dq(a, ct.deg(b)) + poisson(ct, b_jet(pd, a), b_jet(pd, b));
      f(a, b) = v;
      f(b, a) = -v;
    }
  return f;
}

inline Matrix field_strength(const ClairautTransform& ct, const PhasePoint& pt) {
  return field_strength(ct, ct.resolve(pt));
}

enum class GaugeKind { Gaugeless, Gauge, Limit };

inline std::string to_string(GaugeKind k) {
  switch (k) {
    case GaugeKind::Gaugeless:
      return "gaugeless";
    case GaugeKind::Gauge:
      return "gauge";
    case GaugeKind::Limit:
      return "limit";
  }
  return "";
}

struct GaugeClassification {
  GaugeKind kind = GaugeKind::Gaugeless;
  int rank_F = 0;
  std::vector<int> subblock;  // degenerate indices of the nonsingular minor
};

/// Rank of F with threshold tol * max(max|F|, 1), required constant across probes.
inline GaugeClassification classify(const ClairautTransform& ct, const std::vector<PhasePoint>& probes,
                                    double tol = kDefaultRankTol) {
  if (probes.empty()) throw RankError("classify needs at least one probe");
  GaugeClassification cls;
  std::size_t D = ct.d();
  if (D == 0) return cls;
  std::vector<RankInfo> ranks;
  for (const auto& pt : probes) ranks.push_back(numeric_rank(field_strength(ct, pt), tol, 1.0));
  for (std::size_t k = 1; k < ranks.size(); ++k)
    if (ranks[k].rank != ranks[0].rank)
      throw RankError("rank of F is " + std::to_string(ranks[0].rank) + " at probe 0 but " +
                      std::to_string(ranks[k].rank) + " at probe " + std::to_string(k));
  cls.rank_F = ranks[0].rank;
  if (cls.rank_F % 2 != 0) throw RankError("odd numeric rank of the antisymmetric matrix F");
  if (cls.rank_F == static_cast<int>(D)) {
    cls.kind = GaugeKind::Gaugeless;
    for (int a = 0; a < static_cast<int>(D); ++a) cls.subblock.push_back(a);
  } else if (cls.rank_F == 0) {
    cls.kind = GaugeKind::Limit;
  } else {
    cls.kind = GaugeKind::Gauge;
    cls.subblock = ranks[0].columns;
  }
  return cls;
}

namespace detail {

// {X,Y} - sum over the block of {X,B_a} Fbar^{ab} D_b Y.
inline double corrected_bracket(const ClairautTransform& ct, const PointData& pd, const Jet& x, const Jet& y,
                                const std::vector<int>& block) {
  double out = poisson(ct, x, y);
  if (block.empty()) return out;
  Matrix f = field_strength(ct, pd);
  Matrix sub = principal_minor(f, block);
  Eigen::FullPivLU<Matrix> lu(sub);
  if (!lu.isInvertible()) throw RankError("field strength block is singular at this point");
  Matrix fbar = lu.inverse();
  std::size_t k = block.size();
  Vector xb(k), dy(k);
  for (std::size_t a = 0; a < k; ++a) {
    auto alpha = static_cast<std::size_t>(block[a]);
    xb(a) = poisson(ct, x, b_jet(pd, alpha));
    dy(a) = long_derivative(ct, pd, y, alpha);
  }
  return out - xb.dot(fbar * dy);
}

}  // namespace detail

inline double bracket_new(const ClairautTransform& ct, const PointData& pd, const Jet& x, const Jet& y) {
  std::vector<int> all;
  for (int a = 0; a < static_cast<int>(ct.d()); ++a) all.push_back(a);
  return detail::corrected_bracket(ct, pd, x, y, all);
}

inline double bracket_new(const ClairautTransform& ct, const Observable& x, const Observable& y,
                          const PhasePoint& pt) {
  auto pd = ct.resolve(pt);
  return bracket_new(ct, pd, x.jet(pd.slots), y.jet(pd.slots));
}

inline double bracket_gauge(const ClairautTransform& ct, const PointData& pd, const Jet& x, const Jet& y,
                            const GaugeClassification& cls) {
  if (cls.kind == GaugeKind::Gaugeless) throw Error("bracket_gauge needs a gauge or limit classification");
  return detail::corrected_bracket(ct, pd, x, y, cls.subblock);
}

inline double bracket_gauge(const ClairautTransform& ct, const Observable& x, const Observable& y,
                            const PhasePoint& pt, const GaugeClassification& cls) {
  auto pd = ct.resolve(pt);
  return bracket_gauge(ct, pd, x.jet(pd.slots), y.jet(pd.slots), cls);
}

/// Central-difference gradient of a field over q and regular p, step h*(1+|x|).
inline Jet numeric_jet(const ClairautTransform& ct, const Field& f, const PhasePoint& pt, double h) {
  Jet j;
  j.value = f(pt);
  j.dq.resize(ct.n());
  j.dp.resize(ct.r());
  for (std::size_t a = 0; a < ct.n(); ++a) {
    double s = h * (1.0 + std::abs(pt.q[a]));
    PhasePoint up = pt, dn = pt;
    up.q[a] += s;
    dn.q[a] -= s;
    j.dq(a) = (f(up) - f(dn)) / (2 * s);
  }
  for (std::size_t i = 0; i < ct.r(); ++i) {
    double s = h * (1.0 + std::abs(pt.p[i]));
    PhasePoint up = pt, dn = pt;
    up.p[i] += s;
    dn.p[i] -= s;
    j.dp(i) = (f(up) - f(dn)) / (2 * s);
  }
  return j;
}

/// D_a applied to a numerically known field.
inline double long_derivative_numeric(const ClairautTransform& ct, const Field& f, std::size_t alpha,
                                      const PhasePoint& pt, double h) {
  auto pd = ct.resolve(pt);
  return long_derivative(ct, pd, numeric_jet(ct, f, pt, h), alpha);
}

inline Field field_entry(const ClairautTransform& ct, std::size_t a, std::size_t b) {
  return [&ct, a, b](const PhasePoint& q) { return field_strength(ct, q)(a, b); };
}

/// J_b = sum_a D_a F_ab.
inline Vector maxwell_current(const ClairautTransform& ct, const PhasePoint& pt, double h = 1e-5) {
  std::size_t D = ct.d();
  Vector j = Vector::Zero(D);
  if (D < 2) return j;
  auto pd = ct.resolve(pt);
  for (std::size_t b = 0; b < D; ++b)
    for (std::size_t a = 0; a < D; ++a)
      if (a != b) j(b) += long_derivative(ct, pd, numeric_jet(ct, field_entry(ct, a, b), pt, h), a);
  return j;
}

/// max over a<b<c of |D_a F_bc + D_c F_ab + D_b F_ca|; zero when fewer than three degenerate directions.
inline double bianchi_residual(const ClairautTransform& ct, const PhasePoint& pt, double h = 1e-5) {
  std::size_t D = ct.d();
  if (D < 3) return 0.0;
  auto pd = ct.resolve(pt);
  auto d = [&](std::size_t a, std::size_t b, std::size_t c) {
    return long_derivative(ct, pd, numeric_jet(ct, field_entry(ct, b, c), pt, h), a);
  };
  double worst = 0.0;
  for (std::size_t a = 0; a < D; ++a)
    for (std::size_t b = a + 1; b < D; ++b)
      for (std::size_t c = b + 1; c < D; ++c)
        worst = std::max(worst, std::abs(d(a, b, c) + d(c, a, b) + d(b, c, a)));
  return worst;
}

}  // namespace clairaut
