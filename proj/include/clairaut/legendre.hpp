#pragma once

// Mixed Legendre-Clairaut transform. Regular velocities V^i are resolved
// from p_i = dL/dv^i by Newton; everything else (B, H_phys and their first
// derivatives) follows from the implicit function theorem applied to that
// condition, so no finite differences enter the analytic path.

#include <optional>
#include <string>
#include <vector>

#include "clairaut/errors.hpp"
#include "clairaut/evaluate.hpp"
#include "clairaut/linalg.hpp"
#include "clairaut/model.hpp"
#include "clairaut/newton.hpp"

namespace clairaut {

/// q in declaration order (n values), p over regular coordinates in split
/// order (r values), v_deg over degenerate coordinates (n - r values).
struct PhasePoint {
  std::vector<double> q;
  std::vector<double> p;
  std::optional<std::vector<double>> v_deg;
};

/// Slot layout shared by every compiled expression of a model:
/// q (n) | d(q) (n) | p_q (n) | params | t.
class ModelSymbols {
 public:
  explicit ModelSymbols(const LagrangianModel& m) : n_(m.n()) {
    for (const auto& c : m.coords) table_.add(c);
    for (const auto& c : m.coords) table_.add(velocity_name(c));
    for (const auto& c : m.coords) table_.add(momentum_name(c));
    for (const auto& [k, v] : m.params) {
      table_.add(k);
      defaults_.push_back(v);
    }
    table_.add(kTimeSymbol);
  }

  const SymbolTable& table() const { return table_; }
  std::size_t q(std::size_t a) const { return a; }
  std::size_t v(std::size_t a) const { return n_ + a; }
  std::size_t p(std::size_t a) const { return 2 * n_ + a; }
  std::size_t t() const { return table_.size() - 1; }

  std::vector<double> blank() const {
    std::vector<double> s(table_.size(), 0.0);
    for (std::size_t k = 0; k < defaults_.size(); ++k) s[3 * n_ + k] = defaults_[k];
    return s;
  }

 private:
  std::size_t n_;
  SymbolTable table_;
  std::vector<double> defaults_;
};

/// Compiled L with its first and second partials.
class LagrangianEval {
 public:
  explicit LagrangianEval(const LagrangianModel& m) : model_(m), sym_(m) {
    std::size_t n = m.n();
    auto vs = m.velocities();
    const auto& tab = sym_.table();
    l_ = CompiledExpr(m.lagrangian, tab);
    std::vector<Expr> lv(n);
    for (std::size_t a = 0; a < n; ++a) {
      lv[a] = differentiate(m.lagrangian, vs[a]);
      lv_.emplace_back(lv[a], tab);
      lq_.emplace_back(differentiate(m.lagrangian, m.coords[a]), tab);
    }
    lvv_.assign(n, std::vector<CompiledExpr>(n));
    lvq_.assign(n, std::vector<CompiledExpr>(n));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a; b < n; ++b) {
        lvv_[a][b] = CompiledExpr(differentiate(lv[a], vs[b]), tab);
        lvv_[b][a] = lvv_[a][b];
      }
      for (std::size_t b = 0; b < n; ++b)
        lvq_[a][b] = CompiledExpr(differentiate(lv[a], m.coords[b]), tab);
    }
  }

  const LagrangianModel& model() const { return model_; }
  const ModelSymbols& symbols() const { return sym_; }
  std::size_t n() const { return model_.n(); }

  double L(const std::vector<double>& s) const { return l_(s); }
  double Lv(std::size_t a, const std::vector<double>& s) const { return lv_[a](s); }
  double Lq(std::size_t a, const std::vector<double>& s) const { return lq_[a](s); }
  double Lvv(std::size_t a, std::size_t b, const std::vector<double>& s) const { return lvv_[a][b](s); }
  double Lvq(std::size_t a, std::size_t b, const std::vector<double>& s) const { return lvq_[a][b](s); }

 private:
  LagrangianModel model_;
  ModelSymbols sym_;
  CompiledExpr l_;
  std::vector<CompiledExpr> lv_, lq_;
  std::vector<std::vector<CompiledExpr>> lvv_, lvq_;
};

/// Everything the upper layers need at one resolved phase point. Gradients
/// in q run over all coordinates in declaration order; in p over regular
/// coordinates in split order.
struct PointData {
  std::vector<double> slots;  // q, resolved v, regular p filled; degenerate p zero
  Vector V, v_deg, B;
  double H = 0.0;
  Matrix dV_dq, dV_dp, dB_dq, dB_dp;
  Vector dH_dq, dH_dp;
  Vector Lq;
};

class ClairautTransform {
 public:
  ClairautTransform(LagrangianModel model, VariableSplit split, NewtonConfig cfg = {})
      : eval_(model), split_(std::move(split)), cfg_(cfg) {
    if (cfg_.tol <= 0) throw Error("newton tolerance must be positive");
  }

  const LagrangianModel& model() const { return eval_.model(); }
  const VariableSplit& split() const { return split_; }
  const LagrangianEval& lagrangian() const { return eval_; }
  const ModelSymbols& symbols() const { return eval_.symbols(); }
  const NewtonConfig& newton() const { return cfg_; }
  std::size_t n() const { return eval_.n(); }
  std::size_t r() const { return static_cast<std::size_t>(split_.r); }
  std::size_t d() const { return n() - r(); }
  std::size_t reg(std::size_t i) const { return static_cast<std::size_t>(split_.regular_index[i]); }
  std::size_t deg(std::size_t a) const { return static_cast<std::size_t>(split_.degenerate_index[a]); }

  /// Slot vector with q and regular p set; velocities zero.
  std::vector<double> slots_for(const PhasePoint& pt) const {
    check_dims(pt);
    auto s = symbols().blank();
    for (std::size_t a = 0; a < n(); ++a) s[symbols().q(a)] = pt.q[a];
    for (std::size_t i = 0; i < r(); ++i) s[symbols().p(reg(i))] = pt.p[i];
    return s;
  }

  /// Solves p_i = dL/dv^i for V at the given degenerate velocities.
  Vector solve_V(std::vector<double>& s, const Vector& p, const Vector& vdeg) const {
    for (std::size_t a = 0; a < d(); ++a) s[symbols().v(deg(a))] = vdeg(a);
    NewtonSystem sys = [&](const Vector& x, Vector& g, Matrix& j) {
      for (std::size_t i = 0; i < r(); ++i) s[symbols().v(reg(i))] = x(i);
      g.resize(r());
      j.resize(r(), r());
      for (std::size_t i = 0; i < r(); ++i) {
        g(i) = eval_.Lv(reg(i), s) - p(i);
        for (std::size_t k = 0; k < r(); ++k) j(i, k) = eval_.Lvv(reg(i), reg(k), s);
      }
    };
    double tol = cfg_.tol * (1.0 + (r() ? p.lpNorm<Eigen::Infinity>() : 0.0));
    Vector x = Vector::Zero(r());
    if (r() > 0) x = newton_solve(sys, x, tol, cfg_).x;
    for (std::size_t i = 0; i < r(); ++i) s[symbols().v(reg(i))] = x(i);
    return x;
  }

  PointData resolve(const PhasePoint& pt) const {
    if (pt.v_deg) return resolve_at(pt, to_vector(*pt.v_deg));
    // Reference degenerate velocity: zero, or all ones where L is singular at zero.
    try {
      return resolve_at(pt, Vector::Zero(d()));
    } catch (const Error&) {
      if (d() == 0) throw;
      return resolve_at(pt, Vector::Ones(d()));
    }
  }

 private:
  void check_dims(const PhasePoint& pt) const {
    if (pt.q.size() != n() || pt.p.size() != r() || (pt.v_deg && pt.v_deg->size() != d()))
      throw Error("phase point dimensions do not match the split");
  }

  PointData resolve_at(const PhasePoint& pt, const Vector& vdeg) const {
    PointData out;
    out.slots = slots_for(pt);
    Vector p = to_vector(pt.p);
    out.V = solve_V(out.slots, p, vdeg);
    out.v_deg = vdeg;
    const auto& s = out.slots;
    std::size_t N = n(), R = r(), D = d();

    Matrix wreg(R, R), wmix(D, R), lvq_reg(R, N), lvq_deg(D, N);
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t k = 0; k < R; ++k) wreg(i, k) = eval_.Lvv(reg(i), reg(k), s);
      for (std::size_t b = 0; b < N; ++b) lvq_reg(i, b) = eval_.Lvq(reg(i), b, s);
    }
    for (std::size_t a = 0; a < D; ++a) {
      for (std::size_t k = 0; k < R; ++k) wmix(a, k) = eval_.Lvv(deg(a), reg(k), s);
      for (std::size_t b = 0; b < N; ++b) lvq_deg(a, b) = eval_.Lvq(deg(a), b, s);
    }
    Matrix winv = Matrix::Zero(R, R);
    if (R > 0) {
      Eigen::FullPivLU<Matrix> lu(wreg);
      if (!lu.isInvertible())
        throw NewtonError(NewtonError::Kind::SingularJacobian, "regular Hessian block is singular", 0.0);
      winv = lu.inverse();
    }
    out.dV_dq = -winv * lvq_reg;
    out.dV_dp = winv;
    out.dB_dq = lvq_deg + wmix * out.dV_dq;
    out.dB_dp = wmix * winv;

    out.B.resize(D);
    for (std::size_t a = 0; a < D; ++a) out.B(a) = eval_.Lv(deg(a), s);
    out.Lq.resize(N);
    for (std::size_t b = 0; b < N; ++b) out.Lq(b) = eval_.Lq(b, s);

    out.H = p.dot(out.V) + out.B.dot(vdeg) - eval_.L(s);
    out.dH_dp = out.V + out.dB_dp.transpose() * vdeg;
    out.dH_dq = -out.Lq + out.dB_dq.transpose() * vdeg;
    return out;
  }

  LagrangianEval eval_;
  VariableSplit split_;
  NewtonConfig cfg_;
};

inline Vector resolve_regular_velocities(const ClairautTransform& ct, const PhasePoint& pt) {
  auto s = ct.slots_for(pt);
  Vector vdeg = pt.v_deg ? to_vector(*pt.v_deg) : ct.resolve(pt).v_deg;
  return ct.solve_V(s, to_vector(pt.p), vdeg);
}

inline Vector eval_B(const ClairautTransform& ct, const PhasePoint& pt) { return ct.resolve(pt).B; }

inline double eval_H_phys(const ClairautTransform& ct, const PhasePoint& pt) { return ct.resolve(pt).H; }

struct HGradient {
  Vector dq;  // n, declaration order
  Vector dp;  // r, split order
};

inline HGradient grad_H_phys(const ClairautTransform& ct, const PhasePoint& pt) {
  auto pd = ct.resolve(pt);
  return {pd.dH_dq, pd.dH_dp};
}

struct BGradient {
  Matrix dq;  // (n-r) x n
  Matrix dp;  // (n-r) x r
};

inline BGradient grad_B(const ClairautTransform& ct, const PhasePoint& pt) {
  auto pd = ct.resolve(pt);
  return {pd.dB_dq, pd.dB_dp};
}

/// H_phys + sum (pbar_b - B_b) v^b, with v^b from pt.v_deg (zero if unset).
inline double eval_H_mix(const ClairautTransform& ct, const PhasePoint& pt, const std::vector<double>& pbar) {
  if (pbar.size() != ct.d()) throw Error("pbar must have one entry per degenerate coordinate");
  auto pd = ct.resolve(pt);
  Vector v = pt.v_deg ? to_vector(*pt.v_deg) : Vector::Zero(ct.d());
  return pd.H + (to_vector(pbar) - pd.B).dot(v);
}

/// |H - sum pbar_B dH/dpbar_B + L(q, dH/dpbar)| for the mixed solution:
/// envelope branch on regular slots (pbar_i = p_i), general branch with
/// constants c on degenerate slots. pbar is indexed by declaration order.
inline double clairaut_residual(const ClairautTransform& ct, const std::vector<double>& q,
                                const std::vector<double>& pbar, std::optional<std::vector<double>> c = {}) {
  if (pbar.size() != ct.n()) throw Error("pbar must have one entry per coordinate");
  PhasePoint pt{q, {}, c};
  for (std::size_t i = 0; i < ct.r(); ++i) pt.p.push_back(pbar[ct.reg(i)]);
  auto pd = ct.resolve(pt);
  Vector cv = pd.v_deg;
  std::vector<double> pbar_deg;
  for (std::size_t a = 0; a < ct.d(); ++a) pbar_deg.push_back(pbar[ct.deg(a)]);
  double H = pd.H + (to_vector(pbar_deg) - pd.B).dot(cv);
  // dH/dpbar_i = dH_phys/dp_i - sum c^b dB_b/dp_i ; dH/dpbar_a = c^a
  Vector gi = pd.dH_dp - pd.dB_dp.transpose() * cv;
  auto s = ct.symbols().blank();
  double sum = 0.0;
  for (std::size_t a = 0; a < ct.n(); ++a) s[ct.symbols().q(a)] = q[a];
  for (std::size_t i = 0; i < ct.r(); ++i) {
    s[ct.symbols().v(ct.reg(i))] = gi(i);
    sum += pbar[ct.reg(i)] * gi(i);
  }
  for (std::size_t a = 0; a < ct.d(); ++a) {
    s[ct.symbols().v(ct.deg(a))] = cv(a);
    sum += pbar[ct.deg(a)] * cv(a);
  }
  return std::abs(H - sum + ct.lagrangian().L(s));
}

/// Residual of the Clairaut equation for an explicit H over q, p_<coord>
/// and any extra symbols (for instance general-branch constants) bound in b.
inline double clairaut_residual(const LagrangianModel& m, const Expr& H, const Bindings& point) {
  Bindings b = with_params(m, point);
  Bindings lb = b;
  double h = evaluate(H, b);
  double sum = 0.0;
  for (const auto& c : m.coords) {
    std::string pn = momentum_name(c);
    double g = evaluate(differentiate(H, pn), b);
    auto it = b.find(pn);
    if (it == b.end()) throw EvalError::unbound(pn);
    sum += it->second * g;
    lb[velocity_name(c)] = g;
  }
  return std::abs(h - sum + evaluate(m.lagrangian, lb));
}

/// Numeric Legendre-Fenchel conjugate sup_v (p.v - L(q, v)) for convex,
/// nondegenerate models. Local maxima are found by Newton from a grid of
/// starts; the largest is returned.
inline double fenchel_conjugate(const LagrangianModel& m, const std::vector<double>& q,
                                const std::vector<double>& p, const NewtonConfig& cfg = {}) {
  LagrangianEval ev(m);
  std::size_t n = m.n();
  if (q.size() != n || p.size() != n) throw Error("fenchel_conjugate: dimension mismatch");
  auto s = ev.symbols().blank();
  for (std::size_t a = 0; a < n; ++a) s[ev.symbols().q(a)] = q[a];
  Vector pv = to_vector(p);
  NewtonSystem sys = [&](const Vector& x, Vector& g, Matrix& j) {
    for (std::size_t a = 0; a < n; ++a) s[ev.symbols().v(a)] = x(a);
    g.resize(n);
    j.resize(n, n);
    for (std::size_t a = 0; a < n; ++a) {
      g(a) = ev.Lv(a, s) - pv(a);
      for (std::size_t b = 0; b < n; ++b) j(a, b) = ev.Lvv(a, b, s);
    }
  };
  std::vector<double> levels = n <= 3 ? std::vector<double>{0, -1, 1, -2, 2} : std::vector<double>{0, -1, 1};
  std::size_t total = 1;
  for (std::size_t a = 0; a < n; ++a) total *= levels.size();
  double tol = cfg.tol * (1.0 + pv.lpNorm<Eigen::Infinity>());
  std::optional<double> best;
  for (std::size_t code = 0; code < total; ++code) {
    Vector x0(n);
    std::size_t c = code;
    for (std::size_t a = 0; a < n; ++a) {
      x0(a) = levels[c % levels.size()];
      c /= levels.size();
    }
    try {
      auto res = detail::newton_once(sys, x0, tol, cfg);
      Vector g;
      Matrix w;
      sys(res.x, g, w);
      Eigen::LLT<Matrix> llt(w);
      if (llt.info() != Eigen::Success) continue;
      double val = pv.dot(res.x) - ev.L(s);
      if (!best || val > *best) best = val;
    } catch (const Error&) {
    }
  }
  if (!best) throw NewtonError(NewtonError::Kind::NoMaximum, "no local maximum of p.v - L found", 0.0);
  return *best;
}

/// Phase points from velocity probes: q as sampled, p_i = dL/dv^i at the
/// sampled velocities. Points where the transform fails are skipped.
inline std::vector<PhasePoint> generate_phase_points(const ClairautTransform& ct, std::size_t count = 17,
                                                     std::uint64_t seed = 42) {
  std::vector<PhasePoint> out;
  const auto& m = ct.model();
  const auto& ev = ct.lagrangian();
  for (std::uint64_t round = 0; out.size() < count && round < 50; ++round) {
    for (const auto& b : generate_probes(m, count, seed + round * 7919)) {
      if (out.size() == count) break;
      auto s = ct.symbols().blank();
      PhasePoint pt;
      for (std::size_t a = 0; a < m.n(); ++a) {
        s[ct.symbols().q(a)] = b.at(m.coords[a]);
        s[ct.symbols().v(a)] = b.at(velocity_name(m.coords[a]));
        pt.q.push_back(b.at(m.coords[a]));
      }
      try {
        for (std::size_t i = 0; i < ct.r(); ++i) pt.p.push_back(ev.Lv(ct.reg(i), s));
        ct.resolve(pt);
      } catch (const Error&) {
        continue;
      }
      out.push_back(std::move(pt));
    }
  }
  if (out.size() < count) throw ModelError("could not find admissible phase points");
  return out;
}

}  // namespace clairaut
