#pragma once

// Hamilton-Clairaut equations of motion:
//   dq^i/dt = dH/dp_i - sum_b v^b dB_b/dp_i
//   dp_i/dt = -dH/dq^i + sum_b v^b dB_b/dq^i
//   dq^a/dt = v^a,  with  sum_b F_ab v^b = D_a H
// integrated by fixed-step RK4, plus trajectory diagnostics and the
// comparison with the primary-constraint formulation.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clairaut/gauge.hpp"

namespace clairaut {

struct GaugeMode {
  enum class Kind { Solve, Prescribed, Zero };
  Kind kind = Kind::Zero;
  Expr velocity;  // function of t, Prescribed only

  static GaugeMode solve() { return {Kind::Solve, {}}; }
  static GaugeMode zero() { return {Kind::Zero, {}}; }
  static GaugeMode prescribed(Expr e) { return {Kind::Prescribed, std::move(e)}; }
};

/// One mode per degenerate coordinate, in split order.
struct GaugeInput {
  std::vector<GaugeMode> modes;

  /// Solve on the classification's subblock, zero elsewhere.
  static GaugeInput defaults(const ClairautTransform& ct, const GaugeClassification& cls) {
    GaugeInput g;
    g.modes.assign(ct.d(), GaugeMode::zero());
    for (int a : cls.subblock) g.modes[static_cast<std::size_t>(a)] = GaugeMode::solve();
    return g;
  }
};

namespace detail {

inline void check_gauge(const ClairautTransform& ct, const GaugeInput& g, const GaugeClassification& cls) {
  if (g.modes.size() != ct.d()) throw std::invalid_argument("gauge input needs one mode per degenerate coordinate");
  std::set<int> block(cls.subblock.begin(), cls.subblock.end());
  for (std::size_t a = 0; a < g.modes.size(); ++a) {
    bool solve = g.modes[a].kind == GaugeMode::Kind::Solve;
    if (solve != (block.count(static_cast<int>(a)) > 0))
      throw std::invalid_argument("gauge mode of '" + ct.split().degenerate[a] +
                                  "' does not match the " + to_string(cls.kind) + " classification");
    if (g.modes[a].kind == GaugeMode::Kind::Prescribed) {
      for (const auto& s : free_symbols(g.modes[a].velocity))
        if (s != kTimeSymbol) throw std::invalid_argument("prescribed gauge may depend on t only, found '" + s + "'");
    }
  }
}

}  // namespace detail

struct DegenerateVelocities {
  Vector v;
  double residual = 0.0;  // max_a |sum_b F_ab v^b - D_a H| over all a
};

inline DegenerateVelocities degenerate_velocities(const ClairautTransform& ct, const PointData& pd,
                                                  const GaugeInput& gauge, const GaugeClassification& cls,
                                                  double t = 0.0) {
  detail::check_gauge(ct, gauge, cls);
  std::size_t D = ct.d();
  DegenerateVelocities out;
  out.v = Vector::Zero(D);
  if (D == 0) return out;
  Matrix f = field_strength(ct, pd);
  Vector dh = long_derivative_H(ct, pd);
  Bindings tb{{kTimeSymbol, t}};
  for (std::size_t a = 0; a < D; ++a)
    if (gauge.modes[a].kind == GaugeMode::Kind::Prescribed) out.v(a) = evaluate(gauge.modes[a].velocity, tb);
  const auto& blk = cls.subblock;
  if (!blk.empty()) {
    Matrix sub = principal_minor(f, blk);
    Vector rhs(blk.size());
    for (std::size_t k = 0; k < blk.size(); ++k) {
      auto a = static_cast<std::size_t>(blk[k]);
      rhs(k) = dh(a) - f.row(a).dot(out.v);
    }
    Eigen::FullPivLU<Matrix> lu(sub);
    if (!lu.isInvertible()) throw RankError("solve block of F is singular at this point");
    Vector sol = lu.solve(rhs);
    for (std::size_t k = 0; k < blk.size(); ++k) out.v(blk[k]) = sol(k);
  }
  out.residual = (f * out.v - dh).lpNorm<Eigen::Infinity>();
  return out;
}

inline DegenerateVelocities degenerate_velocities(const ClairautTransform& ct, const PhasePoint& pt,
                                                  const GaugeInput& gauge, const GaugeClassification& cls,
                                                  double t = 0.0) {
  return degenerate_velocities(ct, ct.resolve(pt), gauge, cls, t);
}

struct IntegratorConfig {
  double t0 = 0.0;
  double t1 = 1.0;
  double dt = 1e-3;
  double consistency_tol = 1e-6;

  std::size_t steps() const {
    if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(t1 > t0)) throw std::invalid_argument("t1 must exceed t0");
    double n = (t1 - t0) / dt;
    if (n > 1e8) throw std::invalid_argument("more than 1e8 steps requested");
    return static_cast<std::size_t>(std::llround(n));
  }
};

struct Sample {
  double t = 0.0;
  std::vector<double> q;  // n, declaration order
  std::vector<double> p;  // r, split order
  std::vector<double> v;  // n - r, split order
  double H = 0.0;
  double consistency = 0.0;
  double el = 0.0;  // filled by el_residual
};

struct Trajectory {
  std::vector<Sample> samples;
  std::optional<std::string> failure;
  bool initially_inconsistent = false;
  double max_consistency = 0.0;
};

namespace detail {

struct Rhs {
  Vector qdot;  // n
  Vector pdot;  // r
  DegenerateVelocities dv;
  double H = 0.0;
};

inline Rhs rhs(const ClairautTransform& ct, const Vector& q, const Vector& p, const GaugeInput& g,
               const GaugeClassification& cls, double t) {
  PhasePoint pt{to_std(q), to_std(p), {}};
  auto pd = ct.resolve(pt);
  Rhs out;
  out.dv = degenerate_velocities(ct, pd, g, cls, t);
  const Vector& v = out.dv.v;
  out.H = pd.H;
  out.qdot = Vector::Zero(ct.n());
  out.pdot = Vector::Zero(ct.r());
  for (std::size_t i = 0; i < ct.r(); ++i) {
    out.qdot(ct.reg(i)) = pd.dH_dp(i) - pd.dB_dp.col(i).dot(v);
    out.pdot(i) = -pd.dH_dq(ct.reg(i)) + pd.dB_dq.col(ct.reg(i)).dot(v);
  }
  for (std::size_t a = 0; a < ct.d(); ++a) out.qdot(ct.deg(a)) = v(a);
  return out;
}

}  // namespace detail

/// Fixed-step RK4. Failures truncate the trajectory and are recorded in
/// Trajectory::failure rather than thrown.
inline Trajectory integrate(const ClairautTransform& ct, const PhasePoint& initial, const GaugeInput& gauge,
                            const GaugeClassification& cls, const IntegratorConfig& cfg) {
  detail::check_gauge(ct, gauge, cls);
  std::size_t steps = cfg.steps();
  Trajectory tr;
  Vector q = to_vector(initial.q);
  Vector p = to_vector(initial.p);
  auto record = [&](double t, const detail::Rhs& k) {
    Sample s;
    s.t = t;
    s.q = to_std(q);
    s.p = to_std(p);
    s.v = to_std(k.dv.v);
    s.H = k.H;
    s.consistency = k.dv.residual;
    tr.max_consistency = std::max(tr.max_consistency, s.consistency);
    tr.samples.push_back(std::move(s));
  };
  try {
    auto k1 = detail::rhs(ct, q, p, gauge, cls, cfg.t0);
    tr.initially_inconsistent = k1.dv.residual > cfg.consistency_tol;
    record(cfg.t0, k1);
    for (std::size_t step = 0; step < steps; ++step) {
      double t = cfg.t0 + static_cast<double>(step) * cfg.dt;
      double h = cfg.dt;
      auto k2 = detail::rhs(ct, q + 0.5 * h * k1.qdot, p + 0.5 * h * k1.pdot, gauge, cls, t + 0.5 * h);
      auto k3 = detail::rhs(ct, q + 0.5 * h * k2.qdot, p + 0.5 * h * k2.pdot, gauge, cls, t + 0.5 * h);
      auto k4 = detail::rhs(ct, q + h * k3.qdot, p + h * k3.pdot, gauge, cls, t + h);
      q += h / 6.0 * (k1.qdot + 2 * k2.qdot + 2 * k3.qdot + k4.qdot);
      p += h / 6.0 * (k1.pdot + 2 * k2.pdot + 2 * k3.pdot + k4.pdot);
      double tn = cfg.t0 + static_cast<double>(step + 1) * cfg.dt;
      k1 = detail::rhs(ct, q, p, gauge, cls, tn);
      record(tn, k1);
      if (!tr.initially_inconsistent && k1.dv.residual > cfg.consistency_tol) {
        tr.failure = "integrability: consistency residual " + format_number(k1.dv.residual) +
                     " exceeds tolerance at t=" + format_number(tn);
        break;
      }
    }
  } catch (const Error& e) {
    tr.failure = e.what();
  }
  return tr;
}

namespace detail {

// Second-order central difference, one-sided at the ends.
inline std::vector<double> time_derivative(const std::vector<double>& y, double dt) {
  std::size_t m = y.size();
  std::vector<double> d(m, 0.0);
  if (m < 3) return d;
  for (std::size_t k = 1; k + 1 < m; ++k) d[k] = (y[k + 1] - y[k - 1]) / (2 * dt);
  d[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * dt);
  d[m - 1] = (3 * y[m - 1] - 4 * y[m - 2] + y[m - 3]) / (2 * dt);
  return d;
}

}  // namespace detail

/// Per sample: max over coordinates of |d/dt dL/dv^B - dL/dq^B| with the
/// velocity resolved from the sample's (q, p, v), together with the
/// kinematic mismatch |dq/dt - velocity|. Also stores it in Sample::el.
inline std::vector<double> el_residual(const ClairautTransform& ct, Trajectory& traj) {
  const auto& ev = ct.lagrangian();
  const auto& sym = ct.symbols();
  std::size_t m = traj.samples.size();
  std::size_t n = ct.n();
  std::vector<double> out(m, 0.0);
  if (m < 3) return out;
  double dt = traj.samples[1].t - traj.samples[0].t;
  std::vector<std::vector<double>> lv(n, std::vector<double>(m)), lq(n, std::vector<double>(m)),
      qs(n, std::vector<double>(m)), vel(n, std::vector<double>(m));
  for (std::size_t k = 0; k < m; ++k) {
    const auto& s = traj.samples[k];
    PhasePoint pt{s.q, s.p, s.v};
    auto slots = ct.slots_for(pt);
    ct.solve_V(slots, to_vector(s.p), to_vector(s.v));
    for (std::size_t a = 0; a < n; ++a) {
      lv[a][k] = ev.Lv(a, slots);
      lq[a][k] = ev.Lq(a, slots);
      qs[a][k] = s.q[a];
      vel[a][k] = slots[sym.v(a)];
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    auto dlv = detail::time_derivative(lv[a], dt);
    auto dq = detail::time_derivative(qs[a], dt);
    for (std::size_t k = 0; k < m; ++k) {
      out[k] = std::max(out[k], std::abs(dlv[k] - lq[a][k]));
      out[k] = std::max(out[k], std::abs(dq[k] - vel[a][k]));
    }
  }
  for (std::size_t k = 0; k < m; ++k) traj.samples[k].el = out[k];
  return out;
}

/// Per sample |dX/dt - rhs| with rhs = {X,H} + sum_{a in block} v^a dX/dq^a
/// + sum_{a not in block} v^a D_a X, where the bracket is the new bracket
/// (gaugeless) or the gauge bracket over the solve block (gauge, limit).
/// With zero velocity off the block the last sum drops out.
inline std::vector<double> evolve_observable(const ClairautTransform& ct, const Observable& x,
                                             const Trajectory& traj, const GaugeClassification& cls) {
  std::size_t m = traj.samples.size();
  std::vector<double> out(m, 0.0);
  if (m < 3) return out;
  std::set<int> block(cls.subblock.begin(), cls.subblock.end());
  std::vector<double> xs(m);
  std::vector<double> rhs(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& s = traj.samples[k];
    PhasePoint pt{s.q, s.p, {}};
    auto pd = ct.resolve(pt);
    Jet xj = x.jet(pd.slots);
    Jet hj = h_jet(pd);
    double br = cls.kind == GaugeKind::Gaugeless ? bracket_new(ct, pd, xj, hj) : bracket_gauge(ct, pd, xj, hj, cls);
    double extra = 0.0;
    for (std::size_t a = 0; a < ct.d(); ++a) {
      if (s.v[a] == 0.0) continue;
      extra += s.v[a] * (block.count(static_cast<int>(a)) ? xj.dq(ct.deg(a)) : long_derivative(ct, pd, xj, a));
    }
    xs[k] = xj.value;
    rhs[k] = br + extra;
  }
  double dt = traj.samples[1].t - traj.samples[0].t;
  auto dx = detail::time_derivative(xs, dt);
  for (std::size_t k = 0; k < m; ++k) out[k] = std::abs(dx[k] - rhs[k]);
  return out;
}

struct DiracReport {
  Vector phi;               // p_a - B_a
  double H_T = 0.0;         // H_phys + sum v^a phi_a
  Matrix phi_phi;           // {phi_a, phi_b}_full
  Vector phi_H;             // {phi_a, H_phys}_full
  Vector DH;                // D_a H_phys
  Matrix F;
  double fab_residual = 0.0;  // max |{phi_a,phi_b} - F_ab|
  double dhf_residual = 0.0;  // max |{phi_a,H} - sigma D_a H|
  double ff_residual = 0.0;   // max_a |{phi_a, H_T}_full|
};

namespace detail {

// Gradient over the full phase space: q (n) then p (n), both in declaration order.
struct FullJet {
  Vector dq;
  Vector dp;
};

inline double full_bracket(const FullJet& x, const FullJet& y) {
  return x.dq.dot(y.dp) - y.dq.dot(x.dp);
}

}  // namespace detail

/// Sign relating {phi_a, H_phys}_full to D_a H_phys under the full bracket
/// sum_A (dX/dq^A dY/dp_A - dY/dq^A dX/dp_A).
inline constexpr double kDiracSign = -1.0;

inline DiracReport dirac_report(const ClairautTransform& ct, const PhasePoint& pt, const std::vector<double>& v_deg,
                                std::optional<std::vector<double>> p_deg = {}, double sigma = kDiracSign) {
  std::size_t N = ct.n(), R = ct.r(), D = ct.d();
  if (v_deg.size() != D) throw Error("dirac_report: v_deg needs one entry per degenerate coordinate");
  auto pd = ct.resolve(pt);
  DiracReport rep;
  Vector pa = p_deg ? to_vector(*p_deg) : pd.B;
  rep.phi = pa - pd.B;
  Vector v = to_vector(v_deg);
  rep.H_T = pd.H + v.dot(rep.phi);

  std::vector<detail::FullJet> phi(D);
  for (std::size_t a = 0; a < D; ++a) {
    phi[a].dq = -pd.dB_dq.row(a).transpose();
    phi[a].dp = Vector::Zero(N);
    for (std::size_t i = 0; i < R; ++i) phi[a].dp(ct.reg(i)) = -pd.dB_dp(a, i);
    phi[a].dp(ct.deg(a)) = 1.0;
  }
  detail::FullJet h{pd.dH_dq, Vector::Zero(N)};
  for (std::size_t i = 0; i < R; ++i) h.dp(ct.reg(i)) = pd.dH_dp(i);

  rep.F = field_strength(ct, pd);
  rep.DH = long_derivative_H(ct, pd);
  rep.phi_phi = Matrix::Zero(D, D);
  rep.phi_H = Vector::Zero(D);
  for (std::size_t a = 0; a < D; ++a) {
    for (std::size_t b = 0; b < D; ++b) {
      rep.phi_phi(a, b) = detail::full_bracket(phi[a], phi[b]);
      rep.fab_residual = std::max(rep.fab_residual, std::abs(rep.phi_phi(a, b) - rep.F(a, b)));
    }
    rep.phi_H(a) = detail::full_bracket(phi[a], h);
    rep.dhf_residual = std::max(rep.dhf_residual, std::abs(rep.phi_H(a) - sigma * rep.DH(a)));
  }
  if (D > 0) rep.ff_residual = (rep.phi_H + rep.phi_phi * v).lpNorm<Eigen::Infinity>();
  return rep;
}

/// Determines sigma from points where D H is not negligible; throws if the
/// sign is not the same everywhere or no point is informative.
inline double calibrate_dirac_sign(const ClairautTransform& ct, const std::vector<PhasePoint>& probes,
                                   double tol = 1e-9) {
  std::optional<double> sigma;
  for (const auto& pt : probes) {
    auto rep = dirac_report(ct, pt, std::vector<double>(ct.d(), 0.0));
    for (std::size_t a = 0; a < ct.d(); ++a) {
      if (std::abs(rep.DH(a)) < 1e-6) continue;
      double s = rep.phi_H(a) / rep.DH(a);
      double rounded = s > 0 ? 1.0 : -1.0;
      if (std::abs(s - rounded) > tol * (1 + std::abs(s)) * 1e3)
        throw Error("{phi, H_phys} is not +-D H at a probe (ratio " + format_number(s) + ")");
      if (sigma && *sigma != rounded) throw Error("sign relating {phi, H_phys} and D H is not constant");
      sigma = rounded;
    }
  }
  if (!sigma) throw Error("no probe with nonzero D H to calibrate the sign");
  return *sigma;
}

}  // namespace clairaut
