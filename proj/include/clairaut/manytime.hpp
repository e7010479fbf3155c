#pragma once

// Degenerate coordinates as additional times: t^0 = t, t^a = q^a, with
// Hamiltonians H_0 = H_phys and H_a = -B_a on (q^i, p_i).

#include <string>
#include <vector>

#include "clairaut/gauge.hpp"

namespace clairaut {

class ManyTimeSystem {
 public:
  explicit ManyTimeSystem(const ClairautTransform& ct) : ct_(&ct) {
    labels_.push_back(kTimeSymbol);
    for (const auto& a : ct.split().degenerate) labels_.push_back(a);
  }

  std::size_t m() const { return labels_.size(); }
  const std::vector<std::string>& time_labels() const { return labels_; }
  const ClairautTransform& transform() const { return *ct_; }

  /// H_mu with its gradient over (q, p).
  std::vector<Jet> hamiltonians(const PointData& pd) const {
    std::vector<Jet> out{h_jet(pd)};
    for (std::size_t a = 0; a < ct_->d(); ++a) {
      Jet b = b_jet(pd, a);
      out.push_back({-b.value, -b.dq, -b.dp});
    }
    return out;
  }

  std::vector<double> values(const PhasePoint& pt) const {
    std::vector<double> out;
    for (const auto& j : hamiltonians(ct_->resolve(pt))) out.push_back(j.value);
    return out;
  }

  /// dH_mu/dt^nu: zero for the physical time (time-independent models).
  double time_derivative(const Jet& h, std::size_t nu) const {
    return nu == 0 ? 0.0 : h.dq(ct_->deg(nu - 1));
  }

 private:
  const ClairautTransform* ct_;
  std::vector<std::string> labels_;
};

inline ManyTimeSystem map_to_manytime(const ClairautTransform& ct) { return ManyTimeSystem(ct); }

/// G_mn = dH_m/dt^n - dH_n/dt^m + {H_m, H_n}_phys; upper triangle mirrored.
inline Matrix g_matrix(const ManyTimeSystem& mts, const PhasePoint& pt) {
  const auto& ct = mts.transform();
  auto hs = mts.hamiltonians(ct.resolve(pt));
  std::size_t m = mts.m();
  Matrix g = Matrix::Zero(m, m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      double v = mts.time_derivative(hs[a], b) - mts.time_derivative(hs[b], a) + poisson(ct, hs[a], hs[b]);
      g(a, b) = v;
      g(b, a) = -v;
    }
  return g;
}

struct IntegrabilityReport {
  double max_G = 0.0;
  double max_G_minus_F = 0.0;
  double max_G0_minus_DH = 0.0;
};

inline IntegrabilityReport integrability_report(const ManyTimeSystem& mts, const ClairautTransform& ct,
                                                const std::vector<PhasePoint>& probes) {
  IntegrabilityReport rep;
  for (const auto& pt : probes) {
    Matrix g = g_matrix(mts, pt);
    auto pd = ct.resolve(pt);
    Matrix f = field_strength(ct, pd);
    Vector dh = long_derivative_H(ct, pd);
    if (g.size() > 0) rep.max_G = std::max(rep.max_G, g.cwiseAbs().maxCoeff());
    for (std::size_t a = 0; a < ct.d(); ++a) {
      rep.max_G0_minus_DH = std::max(rep.max_G0_minus_DH, std::abs(g(0, a + 1) - dh(a)));
      for (std::size_t b = 0; b < ct.d(); ++b)
        rep.max_G_minus_F = std::max(rep.max_G_minus_F, std::abs(g(a + 1, b + 1) - f(a, b)));
    }
  }
  return rep;
}

}  // namespace clairaut
