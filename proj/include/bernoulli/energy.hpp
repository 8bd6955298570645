#pragma once

#include "bernoulli/field.hpp"

namespace bernoulli {

struct EnergyReport {
  double dirichlet = 0.0;  // sum over components of sum_e w (du)^2
  double bulk = 0.0;       // sum_v m Q [ |u_v| > tau ]
  double total = 0.0;      // dirichlet + bulk, exactly
  double tau = 0.0;
};

/// The discrete Bernoulli functional. Pure; compensated accumulation.
inline EnergyReport energy(const MetricComplex& mc, const VectorField& u, const QField& q,
                           double tau) {
  check_shapes(mc, u);
  EnergyReport rep;
  rep.tau = tau;
  KahanSum dir, bulk;
  for (const Edge& e : mc.edges) {
    double s = 0.0;
    for (int i = 0; i < u.m; ++i) s += sq(u.at(e.i, i) - u.at(e.j, i));
    dir.add(e.w * s);
  }
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (u.norm_at(v) > tau) bulk.add(mc.mass[static_cast<std::size_t>(v)] * q.at(v));
  rep.dirichlet = dir.value();
  rep.bulk = bulk.value();
  rep.total = rep.dirichlet + rep.bulk;
  return rep;
}

inline double dirichlet_energy(const MetricComplex& mc, const VectorField& u) {
  KahanSum dir;
  for (const Edge& e : mc.edges) {
    double s = 0.0;
    for (int i = 0; i < u.m; ++i) s += sq(u.at(e.i, i) - u.at(e.j, i));
    dir.add(e.w * s);
  }
  return dir.value();
}

/// Smooth surrogate: the indicator is replaced by the piecewise-linear clamp
/// beta_eps(s) = min(s/eps, 1). Converges to energy() from below as eps -> 0
/// on fields with values in {0} union [eps0, inf).
inline double relaxed_energy(const MetricComplex& mc, const VectorField& u, const QField& q,
                             double eps) {
  require(eps > 0.0, "relaxed_energy: need eps > 0");
  check_shapes(mc, u);
  KahanSum bulk;
  for (int v = 0; v < mc.vertex_count(); ++v)
    bulk.add(mc.mass[static_cast<std::size_t>(v)] * q.at(v) * std::min(u.norm_at(v) / eps, 1.0));
  return dirichlet_energy(mc, u) + bulk.value();
}

/// (u_1, ..., (u_i - delta*phi)^+, ..., u_m); preserves admissibility and can
/// only shrink the positivity set.
inline VectorField competitor_truncate(const MetricComplex& mc, const VectorField& u,
                                       const std::vector<double>& phi, double delta, int comp) {
  check_shapes(mc, u);
  require(delta > 0.0, "competitor_truncate: need delta > 0");
  require(comp >= 0 && comp < u.m, "competitor_truncate: bad component");
  require(phi.size() == static_cast<std::size_t>(u.vertices), "competitor_truncate: phi size mismatch");
  for (int b : mc.boundary)
    require(phi[static_cast<std::size_t>(b)] == 0.0, "competitor_truncate: phi must vanish on the boundary");
  for (double p : phi) require(p >= 0.0, "competitor_truncate: phi must be nonnegative");
  VectorField v = u;
  for (int vtx = 0; vtx < u.vertices; ++vtx)
    v.at(vtx, comp) = std::max(u.at(vtx, comp) - delta * phi[static_cast<std::size_t>(vtx)], 0.0);
  return v;
}

// ---------------------------------------------------------------------------
// Radial cutoff profiles
// ---------------------------------------------------------------------------

/// Comparison function for the Laplacian bound: at K = 0 the closed forms
/// phi(s) = log s (N = 2) and (1 - s^(2-N))/(N - 2) (N >= 3); at K < 0 the
/// sinh-kernel integral, evaluated by adaptive Simpson to 1e-10 absolute so
/// competitor-energy comparisons are dominated by mesh error.
inline double comparison_phi(double s, int N, double K) {
  require(s > 0.0, "comparison_phi: need s > 0");
  require(N >= 1, "comparison_phi: need N >= 1");
  require(K <= 0.0, "comparison_phi: need K <= 0");
  if (N == 1) return s - 1.0;  // the 1-N exponent flattens the kernel
  if (K == 0.0) {
    if (N == 2) return std::log(s);
    return (1.0 - std::pow(s, 2.0 - static_cast<double>(N))) / (static_cast<double>(N) - 2.0);
  }
  double kappa = K / (static_cast<double>(N) - 1.0);
  double sk = std::sqrt(-kappa);
  auto f = [&](double t) { return std::pow(std::sinh(sk * t) / sk, 1.0 - static_cast<double>(N)); };
  // adaptive Simpson on [min(s,1), max(s,1)], signed
  struct Simpson {
    double tol;
    int depth_cap = 48;
    double operator()(const decltype(f)& g, double a, double b, double fa, double fm, double fb,
                      double whole, int depth) const {
      double m = 0.5 * (a + b);
      double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      double flm = g(lm), frm = g(rm);
      double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      if (depth >= depth_cap || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
      return (*this)(g, a, m, fa, flm, fm, left, depth + 1) +
             (*this)(g, m, b, fm, frm, fb, right, depth + 1);
    }
  };
  double a = std::min(s, 1.0), b = std::max(s, 1.0);
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double integral = Simpson{1e-10}(f, a, b, fa, fm, fb, whole, 0);
  // phi(s) = -int_s^1 f
  return s <= 1.0 ? -integral : integral;
}

/// psi_theta(t) = (phi(t) - phi(theta))^+ / (phi(1) - phi(theta)): zero up to
/// theta, one at t = 1.
inline double psi_theta_value(double t, double theta, int N, double K) {
  require(theta > 0.0 && theta < 1.0, "psi_theta: need theta in (0,1)");
  if (t <= theta) return 0.0;
  double p1 = comparison_phi(1.0, N, K);
  double pt = comparison_phi(std::min(t, 1.0), N, K);
  double pth = comparison_phi(theta, N, K);
  double v = (pt - pth) / (p1 - pth);
  return std::clamp(t >= 1.0 ? 1.0 : v, 0.0, 1.0);
}

/// Per-vertex multiplier psi_theta(dist/r): 0 on B_{theta r}, 1 outside B_r,
/// monotone in the distance.
struct CompetitorProfile {
  int center = 0;
  double r = 0.0;
  double theta = 0.0;
  int N = 2;
  double K = 0.0;
  std::vector<double> multiplier;
  std::vector<uint8_t> inside;  // dist < r; the cap applies only here
};

inline CompetitorProfile psi_theta(const MetricComplex& mc, const DistanceField& dist, int x0,
                                   double r, double theta, int N, double K) {
  require(r > 0.0, "psi_theta: need r > 0");
  require(theta > 0.0 && theta < 1.0, "psi_theta: theta outside (0,1)");
  require(N >= 1 && K <= 0.0, "psi_theta: need N >= 1, K <= 0");
  require(dist.source == x0, "psi_theta: distance field source mismatch");
  CompetitorProfile prof;
  prof.center = x0;
  prof.r = r;
  prof.theta = theta;
  prof.N = N;
  prof.K = K;
  prof.multiplier.resize(static_cast<std::size_t>(mc.vertex_count()));
  prof.inside.resize(static_cast<std::size_t>(mc.vertex_count()));
  for (int v = 0; v < mc.vertex_count(); ++v) {
    double d = dist.dist[static_cast<std::size_t>(v)];
    prof.multiplier[static_cast<std::size_t>(v)] = psi_theta_value(d / r, theta, N, K);
    prof.inside[static_cast<std::size_t>(v)] = d < r ? 1 : 0;
  }
  return prof;
}

/// v_i = min(u_i, M * psi) inside B_r, u outside; vanishes on B_{theta r}.
/// With M >= sup_{B_r}|u| the two branches agree near the sphere.
inline VectorField cutoff_competitor(const MetricComplex& mc, const VectorField& u,
                                     const CompetitorProfile& prof, double M) {
  check_shapes(mc, u);
  require(M >= 0.0, "cutoff_competitor: need M >= 0");
  VectorField v = u;
  for (int vtx = 0; vtx < u.vertices; ++vtx) {
    if (!prof.inside[static_cast<std::size_t>(vtx)]) continue;
    double cap = M * prof.multiplier[static_cast<std::size_t>(vtx)];
    for (int i = 0; i < u.m; ++i) v.at(vtx, i) = std::min(u.at(vtx, i), cap);
  }
  return v;
}

}  // namespace bernoulli
