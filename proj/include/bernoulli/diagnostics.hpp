#pragma once

#include "bernoulli/minimize.hpp"

namespace bernoulli {

/// Scale-normalized energy minus the boundary L2 term:
///   W(r) = r^-N [ smoothed-ball sum of w (du)^2 + m Q chi ]
///        - r^-(N+1) mean_shell(|u|^2) |D chi_{B_r}|(X),
/// with the ball indicator mollified across [r-dr, r+dr] and the shell mean
/// taken against the matching triangular kernel. A one-sided box window
/// [r, r+dr) biases the boundary term by ~N dr/2r, and any sharp window
/// samples mesh rings first-order-discontinuously.
namespace detail {
/// Smoothed ball indicator: 1 below r-dr, 0 above r+dr, piecewise quadratic
/// between. A sharp indicator samples mesh rings discontinuously and makes
/// ball sums jump by whole rings.
inline double smooth_ball_weight(double d, double r, double dr) {
  double x = (d - r) / dr;
  if (x <= -1.0) return 1.0;
  if (x >= 1.0) return 0.0;
  return x <= 0.0 ? 1.0 - 0.5 * sq(1.0 + x) : 0.5 * sq(1.0 - x);
}

/// Perimeter of the metric ball |D chi_{B_r}|(X). Flat and cone charts have
/// it in closed form; elsewhere it is the slope of the ball-mass function,
/// recovered by a quadratic least-squares fit across a window wide enough to
/// average the mesh staircase.
inline double ball_perimeter(const MetricComplex& mc, const DistanceField& dist, double r,
                             double dr) {
  constexpr double two_pi = 2.0 * 3.14159265358979323846;
  if (mc.chart == ChartKind::plane && mc.intrinsic_dim == 2) return two_pi * r;
  if (mc.chart == ChartKind::cone) {
    if (dist.source == 0) return mc.cone_angle * r;
    if (dist.dist[0] > r) return two_pi * r;  // ball misses the apex: locally flat
  }
  if (mc.chart == ChartKind::line) return 2.0;
  double h = median_edge_length(mc);
  double lim = min_boundary_distance(mc, dist);
  double W = std::min(std::max(4.0 * dr, 8.0 * h), std::max(lim - r, dr));
  W = std::min(W, r);
  std::vector<std::pair<double, double>> dm;
  for (int v = 0; v < mc.vertex_count(); ++v) {
    double d = dist.dist[static_cast<std::size_t>(v)];
    if (d >= r - W && d < r + W) dm.push_back({d, mc.mass[static_cast<std::size_t>(v)]});
  }
  require(dm.size() >= 8, "ball_perimeter: too few vertices near radius " + format_double(r));
  std::sort(dm.begin(), dm.end());
  // quadratic least squares of the cumulative mass on a symmetric grid: the
  // odd and even moments decouple, so the centered slope is just T1/S2
  const int K = 32;
  double S2 = 0, T1 = 0;
  std::size_t cursor = 0;
  KahanSum cum;
  for (int k = 0; k <= K; ++k) {
    double s = r - W + 2.0 * W * k / K;
    while (cursor < dm.size() && dm[cursor].first < s) cum.add(dm[cursor++].second);
    double x = s - r;
    S2 += x * x;
    T1 += x * cum.value();
  }
  require(S2 > 0, "ball_perimeter: singular fit");
  return T1 / S2;
}
}  // namespace detail

inline double weiss_density(const MetricComplex& mc, const VectorField& u, const QField& q,
                            const DistanceField& dist, double r, double dr, int N, double tau) {
  check_shapes(mc, u);
  require(r > 0.0 && dr > 0.0, "weiss_density: need r, dr > 0");
  double h = median_edge_length(mc);
  require(dr >= 2.0 * h - 1e-12, "weiss_density: need dr >= 2h");
  require(min_boundary_distance(mc, dist) >= r + dr,
          "weiss_density: ball B_{r+dr} leaves the complex");
  KahanSum bulk;
  for (const Edge& e : mc.edges) {
    double mid = 0.5 * (dist.dist[static_cast<std::size_t>(e.i)] + dist.dist[static_cast<std::size_t>(e.j)]);
    double wgt = detail::smooth_ball_weight(mid, r, dr);
    if (wgt == 0.0) continue;
    double s = 0.0;
    for (int i = 0; i < u.m; ++i) s += sq(u.at(e.i, i) - u.at(e.j, i));
    bulk.add(wgt * e.w * s);
  }
  for (int v = 0; v < mc.vertex_count(); ++v) {
    if (!(u.norm_at(v) > tau)) continue;
    double wgt = detail::smooth_ball_weight(dist.dist[static_cast<std::size_t>(v)], r, dr);
    if (wgt > 0.0) bulk.add(wgt * mc.mass[static_cast<std::size_t>(v)] * q.at(v));
  }
  // boundary term: triangular-kernel shell mean of |u|^2 (the kernel's mesh
  // alignment factor cancels between numerator and denominator) times the
  // geometric ball perimeter
  KahanSum num, den;
  for (int v = 0; v < mc.vertex_count(); ++v) {
    double x = std::abs(dist.dist[static_cast<std::size_t>(v)] - r);
    if (x >= dr) continue;
    double k = (1.0 - x / dr) * mc.mass[static_cast<std::size_t>(v)];
    num.add(k * sq(u.norm_at(v)));
    den.add(k);
  }
  require(den.value() > 0.0, "weiss_density: empty shell at r = " + format_double(r) +
                                 " (refine the mesh or widen dr)");
  double boundary = (num.value() / den.value()) * detail::ball_perimeter(mc, dist, r, dr);
  double rn = std::pow(r, N);
  return bulk.value() / rn - boundary / (rn * r);
}

struct WeissProfile {
  int center = 0;
  int N = 0;
  std::vector<double> radii;
  std::vector<double> values;
  std::vector<double> widths;          // shell width per sample
  double monotonicity_defect = 0.0;    // max over j of max(0, W_j - W_{j+1})
};

inline WeissProfile weiss_profile(const MetricComplex& mc, const VectorField& u, const QField& q,
                                  const DistanceField& dist, const std::vector<double>& r_grid,
                                  int N, double tau, double dr_override = 0.0) {
  WeissProfile wp;
  wp.center = dist.source;
  wp.N = N;
  double h = median_edge_length(mc);
  for (std::size_t j = 0; j + 1 < r_grid.size(); ++j)
    require(r_grid[j] < r_grid[j + 1], "weiss_profile: radius grid must increase strictly");
  for (double r : r_grid) {
    double dr = dr_override > 0.0 ? dr_override : default_shell_width(h, r);
    double W = weiss_density(mc, u, q, dist, r, dr, N, tau);
    require(std::isfinite(W), "weiss_profile: non-finite sample");
    wp.radii.push_back(r);
    wp.widths.push_back(dr);
    wp.values.push_back(W);
  }
  for (std::size_t j = 0; j + 1 < wp.values.size(); ++j)
    wp.monotonicity_defect = std::max(wp.monotonicity_defect, wp.values[j] - wp.values[j + 1]);
  wp.monotonicity_defect = std::max(wp.monotonicity_defect, 0.0);
  return wp;
}

/// Nearest distance from the center of `dist` to the positivity interface.
inline double fb_distance(const MetricComplex& mc, const VectorField& u, double tau,
                          const DistanceField& dist) {
  PositivityMask pm = positivity_mask_view(u, tau);
  double d = kInf;
  for (const Edge& e : mc.edges)
    if (pm.at(e.i) != pm.at(e.j))
      d = std::min(d, std::min(dist.dist[static_cast<std::size_t>(e.i)], dist.dist[static_cast<std::size_t>(e.j)]));
  return d;
}

struct GrowthProfile {
  std::vector<double> radii;
  std::vector<double> sup_ratio;  // sup_{B_r}|u| / (sqrt(Qbar) r)
  double slope = 0.0;             // log-log fit of sup_{B_r}|u| against r
  bool trimmed = false;           // radii beyond the domain were dropped
};

/// Growth table at a free-boundary point: linear growth from above and
/// nondegeneracy from below both appear as sup_ratio ~ const and slope ~ 1.
inline GrowthProfile growth_profile(const MetricComplex& mc, const VectorField& u,
                                    const DistanceField& dist, const std::vector<double>& r_grid,
                                    double q_local, double tau) {
  check_shapes(mc, u);
  double h = median_edge_length(mc);
  require(fb_distance(mc, u, tau, dist) <= 2.0 * h + 1e-12,
          "growth_profile: center is not within h of the free boundary");
  GrowthProfile gp;
  double dmax = min_boundary_distance(mc, dist);
  std::vector<double> lr, ls;
  for (double r : r_grid) {
    if (r > dmax) {
      gp.trimmed = true;
      continue;
    }
    std::vector<int> b = ball(mc, dist, r);
    if (b.empty()) continue;
    double sup = sup_on(u, b);
    gp.radii.push_back(r);
    gp.sup_ratio.push_back(sup / (std::sqrt(q_local) * r));
    if (sup > 0.0) {
      lr.push_back(std::log(r));
      ls.push_back(std::log(sup));
    }
  }
  require(gp.radii.size() >= 2, "growth_profile: fewer than two usable radii");
  gp.slope = fit_slope(lr, ls);
  return gp;
}

struct DensityProfile {
  std::vector<double> radii;
  std::vector<double> positive;  // mu(B_r and {|u|>0}) / mu(B_r)
  std::vector<double> zero;      // complementary ratio
  bool trimmed = false;
};

inline DensityProfile density_profile(const MetricComplex& mc, const VectorField& u,
                                      const DistanceField& dist, const std::vector<double>& r_grid,
                                      double tau) {
  check_shapes(mc, u);
  PositivityMask pm = positivity_mask_view(u, tau);
  DensityProfile dp;
  double dmax = min_boundary_distance(mc, dist);
  for (double r : r_grid) {
    if (r > dmax) {
      dp.trimmed = true;
      continue;
    }
    KahanSum tot, pos;
    for (int v = 0; v < mc.vertex_count(); ++v) {
      if (dist.dist[static_cast<std::size_t>(v)] >= r) continue;
      tot.add(mc.mass[static_cast<std::size_t>(v)]);
      if (pm.at(v)) pos.add(mc.mass[static_cast<std::size_t>(v)]);
    }
    if (tot.value() <= 0.0) continue;
    dp.radii.push_back(r);
    double ratio = pos.value() / tot.value();
    dp.positive.push_back(ratio);
    dp.zero.push_back(1.0 - ratio);
  }
  require(!dp.radii.empty(), "density_profile: no usable radii");
  return dp;
}

/// Total dual-edge weight of mask-crossing edges.
inline double perimeter_estimate(const MetricComplex& mc, const PositivityMask& mask) {
  KahanSum per;
  for (const Edge& e : mc.edges)
    if (mask.at(e.i) != mask.at(e.j)) per.add(e.per);
  return per.value();
}

/// Crossing perimeter restricted to edges with both endpoints in B_r.
inline double local_perimeter(const MetricComplex& mc, const PositivityMask& mask,
                              const DistanceField& dist, double r) {
  KahanSum per;
  for (const Edge& e : mc.edges) {
    if (dist.dist[static_cast<std::size_t>(e.i)] >= r || dist.dist[static_cast<std::size_t>(e.j)] >= r) continue;
    if (mask.at(e.i) != mask.at(e.j)) per.add(e.per);
  }
  return per.value();
}

struct ElDensity {
  std::vector<double> q;  // per-component Laplacian density on the cut
  double defect = 0.0;    // | sum q_i^2 - Q(x0) | / Q(x0)
};

/// Euler-Lagrange densities: the Laplacian measure of each component summed
/// over B_r, normalized by the local cut perimeter; their squares should sum
/// to the local weight Q.
inline ElDensity el_density(const MetricComplex& mc, const VectorField& u, const QField& q,
                            const DistanceField& dist, double r, double tau) {
  check_shapes(mc, u);
  PositivityMask pm = positivity_mask_view(u, tau);
  double per = local_perimeter(mc, pm, dist, r);
  require(per > 0.0, "el_density: ball does not meet the free boundary (zero local perimeter)");
  LaplacianMeasure lm = laplacian_measure(mc, u);
  ElDensity out;
  out.q.assign(static_cast<std::size_t>(u.m), 0.0);
  for (int i = 0; i < u.m; ++i) {
    KahanSum flux;
    for (int v = 0; v < mc.vertex_count(); ++v)
      if (dist.dist[static_cast<std::size_t>(v)] < r) flux.add(lm.at(v, i));
    out.q[static_cast<std::size_t>(i)] = flux.value() / per;
  }
  double s = 0.0;
  for (double x : out.q) s += sq(x);
  double q0 = q.at(dist.source);
  out.defect = std::abs(s - q0) / q0;
  return out;
}

/// Flat-space mean value identity: mean_{B_R} u - u(x0) should equal
/// (1/2) int_0^R s^-1 mean_{B_s} <grad u, grad rho^2> ds, with the pairing
/// discretized edgewise as w (du)(d rho^2). Requires u subharmonic (analyst
/// Laplacian >= -tol at interior vertices).
inline double mean_value_check(const MetricComplex& mc, const std::vector<double>& u,
                               const DistanceField& dist, double R, int n_grid,
                               double subharmonic_tol = 1e-7) {
  require(u.size() == static_cast<std::size_t>(mc.vertex_count()), "mean_value_check: size mismatch");
  require(R > 0.0 && n_grid >= 8, "mean_value_check: need R > 0 and >= 8 grid points");
  {
    VectorField uf;
    uf.m = 1;
    uf.vertices = mc.vertex_count();
    uf.values = u;
    uf.boundary_data.assign(mc.boundary.size(), 0.0);
    LaplacianMeasure lm = laplacian_measure(mc, uf);
    double scale = 0.0;
    for (const Edge& e : mc.edges) scale = std::max(scale, e.w);
    for (int v = 0; v < mc.vertex_count(); ++v)
      if (!mc.is_boundary(v))
        require(lm.at(v, 0) >= -subharmonic_tol * std::max(1.0, scale),
                "mean_value_check: field is not subharmonic");
  }
  std::vector<double> rho2(u.size());
  for (std::size_t v = 0; v < u.size(); ++v) rho2[v] = sq(dist.dist[v]);
  double h = median_edge_length(mc);
  // mean of u over B_R, ball indicator mollified at the mesh scale so the
  // ring staircase does not leak into the residual
  double drR = 2.0 * h;
  KahanSum num, den;
  for (int v = 0; v < mc.vertex_count(); ++v) {
    double wgt = detail::smooth_ball_weight(dist.dist[static_cast<std::size_t>(v)], R, drR);
    if (wgt > 0.0) {
      num.add(wgt * mc.mass[static_cast<std::size_t>(v)] * u[static_cast<std::size_t>(v)]);
      den.add(wgt * mc.mass[static_cast<std::size_t>(v)]);
    }
  }
  require(den.value() > 0.0, "mean_value_check: empty ball");
  double lhs = num.value() / den.value();
  // trapezoid of s^-1 * mean_{B_s} <grad u, grad rho^2> with the same
  // mollified ball weights
  std::vector<double> integrand(static_cast<std::size_t>(n_grid) + 1, 0.0);
  for (int k = 1; k <= n_grid; ++k) {
    double s = R * static_cast<double>(k) / static_cast<double>(n_grid);
    double drs = std::min(2.0 * h, 0.5 * s);
    KahanSum pair, mass;
    for (const Edge& e : mc.edges) {
      double mid = 0.5 * (dist.dist[static_cast<std::size_t>(e.i)] + dist.dist[static_cast<std::size_t>(e.j)]);
      double wgt = detail::smooth_ball_weight(mid, s, drs);
      if (wgt == 0.0) continue;
      pair.add(wgt * e.w * (u[static_cast<std::size_t>(e.i)] - u[static_cast<std::size_t>(e.j)]) *
               (rho2[static_cast<std::size_t>(e.i)] - rho2[static_cast<std::size_t>(e.j)]));
    }
    for (int v = 0; v < mc.vertex_count(); ++v) {
      double wgt = detail::smooth_ball_weight(dist.dist[static_cast<std::size_t>(v)], s, drs);
      if (wgt > 0.0) mass.add(wgt * mc.mass[static_cast<std::size_t>(v)]);
    }
    integrand[static_cast<std::size_t>(k)] = mass.value() > 0.0 ? pair.value() / (s * mass.value()) : 0.0;
  }
  KahanSum rhs;
  double ds = R / static_cast<double>(n_grid);
  for (int k = 0; k < n_grid; ++k)
    rhs.add(0.5 * ds * (integrand[static_cast<std::size_t>(k)] + integrand[static_cast<std::size_t>(k) + 1]));
  double u0 = u[static_cast<std::size_t>(dist.source)];
  return std::abs(lhs - u0 - 0.5 * rhs.value()) / std::max(lhs, 1e-30);
}

/// Deviation of a field on a cone from exact 1-homogeneity: compares |u|(r,
/// theta) against (r / r_ref) |u|(r_ref, theta) with the reference ring value
/// interpolated radially along each mesh ray.
inline double homogeneity_defect(const MetricComplex& mc, const VectorField& u, double tau,
                                 double r_ref = 0.0) {
  check_shapes(mc, u);
  require(mc.chart == ChartKind::cone, "homogeneity_defect: complex was not built by build_cone");
  // recover the (nr, ntheta) layout: vertex 0 is the apex, rings follow
  int n = mc.vertex_count() - 1;
  int ntheta = 0;
  for (int v = 1; v <= n; ++v) {
    if (std::abs(mc.coords[static_cast<std::size_t>(v)][0] - mc.coords[1][0]) > 1e-12) break;
    ++ntheta;
  }
  require(ntheta >= 8 && n % ntheta == 0, "homogeneity_defect: cone layout not recognized");
  int nr = n / ntheta;
  auto id = [ntheta](int i, int j) { return 1 + (i - 1) * ntheta + j; };
  double dr = mc.coords[1][0];
  if (r_ref <= 0.0) r_ref = 0.5 * dr * static_cast<double>(nr);
  // reference ring by linear interpolation in radius along each ray
  int k = std::clamp(static_cast<int>(std::floor(r_ref / dr)), 1, nr - 1);
  double t = (r_ref - dr * static_cast<double>(k)) / dr;
  double defect = 0.0;
  for (int j = 0; j < ntheta; ++j) {
    double ref = (1.0 - t) * u.norm_at(id(k, j)) + t * u.norm_at(id(k + 1, j));
    for (int i = 1; i <= nr; ++i) {
      double r = dr * static_cast<double>(i);
      double scale = r / r_ref;
      double expect = scale * ref;
      double err = std::abs(u.norm_at(id(i, j)) - expect) / std::max(scale * std::max(ref, tau), tau);
      defect = std::max(defect, err);
    }
  }
  return defect;
}

struct BlowupResult {
  MetricComplex complex;   // unit-scale refined chart of B_r(x0)
  VectorField u;           // re-solved blow-up candidate
  EnergyReport energy;
  bool converged = false;
};

/// Builds a refined unit-disc (or unit-cone) chart of B_r(x0), transfers
/// r^-1 u as rim data through annulus-averaged sector traces, re-solves the
/// minimization there and returns the blow-up candidate.
inline BlowupResult blowup_rescale(const MetricComplex& mc, const VectorField& u, const QField& q,
                                   int x0, double r, int nr_new, int ntheta_new,
                                   const SolveConfig& cfg) {
  check_shapes(mc, u);
  require(r > 0.0, "blowup_rescale: need r > 0");
  DistanceField dist = geodesic_distances(mc, x0);
  require(min_boundary_distance(mc, dist) >= 2.0 * r || mc.boundary.empty(),
          "blowup_rescale: B_{2r}(x0) leaves the domain");

  double angle;
  std::function<double(int)> vertex_angle;
  if (mc.chart == ChartKind::cone && x0 == 0) {
    angle = mc.cone_angle;
    vertex_angle = [&mc](int v) { return mc.coords[static_cast<std::size_t>(v)][1]; };
  } else if (mc.chart == ChartKind::plane ||
             (mc.chart == ChartKind::cone && mc.cone_angle > 2.0 * 3.141592653589793 - 1e-9)) {
    angle = 2.0 * 3.14159265358979323846;
    auto p0 = mc.coords[static_cast<std::size_t>(x0)];
    vertex_angle = [&mc, p0, angle](int v) {
      auto p = mc.coords[static_cast<std::size_t>(v)];
      double a = std::atan2(p[1] - p0[1], p[0] - p0[0]);
      return a < 0.0 ? a + angle : a;
    };
  } else {
    throw Error("blowup_rescale: supported charts are flat domains and cone apexes");
  }

  BlowupResult out;
  out.complex = build_cone(angle, nr_new, ntheta_new, 1.0);
  VectorField g = make_field(out.complex, u.m);
  double dth = angle / static_cast<double>(ntheta_new);
  double h = median_edge_length(mc);
  // annulus-averaged sector traces (pointwise nearest-neighbor transfer
  // injects O(1) high-frequency error that the re-solve cannot remove)
  for (std::size_t b = 0; b < out.complex.boundary.size(); ++b) {
    int rim = out.complex.boundary[b];
    double theta = out.complex.coords[static_cast<std::size_t>(rim)][1];
    double band = std::max(2.0 * h, 0.05 * r);
    double halfsector = 0.5 * dth;
    for (int attempt = 0; attempt < 12; ++attempt) {
      std::vector<KahanSum> acc(static_cast<std::size_t>(u.m));
      double wsum = 0.0;
      for (int v = 0; v < mc.vertex_count(); ++v) {
        double d = dist.dist[static_cast<std::size_t>(v)];
        if (d < r - band || d > r) continue;
        double a = std::abs(vertex_angle(v) - theta);
        a = std::min(a, angle - a);
        if (a > halfsector) continue;
        double w = mc.mass[static_cast<std::size_t>(v)];
        for (int i = 0; i < u.m; ++i) acc[static_cast<std::size_t>(i)].add(w * u.at(v, i));
        wsum += w;
      }
      if (wsum > 0.0) {
        for (int i = 0; i < u.m; ++i)
          g.boundary_data[b * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(i)] =
              std::max(acc[static_cast<std::size_t>(i)].value() / wsum / r, 0.0);
        break;
      }
      band *= 1.5;
      halfsector *= 1.5;
    }
  }
  impose_boundary(out.complex, g);
  QField q0 = make_qfield(out.complex, q.at(x0));
  SolveResult sr = solve_relaxed(out.complex, q0, g, cfg);
  out.u = sr.u;
  out.energy = sr.energy;
  out.converged = sr.converged;
  return out;
}

}  // namespace bernoulli
