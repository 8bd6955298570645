#include <catch2/catch_amalgamated.hpp>

#include "bernoulli/energy.hpp"

using namespace bernoulli;

namespace {
constexpr double kPi = 3.14159265358979323846;

// 1D kink profile u = g0 (1 - x/a)^+ sampled on a chain; closed-form energy
// g0^2/a + Q (a - h/2) when a is a grid point (endpoint mass is halved).
double kink_energy_expected(double g0, double a, double q, double h) {
  return g0 * g0 / a + q * (a - 0.5 * h);
}

VectorField kink_field(const MetricComplex& mc, double g0, double a) {
  VectorField u = make_field(mc, 1);
  for (int v = 0; v < mc.vertex_count(); ++v)
    u.at(v, 0) = g0 * std::max(1.0 - mc.coords[v][0] / a, 0.0);
  u.boundary_data = {g0, 0.0};
  return u;
}
}  // namespace

TEST_CASE("energy report: zero field, closed forms, additivity") {
  MetricComplex mc = build_interval(101, 2.0);
  QField q = make_qfield(mc, 4.0);

  SECTION("zero field has zero total") {
    VectorField u = make_field(mc, 1);
    EnergyReport rep = energy(mc, u, q, 1e-12);
    CHECK(rep.total == 0.0);
    CHECK(rep.dirichlet == 0.0);
    CHECK(rep.bulk == 0.0);
  }
  SECTION("1D kink matches 1/a + Q a") {
    double h = 0.02;
    for (double a : {0.5, 0.3, 0.8}) {
      VectorField u = kink_field(mc, 1.0, a);
      EnergyReport rep = energy(mc, u, q, 1e-12);
      CHECK(rep.total == Catch::Approx(kink_energy_expected(1.0, a, 4.0, h)).epsilon(1e-12));
      CHECK(rep.total == rep.dirichlet + rep.bulk);
    }
  }
  SECTION("dirichlet is additive over components") {
    VectorField u = make_field(mc, 2);
    VectorField a = make_field(mc, 1), b = make_field(mc, 1);
    Rng rng(3);
    auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (int v = 0; v < mc.vertex_count(); ++v) {
      u.at(v, 0) = a.at(v, 0) = uniform();
      u.at(v, 1) = b.at(v, 0) = uniform();
    }
    CHECK(dirichlet_energy(mc, u) ==
          Catch::Approx(dirichlet_energy(mc, a) + dirichlet_energy(mc, b)).epsilon(1e-12));
  }
}

TEST_CASE("slab minimizer energy on the product of a chain with the glued surface") {
  MetricComplex line = build_interval(41, 2.0);
  MetricComplex fiber = build_doubled_triangle(1.0, 8);
  MetricComplex prod = build_product(line, fiber);
  QField q = make_qfield(prod, 1.0);
  int nf = fiber.vertex_count();
  VectorField u = make_field(prod, 1);
  for (int v = 0; v < prod.vertex_count(); ++v)
    u.at(v, 0) = std::max(line.coords[v / nf][0] - 1.0, 0.0);
  for (std::size_t b = 0; b < prod.boundary.size(); ++b)
    u.boundary_data[b] = std::max(prod.coords[prod.boundary[b]][0] - 1.0, 0.0);
  EnergyReport rep = energy(prod, u, q, 1e-12);
  double muY = fiber.total_mass();
  double h = 0.05;
  // dirichlet = mu(Y) exactly; bulk = mu(Y) * (1 - h/2) (half vertex at the kink line)
  CHECK(rep.dirichlet == Catch::Approx(muY).epsilon(1e-12));
  CHECK(rep.bulk == Catch::Approx(muY * (1.0 - 0.5 * h)).epsilon(1e-12));
  // refinement target: total -> sqrt(3)
  CHECK(rep.total == Catch::Approx(std::sqrt(3.0)).epsilon(0.05));
}

TEST_CASE("relaxed energy: saturation and monotone convergence from below") {
  MetricComplex mc = build_interval(51, 1.0);
  QField q = make_qfield(mc, 2.0);
  SECTION("zero field") {
    VectorField u = make_field(mc, 1);
    CHECK(relaxed_energy(mc, u, q, 0.5) == 0.0);
  }
  SECTION("fields clear of (0, eps) saturate the clamp") {
    VectorField u = kink_field(mc, 1.0, 0.5);
    // values are either 0 or >= the first ramp step 1/25 = 0.04
    double eps = 0.03;
    EnergyReport exact = energy(mc, u, q, 0.0);
    CHECK(relaxed_energy(mc, u, q, eps) == Catch::Approx(exact.total).epsilon(1e-13));
    CHECK(relaxed_energy(mc, u, q, eps / 2) == Catch::Approx(exact.total).epsilon(1e-13));
  }
  SECTION("monotone from below as eps decreases") {
    VectorField u = kink_field(mc, 1.0, 0.62);
    double prev = relaxed_energy(mc, u, q, 0.8);
    double exact = energy(mc, u, q, 0.0).total;
    for (double eps = 0.4; eps > 1e-4; eps *= 0.5) {
      double cur = relaxed_energy(mc, u, q, eps);
      CHECK(cur >= prev - 1e-13);
      CHECK(cur <= exact + 1e-13);
      prev = cur;
    }
  }
}

TEST_CASE("truncation competitor") {
  MetricComplex mc = build_interval(21, 1.0);
  VectorField u = make_field(mc, 2);
  for (int v = 0; v < mc.vertex_count(); ++v) {
    u.at(v, 0) = 1.0;
    u.at(v, 1) = 0.5;
  }
  u.boundary_data = {1.0, 0.5, 1.0, 0.5};
  std::vector<double> phi(static_cast<std::size_t>(mc.vertex_count()), 1.0);
  phi[0] = phi[static_cast<std::size_t>(mc.vertex_count() - 1)] = 0.0;

  SECTION("delta phi = 0 leaves the field unchanged") {
    std::vector<double> zero(static_cast<std::size_t>(mc.vertex_count()), 0.0);
    VectorField v = competitor_truncate(mc, u, zero, 1.0, 0);
    CHECK(v.values == u.values);
  }
  SECTION("full truncation zeroes the component in the interior") {
    VectorField v = competitor_truncate(mc, u, phi, 2.0, 0);
    for (int w = 1; w + 1 < mc.vertex_count(); ++w) {
      CHECK(v.at(w, 0) == 0.0);
      CHECK(v.at(w, 1) == 0.5);  // other components untouched
    }
  }
  SECTION("positivity set can only shrink") {
    Rng rng(5);
    auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (int trial = 0; trial < 20; ++trial) {
      VectorField w = make_field(mc, 2);
      for (double& x : w.values) x = uniform() < 0.4 ? 0.0 : uniform();
      impose_boundary(mc, w);
      std::vector<double> p(static_cast<std::size_t>(mc.vertex_count()));
      for (double& x : p) x = uniform();
      p[0] = p[static_cast<std::size_t>(mc.vertex_count() - 1)] = 0.0;
      VectorField t = competitor_truncate(mc, w, p, 0.1 + uniform(), trial % 2);
      PositivityMask before = positivity_mask_view(w, 1e-12);
      PositivityMask after = positivity_mask_view(t, 1e-12);
      for (int vv = 0; vv < mc.vertex_count(); ++vv)
        if (after.at(vv)) CHECK(before.at(vv));
    }
  }
  SECTION("preconditions") {
    CHECK_THROWS_AS(competitor_truncate(mc, u, phi, -1.0, 0), Error);
    std::vector<double> bad(static_cast<std::size_t>(mc.vertex_count()), 1.0);
    CHECK_THROWS_AS(competitor_truncate(mc, u, bad, 1.0, 0), Error);  // nonzero on boundary
  }
}

TEST_CASE("comparison function and psi_theta closed forms") {
  SECTION("endpoint normalization") {
    for (int N : {2, 3, 5})
      for (double theta : {0.25, 0.5}) {
        CHECK(psi_theta_value(theta, theta, N, 0.0) == 0.0);
        CHECK(psi_theta_value(1.0, theta, N, 0.0) == 1.0);
        CHECK(psi_theta_value(theta / 2, theta, N, 0.0) == 0.0);
      }
  }
  SECTION("N = 2: ratio of logarithms") {
    double theta = std::exp(-1.0);
    CHECK(psi_theta_value(std::exp(-0.5), theta, 2, 0.0) == Catch::Approx(0.5).epsilon(1e-14));
  }
  SECTION("N = 3: rational closed form") {
    // phi(s) = 1 - 1/s, theta = 1/2: psi(3/4) = (phi(3/4)-phi(1/2)) / (0-phi(1/2)) = 2/3
    CHECK(psi_theta_value(0.75, 0.5, 3, 0.0) == Catch::Approx(2.0 / 3.0).epsilon(1e-14));
  }
  SECTION("K < 0 quadrature matches a dense Simpson reference") {
    int N = 3;
    double K = -2.0;
    double kappa = K / (N - 1);
    auto f = [&](double t) {
      return std::pow(std::sinh(std::sqrt(-kappa) * t) / std::sqrt(-kappa), 1.0 - N);
    };
    for (double s : {0.3, 0.55, 0.9}) {
      int n = 20000;
      KahanSum ref;  // composite Simpson on [s, 1]
      double hh = (1.0 - s) / n;
      for (int k = 0; k < n; ++k) {
        double a = s + k * hh;
        ref.add(hh / 6.0 * (f(a) + 4.0 * f(a + 0.5 * hh) + f(a + hh)));
      }
      CHECK(comparison_phi(s, N, K) == Catch::Approx(-ref.value()).margin(1e-9));
    }
  }
}

TEST_CASE("cutoff competitor") {
  MetricComplex mc = build_cone(2.0 * kPi, 24, 48, 1.0);
  DistanceField dist = geodesic_distances(mc, 0);
  VectorField u = make_field(mc, 1);
  for (int v = 0; v < mc.vertex_count(); ++v) u.at(v, 0) = 0.2 + mc.coords[v][0];
  for (std::size_t b = 0; b < mc.boundary.size(); ++b) u.boundary_data[b] = 1.2;

  CompetitorProfile prof = psi_theta(mc, dist, 0, 0.5, 0.25, 2, 0.0);
  SECTION("profile invariants: zero inside, one outside, monotone") {
    for (int v = 0; v < mc.vertex_count(); ++v) {
      double d = dist.dist[v];
      if (d <= 0.125) CHECK(prof.multiplier[v] == 0.0);
      if (d >= 0.5) CHECK(prof.multiplier[v] == 1.0);
    }
  }
  SECTION("competitor vanishes on the inner ball, unchanged outside") {
    double M = sup_on(u, ball(mc, dist, 0.5));
    VectorField v = cutoff_competitor(mc, u, prof, M);
    for (int w = 0; w < mc.vertex_count(); ++w) {
      if (dist.dist[w] <= 0.125) CHECK(v.at(w, 0) == 0.0);
      if (dist.dist[w] >= 0.5) CHECK(v.at(w, 0) == u.at(w, 0));
    }
    PositivityMask before = positivity_mask_view(u, 1e-12);
    PositivityMask after = positivity_mask_view(v, 1e-12);
    for (int w = 0; w < mc.vertex_count(); ++w)
      if (after.at(w)) CHECK(before.at(w));
  }
  SECTION("zero field stays zero") {
    VectorField z = make_field(mc, 1);
    VectorField v = cutoff_competitor(mc, z, prof, 0.0);
    CHECK(v.values == z.values);
  }
  SECTION("theta outside (0,1) rejected") {
    CHECK_THROWS_AS(psi_theta(mc, dist, 0, 0.5, 1.5, 2, 0.0), Error);
  }
}
