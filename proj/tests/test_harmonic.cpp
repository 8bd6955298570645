#include <catch2/catch_amalgamated.hpp>

#include "bernoulli/harmonic.hpp"

using namespace bernoulli;

TEST_CASE("solve_dirichlet: constants, 1D affine, failure modes") {
  MetricComplex mc = build_interval(41, 2.0);
  SECTION("constant data extends to the constant") {
    DirichletProblem p;
    p.complex = &mc;
    p.fixed = {0, 40};
    p.fixed_values = {2.5, 2.5};
    std::vector<double> u = solve_dirichlet(p);
    for (double x : u) CHECK(x == Catch::Approx(2.5).margin(1e-9));
  }
  SECTION("endpoint data 0,1 gives the affine ramp") {
    DirichletProblem p;
    p.complex = &mc;
    p.fixed = {0, 40};
    p.fixed_values = {0.0, 1.0};
    std::vector<double> u = solve_dirichlet(p);
    for (int v = 0; v < 41; ++v) CHECK(u[v] == Catch::Approx(v / 40.0).margin(1e-9));
  }
  SECTION("no fixed vertices is rejected") {
    DirichletProblem p;
    p.complex = &mc;
    CHECK_THROWS_AS(solve_dirichlet(p), Error);
  }
}

TEST_CASE("maximum principle on random Dirichlet problems") {
  Rng rng(2024);
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  MetricComplex shapes[] = {build_rectangle(9, 11, 1.0, 1.5), build_cone(4.0, 10, 24, 1.0)};
  for (const MetricComplex& mc : shapes) {
    for (int trial = 0; trial < 10; ++trial) {
      DirichletProblem p;
      p.complex = &mc;
      double lo = kInf, hi = -kInf;
      for (int b : mc.boundary) {
        p.fixed.push_back(b);
        double val = uniform() * 3.0;
        p.fixed_values.push_back(val);
        lo = std::min(lo, val);
        hi = std::max(hi, val);
      }
      std::vector<double> u = solve_dirichlet(p);
      for (double x : u) {
        CHECK(x >= lo - 1e-8);
        CHECK(x <= hi + 1e-8);
      }
    }
  }
}

TEST_CASE("discrete integration by parts is exact") {
  Rng rng(99);
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  MetricComplex mc = build_product(build_interval(9, 1.0), build_doubled_triangle(1.0, 4));
  for (int trial = 0; trial < 10; ++trial) {
    VectorField u = make_field(mc, 1), phi = make_field(mc, 1);
    for (int v = 0; v < mc.vertex_count(); ++v) {
      u.at(v, 0) = uniform();
      phi.at(v, 0) = uniform();
    }
    LaplacianMeasure lm = laplacian_measure(mc, u);
    KahanSum lhs;  // sum_v phi_v (raw Lu)_v with raw = -analyst
    for (int v = 0; v < mc.vertex_count(); ++v) lhs.add(phi.at(v, 0) * -lm.at(v, 0));
    KahanSum rhs;
    for (const Edge& e : mc.edges)
      rhs.add(e.w * (phi.at(e.i, 0) - phi.at(e.j, 0)) * (u.at(e.i, 0) - u.at(e.j, 0)));
    double scale = std::max({std::abs(lhs.value()), std::abs(rhs.value()), 1.0});
    CHECK(std::abs(lhs.value() - rhs.value()) <= 1e-12 * scale);
  }
}

TEST_CASE("laplacian measure: affine interior zero and kink flux") {
  SECTION("affine field on a flat mesh has zero interior Laplacian") {
    MetricComplex mc = build_rectangle(13, 13, 1.0, 1.0);
    VectorField u = make_field(mc, 1);
    for (int v = 0; v < mc.vertex_count(); ++v)
      u.at(v, 0) = 0.7 * mc.coords[v][0] - 0.2 * mc.coords[v][1];
    LaplacianMeasure lm = laplacian_measure(mc, u);
    for (int v = 0; v < mc.vertex_count(); ++v)
      if (!mc.is_boundary(v)) CHECK(std::abs(lm.at(v, 0)) <= 1e-10);
  }
  SECTION("1D kink: single analyst-sign spike of height 1/a") {
    MetricComplex mc = build_interval(41, 2.0);  // h = 0.05, kink at 0.5 on-grid
    double a = 0.5;
    VectorField u = make_field(mc, 1);
    for (int v = 0; v < mc.vertex_count(); ++v)
      u.at(v, 0) = std::max(1.0 - mc.coords[v][0] / a, 0.0);
    LaplacianMeasure lm = laplacian_measure(mc, u);
    int kink = 10;  // x = 0.5
    CHECK(lm.at(kink, 0) == Catch::Approx(1.0 / a).epsilon(1e-12));
    for (int v = 1; v + 1 < mc.vertex_count(); ++v)
      if (v != kink) CHECK(std::abs(lm.at(v, 0)) <= 1e-12);
  }
  SECTION("zero field has zero measure") {
    MetricComplex mc = build_interval(11, 1.0);
    VectorField u = make_field(mc, 1);
    LaplacianMeasure lm = laplacian_measure(mc, u);
    for (double x : lm.values) CHECK(x == 0.0);
  }
}

TEST_CASE("solve output is the unique energy minimizer") {
  MetricComplex mc = build_rectangle(7, 7, 1.0, 1.0);
  DirichletProblem p;
  p.complex = &mc;
  for (int b : mc.boundary) {
    p.fixed.push_back(b);
    p.fixed_values.push_back(mc.coords[b][0] + 0.1);
  }
  std::vector<double> u = solve_dirichlet(p);
  VectorField uf = make_field(mc, 1);
  for (int v = 0; v < mc.vertex_count(); ++v) uf.at(v, 0) = u[v];
  double base = dirichlet_energy(mc, uf);
  for (int v = 0; v < mc.vertex_count(); ++v) {
    if (mc.is_boundary(v)) continue;
    for (double delta : {1e-3, -1e-3}) {
      VectorField pert = uf;
      pert.at(v, 0) += delta;
      CHECK(dirichlet_energy(mc, pert) > base);
    }
  }
}

TEST_CASE("cheng-yau ratio") {
  SECTION("constants give zero") {
    MetricComplex mc = build_rectangle(9, 9, 1.0, 1.0);
    std::vector<double> u(static_cast<std::size_t>(mc.vertex_count()), 2.0);
    int c = 4 * 9 + 4;
    DistanceField d = geodesic_distances(mc, c);
    CHECK(cheng_yau_ratio(mc, u, d, 0.4) == 0.0);
  }
  SECTION("1 + x on the unit interval: sup over the half ball is 0.8") {
    MetricComplex mc = build_interval(41, 1.0);  // 0.25 on-grid
    std::vector<double> u(41);
    for (int v = 0; v < 41; ++v) u[v] = 1.0 + mc.coords[v][0];
    DistanceField d = geodesic_distances(mc, 20);
    // harmonic on B_R(1/2) with R = 1/2; sup_{B_{R/2}} |u'|/u = 1/u(1/4) = 0.8
    double ratio = cheng_yau_ratio(mc, u, d, 0.5);
    CHECK(ratio == Catch::Approx(0.5 * 0.8).epsilon(1e-12));
  }
  SECTION("nonpositive fields are rejected") {
    MetricComplex mc = build_interval(11, 1.0);
    std::vector<double> u(11, 1.0);
    u[5] = 0.0;
    DistanceField d = geodesic_distances(mc, 5);
    CHECK_THROWS_AS(cheng_yau_ratio(mc, u, d, 0.3), Error);
  }
  SECTION("empirical bound over a flat harmonic suite stays below 4") {
    MetricComplex mc = build_rectangle(17, 17, 1.0, 1.0);
    int c = 8 * 17 + 8;
    DistanceField d = geodesic_distances(mc, c);
    double worst = 0.0;
    Rng rng(5);
    auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (int trial = 0; trial < 8; ++trial) {
      DirichletProblem p;
      p.complex = &mc;
      for (int b : mc.boundary) {
        p.fixed.push_back(b);
        p.fixed_values.push_back(1.0 + uniform());  // positive data in [1,2]
      }
      std::vector<double> u = solve_dirichlet(p);
      worst = std::max(worst, cheng_yau_ratio(mc, u, d, 0.45, 1e-6));
    }
    CHECK(worst > 0.0);
    CHECK(worst <= 4.0);
  }
}

TEST_CASE("harnack ratio of positive harmonic fields converges under refinement") {
  // max/min over a fixed ball for positive harmonic data: finite, bounded by
  // the continuum value, and the gap to it shrinks as the mesh refines (the
  // discrete ball fills up from inside, so the ratio approaches from below)
  double continuum = 1.7 / 1.3;  // u = 1 + x on B_{0.2}(0.5, 0.5)
  double prev_gap = kInf;
  for (int n : {9, 17, 33}) {
    MetricComplex mc = build_rectangle(n, n, 1.0, 1.0);
    DirichletProblem p;
    p.complex = &mc;
    for (int b : mc.boundary) {
      p.fixed.push_back(b);
      p.fixed_values.push_back(1.0 + mc.coords[b][0]);
    }
    std::vector<double> u = solve_dirichlet(p);
    int c = (n / 2) * n + n / 2;
    DistanceField d = geodesic_distances(mc, c);
    double lo = kInf, hi = 0.0;
    for (int v = 0; v < mc.vertex_count(); ++v)
      if (d.dist[v] < 0.2) {
        lo = std::min(lo, u[v]);
        hi = std::max(hi, u[v]);
      }
    double ratio = hi / lo;
    CHECK(ratio >= 1.0);
    CHECK(ratio <= continuum + 1e-9);
    double gap = std::abs(ratio - continuum);
    CHECK(gap <= prev_gap + 1e-9);
    prev_gap = gap;
  }
}
