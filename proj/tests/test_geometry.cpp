#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "bernoulli/energy.hpp"

using namespace bernoulli;

namespace {
constexpr double kPi = 3.14159265358979323846;

VectorField scalar_field(const MetricComplex& mc, const std::function<double(int)>& f) {
  VectorField u = make_field(mc, 1);
  for (int v = 0; v < mc.vertex_count(); ++v) u.at(v, 0) = f(v);
  return u;
}
}  // namespace

TEST_CASE("interval builder masses and conductances") {
  MetricComplex mc = build_interval(3, 2.0);
  CHECK(mc.mass[0] == Catch::Approx(0.5));
  CHECK(mc.mass[1] == Catch::Approx(1.0));
  CHECK(mc.mass[2] == Catch::Approx(0.5));
  REQUIRE(mc.edge_count() == 2);
  CHECK(mc.edges[0].w == Catch::Approx(1.0));
  CHECK(mc.edges[1].w == Catch::Approx(1.0));
  CHECK(mc.edges[0].per == 1.0);

  MetricComplex fine = build_interval(101, 2.0);
  CHECK(fine.total_mass() == Catch::Approx(2.0).epsilon(1e-14));

  // dirichlet energy of the affine ramp u = x on [0,1] with 5 vertices:
  // 4 edges, w = 4, du = 0.25 each, total = 4 * 4 * 0.0625 = 1
  MetricComplex five = build_interval(5, 1.0);
  VectorField u = scalar_field(five, [&](int v) { return five.coords[v][0]; });
  CHECK(dirichlet_energy(five, u) == Catch::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(build_interval(2, 1.0), Error);
  CHECK_THROWS_AS(build_interval(10, -1.0), Error);
}

TEST_CASE("rectangle builder: partition of area and affine exactness") {
  MetricComplex mc = build_rectangle(3, 3, 1.0, 1.0);
  CHECK(mc.total_mass() == Catch::Approx(1.0).epsilon(1e-14));

  MetricComplex fine = build_rectangle(17, 17, 1.0, 1.0);
  SECTION("u = x has unit Dirichlet energy") {
    VectorField u = scalar_field(fine, [&](int v) { return fine.coords[v][0]; });
    CHECK(dirichlet_energy(fine, u) == Catch::Approx(1.0).epsilon(1e-10));
  }
  SECTION("generic affine fields are exact") {
    VectorField u = scalar_field(
        fine, [&](int v) { return 0.3 * fine.coords[v][0] - 1.7 * fine.coords[v][1] + 0.4; });
    // lx*ly*|grad|^2 = 0.09 + 2.89
    CHECK(dirichlet_energy(fine, u) == Catch::Approx(2.98).epsilon(1e-10));
  }
  SECTION("constants have zero energy") {
    VectorField u = scalar_field(fine, [](int) { return 3.25; });
    CHECK(dirichlet_energy(fine, u) == 0.0);
  }
  SECTION("all surviving conductances are positive") {
    for (const Edge& e : fine.edges) CHECK(e.w > 0.0);
  }
  CHECK_THROWS_AS(build_rectangle(2, 3, 1.0, 1.0), Error);
  CHECK_THROWS_AS(build_rectangle(3, 3, 0.0, 1.0), Error);
}

TEST_CASE("cone builder: mass, apex balls, flat control") {
  SECTION("quarter-turn-deficit cone mass a r^2 / 2") {
    MetricComplex mc = build_cone(kPi, 64, 128, 1.0);
    CHECK(mc.total_mass() == Catch::Approx(kPi / 2.0).margin(1e-3));
  }
  SECTION("apex ball measure follows the cone area formula") {
    MetricComplex mc = build_cone(kPi, 64, 128, 1.0);
    DistanceField d = geodesic_distances(mc, 0);
    for (double r : {0.3, 0.5, 0.8}) {
      double measured = ball_mass(mc, d, r);
      CHECK(measured == Catch::Approx(kPi * r * r / 2.0).margin(0.05 * r * r));
    }
  }
  SECTION("full angle reproduces Euclidean distances") {
    MetricComplex mc = build_cone(2.0 * kPi, 24, 64, 1.0);
    DistanceField d = geodesic_distances(mc, 0);
    for (int v = 1; v < mc.vertex_count(); v += 97)
      CHECK(d.dist[v] == Catch::Approx(mc.coords[v][0]).margin(1e-12));
    // distances between two rim points match the planar chord
    int a = mc.vertex_count() - 64, b = mc.vertex_count() - 32;
    DistanceField da = geodesic_distances(mc, a);
    double t1 = mc.coords[a][1], t2 = mc.coords[b][1];
    double chord = std::sqrt(2.0 - 2.0 * std::cos(t2 - t1));
    CHECK(da.dist[b] == Catch::Approx(chord).margin(1e-12));
  }
  CHECK_THROWS_AS(build_cone(0.0, 16, 32, 1.0), Error);
  CHECK_THROWS_AS(build_cone(7.0, 16, 32, 1.0), Error);
}

TEST_CASE("doubled triangle: closed surface with three cone points") {
  MetricComplex mc = build_doubled_triangle(1.0, 8);
  CHECK(mc.total_mass() == Catch::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-13));
  CHECK(mc.boundary.empty());

  // Euler characteristic of the glued sphere: V - E + F = 2 with F = 2 n^2.
  // Near each corner the two copies contribute parallel edges on the same
  // vertex pair; those merge into one record carrying both conductances
  // (energy-equivalent), so the surface edge count is edge_count() + 3.
  int V = mc.vertex_count(), E = mc.edge_count() + 3, F = 2 * 8 * 8;
  CHECK(V - E + F == 2);
  int doubled = 0;
  for (const Edge& e : mc.edges)
    if (e.w > 1.5 / std::sqrt(3.0)) ++doubled;
  CHECK(doubled == 3);

  // the three glued corners keep exactly two incident equilateral triangles,
  // so the total angle there is 2*pi/3 < 2*pi
  for (int c : doubled_triangle_corners(8)) {
    int degree = mc.adj_offset[c + 1] - mc.adj_offset[c];
    CHECK(degree == 2);
  }
  CHECK_THROWS_AS(build_doubled_triangle(1.0, 1), Error);
}

TEST_CASE("product builder: measure, Kronecker sum, slab energy") {
  MetricComplex line = build_interval(3, 1.0);
  MetricComplex fiber = build_interval(3, 1.0);
  MetricComplex prod = build_product(line, fiber);
  CHECK(prod.total_mass() == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(prod.intrinsic_dim == 2);

  SECTION("Laplacian is the Kronecker sum of the factors") {
    MetricComplex l2 = build_interval(7, 2.0);
    MetricComplex f2 = build_doubled_triangle(1.0, 4);
    MetricComplex p2 = build_product(l2, f2);
    int nf = f2.vertex_count();
    Rng rng(42);
    auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> u(p2.vertex_count());
      for (double& x : u) x = uniform();
      // product Laplacian applied directly
      std::vector<double> lap(p2.vertex_count(), 0.0);
      for (const Edge& e : p2.edges) {
        double d = u[e.i] - u[e.j];
        lap[e.i] += e.w * d;
        lap[e.j] -= e.w * d;
      }
      // Kronecker sum: line operator weighted by fiber mass plus fiber
      // operator weighted by line mass
      std::vector<double> expect(p2.vertex_count(), 0.0);
      for (int y = 0; y < nf; ++y)
        for (const Edge& e : l2.edges) {
          double d = u[e.i * nf + y] - u[e.j * nf + y];
          expect[e.i * nf + y] += e.w * f2.mass[y] * d;
          expect[e.j * nf + y] -= e.w * f2.mass[y] * d;
        }
      for (int t = 0; t < l2.vertex_count(); ++t)
        for (const Edge& e : f2.edges) {
          double d = u[t * nf + e.i] - u[t * nf + e.j];
          expect[t * nf + e.i] += l2.mass[t] * e.w * d;
          expect[t * nf + e.j] -= l2.mass[t] * e.w * d;
        }
      double err = 0.0, scale = 0.0;
      for (int v = 0; v < p2.vertex_count(); ++v) {
        err = std::max(err, std::abs(lap[v] - expect[v]));
        scale = std::max(scale, std::abs(expect[v]));
      }
      CHECK(err <= 1e-12 * std::max(scale, 1.0));
    }
  }

  SECTION("slab ramp t^+ has Dirichlet energy mu(Y)") {
    MetricComplex l2 = build_interval(21, 2.0);  // t in [0,2], ramp beyond t=1
    MetricComplex f2 = build_doubled_triangle(1.0, 5);
    MetricComplex p2 = build_product(l2, f2);
    int nf = f2.vertex_count();
    VectorField u = make_field(p2, 1);
    for (int v = 0; v < p2.vertex_count(); ++v)
      u.at(v, 0) = std::max(l2.coords[v / nf][0] - 1.0, 0.0);
    CHECK(dirichlet_energy(p2, u) == Catch::Approx(f2.total_mass()).epsilon(1e-10));
  }

  CHECK_THROWS_AS(build_product(build_rectangle(3, 3, 1, 1), fiber), Error);
}

TEST_CASE("geodesic distances: exactness, triangle inequality, coarea") {
  SECTION("chain distances from an endpoint") {
    MetricComplex mc = build_interval(5, 1.0);
    DistanceField d = geodesic_distances(mc, 0);
    for (int v = 0; v < 5; ++v) CHECK(d.dist[v] == Catch::Approx(0.25 * v).margin(1e-15));
    CHECK(d.dist[0] == 0.0);
  }
  SECTION("plane chart matches Euclidean distance") {
    MetricComplex mc = build_rectangle(17, 17, 1.0, 1.0);
    int c = 8 * 17 + 8;
    DistanceField d = geodesic_distances(mc, c);
    for (int v = 0; v < mc.vertex_count(); v += 13) {
      double dx = mc.coords[v][0] - 0.5, dy = mc.coords[v][1] - 0.5;
      CHECK(d.dist[v] == Catch::Approx(std::hypot(dx, dy)).margin(1e-14));
    }
  }
  SECTION("edge-wise triangle inequality holds for charts and Dijkstra") {
    for (const MetricComplex& mc :
         {build_rectangle(9, 9, 1.0, 2.0), build_cone(4.0, 12, 24, 1.0),
          build_doubled_triangle(1.0, 6)}) {
      DistanceField d = geodesic_distances(mc, 1);
      for (const Edge& e : mc.edges)
        CHECK(std::abs(d.dist[e.i] - d.dist[e.j]) <= e.len + 1e-12);
    }
  }
  SECTION("ball at r = 0+ is the source alone") {
    MetricComplex mc = build_rectangle(9, 9, 1.0, 1.0);
    DistanceField d = geodesic_distances(mc, 40);
    auto b = ball(mc, d, 1e-9);
    REQUIRE(b.size() == 1);
    CHECK(b[0] == 40);
  }
  SECTION("disc shell measure approximates the circumference") {
    MetricComplex mc = build_cone(2.0 * kPi, 64, 256, 1.0);
    DistanceField d = geodesic_distances(mc, 0);
    double h = median_edge_length(mc);
    for (double r : {0.3, 0.5}) {
      double dr = default_shell_width(h, r);
      ShellMeasure s = shell_measure(mc, d, r, dr);
      REQUIRE_FALSE(s.empty);
      CHECK(s.value == Catch::Approx(2.0 * kPi * (r + 0.5 * dr)).margin(0.1));
    }
  }
  SECTION("cone apex shell measure approximates a * r") {
    MetricComplex mc = build_cone(kPi, 64, 128, 1.0);
    DistanceField d = geodesic_distances(mc, 0);
    double h = median_edge_length(mc);
    double r = 0.5, dr = default_shell_width(h, r);
    ShellMeasure s = shell_measure(mc, d, r, dr);
    CHECK(s.value == Catch::Approx(kPi * (r + 0.5 * dr)).margin(0.08));
  }
  SECTION("empty shell sets the warning flag") {
    MetricComplex mc = build_interval(5, 1.0);
    DistanceField d = geodesic_distances(mc, 0);
    ShellMeasure s = shell_measure(mc, d, 0.26, 0.2);
    // vertices sit at multiples of 0.25; [0.26, 0.46) misses them all
    CHECK(s.empty);
    CHECK(s.value == 0.0);
  }
  SECTION("coarea consistency: integrated shells reproduce the ball mass") {
    for (const MetricComplex& mc : {build_rectangle(33, 33, 2.0, 2.0), build_cone(kPi, 32, 64, 1.0)}) {
      int c = mc.chart == ChartKind::cone
                  ? 0
                  : 16 * 33 + 16;  // center of the rectangle
      DistanceField d = geodesic_distances(mc, c);
      double R = 0.45 * min_boundary_distance(mc, d) * 2.0;
      double h = median_edge_length(mc);
      int n = 64;
      KahanSum integral;
      for (int k = 0; k < n; ++k) {
        double r = R * (k + 0.5) / n;
        ShellMeasure s = shell_measure(mc, d, r - 0.5 * R / n, R / n);
        integral.add(s.value * (R / n));
      }
      double direct = ball_mass(mc, d, R);
      (void)h;
      CHECK(integral.value() == Catch::Approx(direct).epsilon(0.02));
    }
  }
}

TEST_CASE("dijkstra fallback agrees with charts on chains") {
  MetricComplex mc = build_interval(11, 3.0);
  DistanceField exact = geodesic_distances(mc, 4);
  DistanceField graph = dijkstra_distances(mc, 4);
  for (int v = 0; v < mc.vertex_count(); ++v)
    CHECK(graph.dist[v] == Catch::Approx(exact.dist[v]).margin(1e-13));
}

TEST_CASE("rescaled complex: homothety rules") {
  MetricComplex mc = build_rectangle(9, 9, 1.0, 1.0);
  double s = 2.0;
  MetricComplex big = rescaled(mc, s);
  CHECK(big.total_mass() == Catch::Approx(mc.total_mass() * s * s).epsilon(1e-13));
  for (int k = 0; k < mc.edge_count(); ++k) {
    CHECK(big.edges[k].len == Catch::Approx(mc.edges[k].len * s));
    CHECK(big.edges[k].w == Catch::Approx(mc.edges[k].w));  // N = 2: conductance invariant
    CHECK(big.edges[k].per == Catch::Approx(mc.edges[k].per * s));
  }
}

TEST_CASE("validation rejects broken complexes") {
  MetricComplex mc = build_interval(5, 1.0);
  SECTION("nonpositive mass") {
    mc.mass[2] = 0.0;
    CHECK_THROWS_AS(mc.validate(), Error);
  }
  SECTION("self loop") {
    mc.edges.push_back({2, 2, 1.0, 0.1, 0.0});
    CHECK_THROWS_AS(mc.finalize(), Error);
  }
  SECTION("disconnected interior") {
    MetricComplex broken = build_interval(7, 1.0);
    broken.edges.erase(broken.edges.begin() + 3);
    CHECK_THROWS_AS(broken.finalize(), Error);
  }
}
