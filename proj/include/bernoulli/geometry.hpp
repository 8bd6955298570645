#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <memory>
#include <queue>
#include <utility>

#include "bernoulli/core.hpp"

namespace bernoulli {

struct Edge {
  int i = 0, j = 0;       // endpoints, i < j
  double w = 0.0;         // conductance (energy per squared field difference)
  double len = 0.0;       // intrinsic length
  double per = 0.0;       // dual-edge perimeter weight
};

/// Chart families with an exact point-to-point metric. Complexes without one
/// (glued surfaces) fall back to graph Dijkstra distance.
enum class ChartKind { none, line, plane, cone, product };

/// Weighted complex housing (X, d, mu), the domain boundary, the intrinsic
/// dimension N and the curvature bound K. Immutable after construction; all
/// queries are pure.
struct MetricComplex {
  std::vector<double> mass;                      // per-vertex mu-weight
  std::vector<std::array<double, 2>> coords;     // chart coordinates
  std::vector<Edge> edges;                       // i < j, lexicographic
  std::vector<int> boundary;                     // sorted vertex ids
  std::vector<uint8_t> on_boundary;              // derived marker
  int intrinsic_dim = 1;
  double curvature_bound = 0.0;                  // K <= 0
  std::string description;

  ChartKind chart = ChartKind::none;
  double cone_angle = 0.0;                       // cone chart: coords = (r, theta)
  std::shared_ptr<const MetricComplex> line_factor;   // product chart only
  std::shared_ptr<const MetricComplex> fiber_factor;  // product chart only

  // CSR adjacency, derived once at construction.
  std::vector<int> adj_offset;
  std::vector<int> adj_vertex;
  std::vector<int> adj_edge;

  int vertex_count() const { return static_cast<int>(mass.size()); }
  int edge_count() const { return static_cast<int>(edges.size()); }
  bool is_boundary(int v) const { return on_boundary[static_cast<std::size_t>(v)] != 0; }

  double total_mass() const {
    KahanSum s;
    for (double m : mass) s.add(m);
    return s.value();
  }

  void finalize() {
    const int n = vertex_count();
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    std::sort(boundary.begin(), boundary.end());
    boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
    on_boundary.assign(static_cast<std::size_t>(n), 0);
    for (int b : boundary) {
      require(b >= 0 && b < n, "boundary id out of range");
      on_boundary[static_cast<std::size_t>(b)] = 1;
    }
    adj_offset.assign(static_cast<std::size_t>(n) + 1, 0);
    for (const Edge& e : edges) {
      ++adj_offset[static_cast<std::size_t>(e.i) + 1];
      ++adj_offset[static_cast<std::size_t>(e.j) + 1];
    }
    for (int v = 0; v < n; ++v) adj_offset[static_cast<std::size_t>(v) + 1] += adj_offset[static_cast<std::size_t>(v)];
    adj_vertex.assign(adj_offset.back(), 0);
    adj_edge.assign(adj_offset.back(), 0);
    std::vector<int> cursor(adj_offset.begin(), adj_offset.end() - 1);
    for (int k = 0; k < edge_count(); ++k) {
      const Edge& e = edges[static_cast<std::size_t>(k)];
      adj_vertex[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.i)])] = e.j;
      adj_edge[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.i)]++)] = k;
      adj_vertex[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.j)])] = e.i;
      adj_edge[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.j)]++)] = k;
    }
    validate();
  }

  void validate() const {
    const int n = vertex_count();
    require(n >= 2, "complex needs at least two vertices");
    require(intrinsic_dim >= 1, "intrinsic_dim must be positive");
    require(curvature_bound <= 0.0, "curvature bound must be <= 0");
    for (double m : mass) require(m > 0.0 && std::isfinite(m), "vertex masses must be positive");
    for (const Edge& e : edges) {
      require(e.i >= 0 && e.j < n && e.i < e.j, "edge endpoints invalid (self-loop or out of range)");
      require(e.w > 0.0 && std::isfinite(e.w), "edge conductance must be positive");
      require(e.len > 0.0 && std::isfinite(e.len), "edge length must be positive");
      require(e.per >= 0.0 && std::isfinite(e.per), "perimeter weight must be nonnegative");
    }
    for (std::size_t k = 1; k < edges.size(); ++k)
      require(edges[k - 1].i != edges[k].i || edges[k - 1].j != edges[k].j, "duplicate edge");
    // Interior must be non-empty and edge-connected.
    int seed = -1;
    for (int v = 0; v < n; ++v)
      if (!is_boundary(v)) { seed = v; break; }
    require(seed >= 0, "no interior vertices");
    std::vector<uint8_t> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{seed};
    seen[static_cast<std::size_t>(seed)] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int a = adj_offset[static_cast<std::size_t>(v)]; a < adj_offset[static_cast<std::size_t>(v) + 1]; ++a) {
        int u = adj_vertex[static_cast<std::size_t>(a)];
        if (!seen[static_cast<std::size_t>(u)]) {
          seen[static_cast<std::size_t>(u)] = 1;
          stack.push_back(u);
        }
      }
    }
    for (int v = 0; v < n; ++v)
      if (!is_boundary(v)) require(seen[static_cast<std::size_t>(v)] != 0, "interior vertex set is disconnected");
  }
};

struct DistanceField {
  int source = 0;
  std::vector<double> dist;
};

// ---------------------------------------------------------------------------
// Construction from triangle soups.
//
// Each triangle contributes cotangent stiffness to its three edges, a
// barycentric third of its area to each corner mass, and a signed dual-edge
// segment of length (l/2)cot(opposite) to each side; the two contributions
// per interior edge add up to per = w * len. Triangles are described by their
// side lengths only, so glued surfaces and cone charts need no global
// embedding.
// ---------------------------------------------------------------------------

struct TriangleSpec {
  int a = 0, b = 0, c = 0;
  double lab = 0.0, lbc = 0.0, lca = 0.0;
};

namespace detail {

inline double heron_area(double a, double b, double c) {
  // Kahan's numerically stable form; requires sorted a >= b >= c.
  if (a < b) std::swap(a, b);
  if (b < c) std::swap(b, c);
  if (a < b) std::swap(a, b);
  double t = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
  require(t > 0.0, "degenerate triangle in mesh builder");
  return 0.25 * std::sqrt(t);
}

struct EdgeAccum {
  double cot_sum = 0.0;   // running sum of cot(opposite)/2
  double abs_sum = 0.0;   // scale for the zero-weight drop test
  double len = 0.0;
};

}  // namespace detail

/// Assembles a MetricComplex from triangles. Edges whose accumulated
/// cotangent weight vanishes (cyclic-quad diagonals) carry no energy and no
/// dual length and are dropped; genuinely negative weights are rejected so
/// the discrete maximum principle stays a theorem.
inline MetricComplex complex_from_triangles(int vertex_count,
                                            const std::vector<TriangleSpec>& tris,
                                            std::vector<int> boundary_ids,
                                            int intrinsic_dim,
                                            double curvature_bound,
                                            std::string description) {
  MetricComplex mc;
  mc.mass.assign(static_cast<std::size_t>(vertex_count), 0.0);
  mc.coords.assign(static_cast<std::size_t>(vertex_count), {0.0, 0.0});
  mc.intrinsic_dim = intrinsic_dim;
  mc.curvature_bound = curvature_bound;
  mc.description = std::move(description);
  mc.boundary = std::move(boundary_ids);

  std::map<std::pair<int, int>, detail::EdgeAccum> acc;
  std::vector<KahanSum> mass_acc(static_cast<std::size_t>(vertex_count));
  auto side = [&](int u, int v, double len, double cot_opposite) {
    auto key = std::minmax(u, v);
    auto& slot = acc[{key.first, key.second}];
    slot.cot_sum += 0.5 * cot_opposite;
    slot.abs_sum += 0.5 * std::abs(cot_opposite) + 1.0;
    slot.len = len;
  };
  for (const TriangleSpec& t : tris) {
    double area = detail::heron_area(t.lab, t.lbc, t.lca);
    double third = area / 3.0;
    mass_acc[static_cast<std::size_t>(t.a)].add(third);
    mass_acc[static_cast<std::size_t>(t.b)].add(third);
    mass_acc[static_cast<std::size_t>(t.c)].add(third);
    // law of cosines: angle at a is opposite side bc, at b opposite ca, at c opposite ab
    double cot_a = (sq(t.lab) + sq(t.lca) - sq(t.lbc)) / (4.0 * area);
    double cot_b = (sq(t.lab) + sq(t.lbc) - sq(t.lca)) / (4.0 * area);
    double cot_c = (sq(t.lbc) + sq(t.lca) - sq(t.lab)) / (4.0 * area);
    side(t.a, t.b, t.lab, cot_c);
    side(t.b, t.c, t.lbc, cot_a);
    side(t.c, t.a, t.lca, cot_b);
  }
  for (int v = 0; v < vertex_count; ++v) mc.mass[static_cast<std::size_t>(v)] = mass_acc[static_cast<std::size_t>(v)].value();

  for (const auto& [key, slot] : acc) {
    double w = slot.cot_sum;
    if (std::abs(w) <= 1e-12 * slot.abs_sum) continue;  // cyclic-quad diagonal
    require(w > 0.0, "negative cotangent weight; triangulation is not Delaunay-quality");
    Edge e;
    e.i = key.first;
    e.j = key.second;
    e.w = w;
    e.len = slot.len;
    e.per = w * slot.len;
    mc.edges.push_back(e);
  }
  return mc;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

/// Uniform chain on [0, length]: w = 1/h, len = h, unit perimeter weights,
/// endpoint masses halved so the total measure telescopes to length exactly.
inline MetricComplex build_interval(int n, double length) {
  require(n >= 3, "build_interval: need n >= 3");
  require(length > 0.0, "build_interval: need length > 0");
  double h = length / static_cast<double>(n - 1);
  MetricComplex mc;
  mc.intrinsic_dim = 1;
  mc.chart = ChartKind::line;
  mc.description = "interval(n=" + std::to_string(n) + ",length=" + format_double(length) + ")";
  mc.mass.assign(static_cast<std::size_t>(n), h);
  mc.mass.front() = 0.5 * h;
  mc.mass.back() = 0.5 * h;
  mc.coords.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) mc.coords[static_cast<std::size_t>(v)] = {h * static_cast<double>(v), 0.0};
  for (int v = 0; v + 1 < n; ++v) mc.edges.push_back({v, v + 1, 1.0 / h, h, 1.0});
  mc.boundary = {0, n - 1};
  mc.finalize();
  return mc;
}

/// Structured triangulation of [0,lx] x [0,ly] with alternating diagonals.
/// Cotangent weights make the discrete Dirichlet energy exact on affine
/// fields; the right-angle diagonals carry zero weight and are dropped.
inline MetricComplex build_rectangle(int nx, int ny, double lx, double ly) {
  require(nx >= 3 && ny >= 3, "build_rectangle: need nx, ny >= 3");
  require(lx > 0.0 && ly > 0.0, "build_rectangle: degenerate dimensions");
  double hx = lx / static_cast<double>(nx - 1);
  double hy = ly / static_cast<double>(ny - 1);
  auto id = [nx](int i, int j) { return j * nx + i; };
  auto pt = [&](int i, int j) -> std::array<double, 2> {
    return {hx * static_cast<double>(i), hy * static_cast<double>(j)};
  };
  auto dist = [&](std::array<double, 2> p, std::array<double, 2> q) {
    return std::hypot(p[0] - q[0], p[1] - q[1]);
  };
  std::vector<TriangleSpec> tris;
  tris.reserve(static_cast<std::size_t>(2 * (nx - 1) * (ny - 1)));
  auto push = [&](int a, int ia, int ja, int b, int ib, int jb, int c, int ic, int jc) {
    TriangleSpec t;
    t.a = a;
    t.b = b;
    t.c = c;
    t.lab = dist(pt(ia, ja), pt(ib, jb));
    t.lbc = dist(pt(ib, jb), pt(ic, jc));
    t.lca = dist(pt(ic, jc), pt(ia, ja));
    tris.push_back(t);
  };
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        push(v00, i, j, v10, i + 1, j, v11, i + 1, j + 1);
        push(v00, i, j, v11, i + 1, j + 1, v01, i, j + 1);
      } else {
        push(v10, i + 1, j, v01, i, j + 1, v00, i, j);
        push(v10, i + 1, j, v11, i + 1, j + 1, v01, i, j + 1);
      }
    }
  std::vector<int> bnd;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (i == 0 || j == 0 || i == nx - 1 || j == ny - 1) bnd.push_back(id(i, j));
  MetricComplex mc = complex_from_triangles(
      nx * ny, tris, std::move(bnd), 2, 0.0,
      "rectangle(nx=" + std::to_string(nx) + ",ny=" + std::to_string(ny) +
          ",lx=" + format_double(lx) + ",ly=" + format_double(ly) + ")");
  mc.chart = ChartKind::plane;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) mc.coords[static_cast<std::size_t>(id(i, j))] = pt(i, j);
  double area = lx * ly;
  mc.finalize();
  require(std::abs(mc.total_mass() - area) <= 1e-12 * area, "rectangle mass defect");
  return mc;
}

/// Exact distance on the flat cone of total angle `angle`: unroll through the
/// smaller angular gap, or pass through the apex once the gap exceeds pi.
inline double cone_distance(double r1, double t1, double r2, double t2, double angle) {
  double dt = std::abs(t1 - t2);
  dt = std::min(dt, angle - dt);
  if (dt >= 3.14159265358979323846) return r1 + r2;
  double d2 = sq(r1) + sq(r2) - 2.0 * r1 * r2 * std::cos(dt);
  return std::sqrt(std::max(d2, 0.0));
}

/// Triangulated metric cone over a circle of length angle*1, flat away from
/// the single apex vertex. coords store the (r, theta) chart; the outer rim
/// is the boundary.
inline MetricComplex build_cone(double angle, int nr, int ntheta, double rmax) {
  require(angle > 0.0 && angle <= 2.0 * 3.14159265358979323846 + 1e-12,
          "build_cone: angle must lie in (0, 2*pi]");
  require(nr >= 2 && ntheta >= 8, "build_cone: need nr >= 2, ntheta >= 8");
  require(rmax > 0.0, "build_cone: need rmax > 0");
  double dr = rmax / static_cast<double>(nr);
  double dth = angle / static_cast<double>(ntheta);
  auto id = [ntheta](int i, int j) { return 1 + (i - 1) * ntheta + ((j % ntheta + ntheta) % ntheta); };
  int vcount = 1 + nr * ntheta;
  auto radius = [&](int i) { return dr * static_cast<double>(i); };
  auto theta = [&](int j) { return dth * static_cast<double>(j); };
  auto dcone = [&](int i1, int j1, int i2, int j2) {
    return cone_distance(radius(i1), theta(j1), radius(i2), theta(j2), angle);
  };
  std::vector<TriangleSpec> tris;
  for (int j = 0; j < ntheta; ++j) {
    TriangleSpec t;
    t.a = 0;
    t.b = id(1, j);
    t.c = id(1, j + 1);
    t.lab = dr;
    t.lbc = dcone(1, j, 1, j + 1);
    t.lca = dr;
    tris.push_back(t);
  }
  for (int i = 1; i < nr; ++i)
    for (int j = 0; j < ntheta; ++j) {
      // quad (i,j)-(i+1,j)-(i+1,j+1)-(i,j+1); the diagonal weight cancels
      TriangleSpec t1;
      t1.a = id(i, j);
      t1.b = id(i + 1, j);
      t1.c = id(i + 1, j + 1);
      t1.lab = dr;
      t1.lbc = dcone(i + 1, j, i + 1, j + 1);
      t1.lca = dcone(i, j, i + 1, j + 1);
      tris.push_back(t1);
      TriangleSpec t2;
      t2.a = id(i, j);
      t2.b = id(i + 1, j + 1);
      t2.c = id(i, j + 1);
      t2.lab = t1.lca;
      t2.lbc = dcone(i + 1, j + 1, i, j + 1);
      t2.lca = dcone(i, j, i, j + 1);
      tris.push_back(t2);
    }
  std::vector<int> bnd;
  for (int j = 0; j < ntheta; ++j) bnd.push_back(id(nr, j));
  MetricComplex mc = complex_from_triangles(
      vcount, tris, std::move(bnd), 2, 0.0,
      "cone(angle=" + format_double(angle) + ",nr=" + std::to_string(nr) +
          ",ntheta=" + std::to_string(ntheta) + ",rmax=" + format_double(rmax) + ")");
  mc.chart = ChartKind::cone;
  mc.cone_angle = angle;
  mc.coords[0] = {0.0, 0.0};
  for (int i = 1; i <= nr; ++i)
    for (int j = 0; j < ntheta; ++j) mc.coords[static_cast<std::size_t>(id(i, j))] = {radius(i), theta(j)};
  mc.finalize();
  return mc;
}

/// Two equilateral triangle meshes glued along their boundaries: a closed
/// surface (empty boundary set) with three cone points of total angle 2*pi/3.
/// The edge next to each corner exists once per copy on the same glued vertex
/// pair; the two records merge into one edge carrying both conductances,
/// which leaves every quadratic form unchanged.
inline MetricComplex build_doubled_triangle(double side, int n) {
  require(side > 0.0, "build_doubled_triangle: need side > 0");
  require(n >= 2, "build_doubled_triangle: need n >= 2");
  double h = side / static_cast<double>(n);
  // lattice (i, j), i + j <= n; boundary of the lattice is shared by both
  // copies, interior duplicated.
  std::vector<std::vector<int>> idA(static_cast<std::size_t>(n) + 1,
                                    std::vector<int>(static_cast<std::size_t>(n) + 1, -1));
  std::vector<std::vector<int>> idB = idA;
  int next = 0;
  auto lattice_boundary = [n](int i, int j) { return i == 0 || j == 0 || i + j == n; };
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j + i <= n; ++j) idA[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = next++;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j + i <= n; ++j)
      idB[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          lattice_boundary(i, j) ? idA[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] : next++;
  int vcount = next;
  std::vector<TriangleSpec> tris;
  auto push_copy = [&](const std::vector<std::vector<int>>& id) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j + i < n; ++j) {
        TriangleSpec up;
        up.a = id[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        up.b = id[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j)];
        up.c = id[static_cast<std::size_t>(i)][static_cast<std::size_t>(j + 1)];
        up.lab = up.lbc = up.lca = h;
        tris.push_back(up);
        if (i + j + 2 <= n) {
          TriangleSpec dn;
          dn.a = id[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j)];
          dn.b = id[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j + 1)];
          dn.c = id[static_cast<std::size_t>(i)][static_cast<std::size_t>(j + 1)];
          dn.lab = dn.lbc = dn.lca = h;
          tris.push_back(dn);
        }
      }
  };
  push_copy(idA);
  push_copy(idB);
  MetricComplex mc = complex_from_triangles(
      vcount, tris, {}, 2, 0.0,
      "doubled_triangle(side=" + format_double(side) + ",n=" + std::to_string(n) + ")");
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j + i <= n; ++j) {
      std::array<double, 2> p = {h * (static_cast<double>(i) + 0.5 * static_cast<double>(j)),
                                 h * 0.8660254037844386467637231707529362 * static_cast<double>(j)};
      mc.coords[static_cast<std::size_t>(idA[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])] = p;
      mc.coords[static_cast<std::size_t>(idB[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])] = p;
    }
  mc.finalize();
  double area = 2.0 * 0.25 * std::sqrt(3.0) * sq(side);
  require(std::abs(mc.total_mass() - area) <= 1e-12 * area, "doubled triangle mass defect");
  return mc;
}

/// Lattice ids of the three glued corner vertices (each has exactly two
/// incident triangles, hence total angle 2*pi/3).
inline std::array<int, 3> doubled_triangle_corners(int n) {
  // matches the builder's row-major (i, then j) numbering of copy A
  auto idx = [n](int i, int j) {
    int base = 0;
    for (int k = 0; k < i; ++k) base += n + 1 - k;
    return base + j;
  };
  return {idx(0, 0), idx(n, 0), idx(0, n)};
}

/// Tensor product of a chain with an arbitrary fiber. Conductances follow the
/// product rule w((t,y),(t',y)) = w_line * m_fiber(y), w((t,y),(t,y')) =
/// m_line(t) * w_fiber, so the Laplacian is the Kronecker sum of the factors.
inline MetricComplex build_product(const MetricComplex& line, const MetricComplex& fiber) {
  require(line.intrinsic_dim == 1 && line.chart == ChartKind::line,
          "build_product: line factor must be a chain");
  for (const Edge& e : line.edges)
    require(e.j == e.i + 1, "build_product: line factor must be a chain");
  int nl = line.vertex_count();
  int nf = fiber.vertex_count();
  MetricComplex mc;
  mc.intrinsic_dim = 1 + fiber.intrinsic_dim;
  mc.curvature_bound = fiber.curvature_bound;
  mc.chart = ChartKind::product;
  mc.line_factor = std::make_shared<MetricComplex>(line);
  mc.fiber_factor = std::make_shared<MetricComplex>(fiber);
  mc.description = "product(" + line.description + " x " + fiber.description + ")";
  auto id = [nf](int t, int y) { return t * nf + y; };
  mc.mass.resize(static_cast<std::size_t>(nl) * static_cast<std::size_t>(nf));
  mc.coords.resize(mc.mass.size());
  for (int t = 0; t < nl; ++t)
    for (int y = 0; y < nf; ++y) {
      mc.mass[static_cast<std::size_t>(id(t, y))] =
          line.mass[static_cast<std::size_t>(t)] * fiber.mass[static_cast<std::size_t>(y)];
      mc.coords[static_cast<std::size_t>(id(t, y))] = {line.coords[static_cast<std::size_t>(t)][0],
                                                       static_cast<double>(y)};
    }
  for (const Edge& el : line.edges)
    for (int y = 0; y < nf; ++y)
      mc.edges.push_back({id(el.i, y), id(el.j, y), el.w * fiber.mass[static_cast<std::size_t>(y)], el.len,
                          fiber.mass[static_cast<std::size_t>(y)]});
  for (int t = 0; t < nl; ++t)
    for (const Edge& ef : fiber.edges)
      mc.edges.push_back({id(t, ef.i), id(t, ef.j), line.mass[static_cast<std::size_t>(t)] * ef.w, ef.len,
                          line.mass[static_cast<std::size_t>(t)] * ef.per});
  for (int b : line.boundary)
    for (int y = 0; y < nf; ++y) mc.boundary.push_back(id(b, y));
  for (int t = 0; t < nl; ++t)
    for (int b : fiber.boundary) mc.boundary.push_back(id(t, b));
  mc.finalize();
  return mc;
}

// ---------------------------------------------------------------------------
// Distances, balls, shells
// ---------------------------------------------------------------------------

/// Shortest-path distance over edge lengths; disconnected vertices keep +inf.
inline DistanceField dijkstra_distances(const MetricComplex& mc, int x0) {
  require(x0 >= 0 && x0 < mc.vertex_count(), "dijkstra_distances: bad source");
  DistanceField df;
  df.source = x0;
  df.dist.assign(static_cast<std::size_t>(mc.vertex_count()), kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  df.dist[static_cast<std::size_t>(x0)] = 0.0;
  pq.push({0.0, x0});
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > df.dist[static_cast<std::size_t>(v)]) continue;
    for (int a = mc.adj_offset[static_cast<std::size_t>(v)]; a < mc.adj_offset[static_cast<std::size_t>(v) + 1]; ++a) {
      int u = mc.adj_vertex[static_cast<std::size_t>(a)];
      double nd = d + mc.edges[static_cast<std::size_t>(mc.adj_edge[static_cast<std::size_t>(a)])].len;
      if (nd < df.dist[static_cast<std::size_t>(u)]) {
        df.dist[static_cast<std::size_t>(u)] = nd;
        pq.push({nd, u});
      }
    }
  }
  return df;
}

/// rho = d(., x0). Built families use their exact chart metric (graph-path
/// distance on a lattice has direction-dependent O(1) error, which the ball
/// and shell quadratures cannot absorb); complexes without a chart fall back
/// to Dijkstra over edge lengths.
inline DistanceField geodesic_distances(const MetricComplex& mc, int x0) {
  require(x0 >= 0 && x0 < mc.vertex_count(), "geodesic_distances: bad source");
  DistanceField df;
  df.source = x0;
  const int n = mc.vertex_count();
  switch (mc.chart) {
    case ChartKind::line: {
      df.dist.resize(static_cast<std::size_t>(n));
      double c0 = mc.coords[static_cast<std::size_t>(x0)][0];
      for (int v = 0; v < n; ++v) df.dist[static_cast<std::size_t>(v)] = std::abs(mc.coords[static_cast<std::size_t>(v)][0] - c0);
      return df;
    }
    case ChartKind::plane: {
      df.dist.resize(static_cast<std::size_t>(n));
      auto p0 = mc.coords[static_cast<std::size_t>(x0)];
      for (int v = 0; v < n; ++v) {
        auto p = mc.coords[static_cast<std::size_t>(v)];
        df.dist[static_cast<std::size_t>(v)] = std::hypot(p[0] - p0[0], p[1] - p0[1]);
      }
      return df;
    }
    case ChartKind::cone: {
      df.dist.resize(static_cast<std::size_t>(n));
      auto p0 = mc.coords[static_cast<std::size_t>(x0)];
      for (int v = 0; v < n; ++v) {
        auto p = mc.coords[static_cast<std::size_t>(v)];
        df.dist[static_cast<std::size_t>(v)] = cone_distance(p0[0], p0[1], p[0], p[1], mc.cone_angle);
      }
      return df;
    }
    case ChartKind::product: {
      const MetricComplex& fiber = *mc.fiber_factor;
      int nf = fiber.vertex_count();
      int t0 = x0 / nf, y0 = x0 % nf;
      DistanceField dfib = geodesic_distances(fiber, y0);
      const MetricComplex& line = *mc.line_factor;
      double c0 = line.coords[static_cast<std::size_t>(t0)][0];
      df.dist.resize(static_cast<std::size_t>(n));
      for (int t = 0; t < line.vertex_count(); ++t) {
        double dt = std::abs(line.coords[static_cast<std::size_t>(t)][0] - c0);
        for (int y = 0; y < nf; ++y)
          df.dist[static_cast<std::size_t>(t * nf + y)] = std::hypot(dt, dfib.dist[static_cast<std::size_t>(y)]);
      }
      return df;
    }
    case ChartKind::none:
      return dijkstra_distances(mc, x0);
  }
  return dijkstra_distances(mc, x0);
}

inline std::vector<int> ball(const MetricComplex& mc, const DistanceField& dist, double r) {
  require(r >= 0.0, "ball: need r >= 0");
  std::vector<int> out;
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (dist.dist[static_cast<std::size_t>(v)] < r) out.push_back(v);
  return out;
}

inline std::vector<int> annulus(const MetricComplex& mc, const DistanceField& dist, double r1, double r2) {
  require(0.0 <= r1 && r1 <= r2, "annulus: need 0 <= r1 <= r2");
  std::vector<int> out;
  for (int v = 0; v < mc.vertex_count(); ++v) {
    double d = dist.dist[static_cast<std::size_t>(v)];
    if (d >= r1 && d < r2) out.push_back(v);
  }
  return out;
}

struct ShellMeasure {
  double value = 0.0;
  bool empty = false;  // warning flag, not an error
};

/// (1/dr) * sum of masses over { r <= dist < r+dr }; approximates the
/// perimeter measure |D chi_{B_r}|(X) through the coarea identity, since
/// |grad rho| = 1.
inline ShellMeasure shell_measure(const MetricComplex& mc, const DistanceField& dist, double r, double dr) {
  require(r >= 0.0 && dr > 0.0, "shell_measure: need r >= 0, dr > 0");
  KahanSum s;
  bool any = false;
  for (int v = 0; v < mc.vertex_count(); ++v) {
    double d = dist.dist[static_cast<std::size_t>(v)];
    if (d >= r && d < r + dr) {
      s.add(mc.mass[static_cast<std::size_t>(v)]);
      any = true;
    }
  }
  return {s.value() / dr, !any};
}

inline double ball_mass(const MetricComplex& mc, const DistanceField& dist, double r) {
  KahanSum s;
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (dist.dist[static_cast<std::size_t>(v)] < r) s.add(mc.mass[static_cast<std::size_t>(v)]);
  return s.value();
}

inline double default_shell_width(double h, double r) { return std::max(2.0 * h, r / 16.0); }

inline double median_edge_length(const MetricComplex& mc) {
  std::vector<double> lens;
  lens.reserve(mc.edges.size());
  for (const Edge& e : mc.edges) lens.push_back(e.len);
  std::nth_element(lens.begin(), lens.begin() + static_cast<std::ptrdiff_t>(lens.size() / 2), lens.end());
  return lens[lens.size() / 2];
}

inline double min_boundary_distance(const MetricComplex& mc, const DistanceField& dist) {
  double d = kInf;
  for (int b : mc.boundary) d = std::min(d, dist.dist[static_cast<std::size_t>(b)]);
  return d;
}

/// Double-sweep estimate of the diameter (exact charts give the exact value
/// along the probed pair; good enough for continuation scales).
inline double approx_diameter(const MetricComplex& mc) {
  DistanceField d0 = geodesic_distances(mc, 0);
  int far = 0;
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (std::isfinite(d0.dist[static_cast<std::size_t>(v)]) && d0.dist[static_cast<std::size_t>(v)] > d0.dist[static_cast<std::size_t>(far)]) far = v;
  DistanceField d1 = geodesic_distances(mc, far);
  double diam = 0.0;
  for (double d : d1.dist)
    if (std::isfinite(d)) diam = std::max(diam, d);
  return diam;
}

/// Homothety: lengths scale by s, masses by s^N, conductances by s^(N-2),
/// perimeter weights by s^(N-1). With fields scaled by s the energy scales
/// by s^N, which is the rescaling covariance the blow-up analysis uses.
inline MetricComplex rescaled(const MetricComplex& mc, double s) {
  require(s > 0.0, "rescaled: need s > 0");
  MetricComplex out = mc;
  int N = mc.intrinsic_dim;
  double sm = std::pow(s, N), sw = std::pow(s, N - 2), sp = std::pow(s, N - 1);
  for (double& m : out.mass) m *= sm;
  for (Edge& e : out.edges) {
    e.w *= sw;
    e.len *= s;
    e.per *= sp;
  }
  if (mc.chart == ChartKind::line || mc.chart == ChartKind::plane) {
    for (auto& c : out.coords) {
      c[0] *= s;
      c[1] *= s;
    }
  } else if (mc.chart == ChartKind::cone) {
    for (auto& c : out.coords) c[0] *= s;  // radius only, angle unchanged
  } else if (mc.chart == ChartKind::product) {
    out.line_factor = std::make_shared<MetricComplex>(rescaled(*mc.line_factor, s));
    out.fiber_factor = std::make_shared<MetricComplex>(rescaled(*mc.fiber_factor, s));
  }
  out.description = mc.description + "*rescaled(" + format_double(s) + ")";
  return out;
}

}  // namespace bernoulli
