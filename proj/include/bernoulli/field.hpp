#pragma once

#include "bernoulli/geometry.hpp"

namespace bernoulli {

/// m nonnegative scalar fields on the vertices of one complex, plus the
/// Dirichlet data g pinned on the boundary vertices. Value semantics; the
/// invariant "boundary values equal boundary_data" is re-imposed by every
/// mutating operation.
struct VectorField {
  int m = 1;
  int vertices = 0;
  std::vector<double> values;         // vertex-major, values[v*m + i]
  std::vector<double> boundary_data;  // aligned with complex.boundary, b*m + i

  double& at(int v, int i) { return values[static_cast<std::size_t>(v) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)]; }
  double at(int v, int i) const { return values[static_cast<std::size_t>(v) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)]; }

  double norm_at(int v) const {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += sq(at(v, i));
    return std::sqrt(s);
  }
};

inline VectorField make_field(const MetricComplex& mc, int m) {
  require(m >= 1, "make_field: need m >= 1");
  VectorField f;
  f.m = m;
  f.vertices = mc.vertex_count();
  f.values.assign(static_cast<std::size_t>(f.vertices) * static_cast<std::size_t>(m), 0.0);
  f.boundary_data.assign(mc.boundary.size() * static_cast<std::size_t>(m), 0.0);
  return f;
}

inline void check_shapes(const MetricComplex& mc, const VectorField& u) {
  require(u.vertices == mc.vertex_count(), "field/complex vertex count mismatch");
  require(u.boundary_data.size() == mc.boundary.size() * static_cast<std::size_t>(u.m),
          "field boundary data size mismatch");
}

/// Copies boundary_data onto the boundary vertices.
inline void impose_boundary(const MetricComplex& mc, VectorField& u) {
  check_shapes(mc, u);
  for (std::size_t b = 0; b < mc.boundary.size(); ++b)
    for (int i = 0; i < u.m; ++i)
      u.at(mc.boundary[b], i) = u.boundary_data[b * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(i)];
}

/// Sets the stored Dirichlet data from per-boundary-vertex values and imposes it.
inline void set_boundary_data(const MetricComplex& mc, VectorField& u,
                              const std::vector<double>& data) {
  require(data.size() == mc.boundary.size() * static_cast<std::size_t>(u.m),
          "set_boundary_data: size mismatch");
  for (double g : data) require(g >= 0.0 && std::isfinite(g), "boundary data must be nonnegative");
  u.boundary_data = data;
  impose_boundary(mc, u);
}

inline void validate_nonnegative(const VectorField& u) {
  for (double x : u.values) require(x >= 0.0 && std::isfinite(x), "field values must be nonnegative");
}

/// Q weight with its standing bounds 0 < q_min <= Q <= q_max.
struct QField {
  std::vector<double> q;
  double q_min = 0.0;
  double q_max = 0.0;

  double at(int v) const { return q[static_cast<std::size_t>(v)]; }
};

inline QField make_qfield(const MetricComplex& mc, std::vector<double> q) {
  require(q.size() == static_cast<std::size_t>(mc.vertex_count()), "QField size mismatch");
  QField out;
  out.q = std::move(q);
  out.q_min = kInf;
  out.q_max = -kInf;
  for (double v : out.q) {
    out.q_min = std::min(out.q_min, v);
    out.q_max = std::max(out.q_max, v);
  }
  require(out.q_min > 0.0 && std::isfinite(out.q_max), "Q must satisfy 0 < q_min <= q_max < inf");
  return out;
}

inline QField make_qfield(const MetricComplex& mc, double q0) {
  return make_qfield(mc, std::vector<double>(static_cast<std::size_t>(mc.vertex_count()), q0));
}

struct PositivityMask {
  std::vector<uint8_t> mask;
  double tau = 0.0;

  bool at(int v) const { return mask[static_cast<std::size_t>(v)] != 0; }
  int count() const {
    int c = 0;
    for (uint8_t b : mask) c += b;
    return c;
  }
};

inline double mask_measure(const MetricComplex& mc, const PositivityMask& mask) {
  KahanSum s;
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (mask.at(v)) s.add(mc.mass[static_cast<std::size_t>(v)]);
  return s.value();
}

/// Snap-then-mask: values with |u_v| <= tau are zeroed in the field, then the
/// mask records |u_v| > tau. Applying it twice with the same tau is a no-op.
inline PositivityMask positivity_mask(VectorField& u, double tau) {
  require(tau >= 0.0, "positivity_mask: need tau >= 0");
  PositivityMask pm;
  pm.tau = tau;
  pm.mask.assign(static_cast<std::size_t>(u.vertices), 0);
  for (int v = 0; v < u.vertices; ++v) {
    if (u.norm_at(v) > tau) {
      pm.mask[static_cast<std::size_t>(v)] = 1;
    } else {
      for (int i = 0; i < u.m; ++i) u.at(v, i) = 0.0;
    }
  }
  return pm;
}

/// Mask of a field without snapping (for const contexts).
inline PositivityMask positivity_mask_view(const VectorField& u, double tau) {
  require(tau >= 0.0, "positivity_mask: need tau >= 0");
  PositivityMask pm;
  pm.tau = tau;
  pm.mask.assign(static_cast<std::size_t>(u.vertices), 0);
  for (int v = 0; v < u.vertices; ++v)
    if (u.norm_at(v) > tau) pm.mask[static_cast<std::size_t>(v)] = 1;
  return pm;
}

/// Distance between competitors: discrete W^{1,2} norm of the difference plus
/// the L1 distance between the positivity indicators.
inline double field_dist(const MetricComplex& mc, const VectorField& u, const VectorField& v,
                         double tau = 1e-12) {
  check_shapes(mc, u);
  check_shapes(mc, v);
  require(u.m == v.m, "field_dist: component count mismatch");
  KahanSum l2, grad, mask;
  for (int vtx = 0; vtx < mc.vertex_count(); ++vtx) {
    double s = 0.0;
    for (int i = 0; i < u.m; ++i) s += sq(u.at(vtx, i) - v.at(vtx, i));
    l2.add(mc.mass[static_cast<std::size_t>(vtx)] * s);
    bool mu = u.norm_at(vtx) > tau;
    bool mv = v.norm_at(vtx) > tau;
    if (mu != mv) mask.add(mc.mass[static_cast<std::size_t>(vtx)]);
  }
  for (const Edge& e : mc.edges) {
    double s = 0.0;
    for (int i = 0; i < u.m; ++i)
      s += sq((u.at(e.i, i) - v.at(e.i, i)) - (u.at(e.j, i) - v.at(e.j, i)));
    grad.add(e.w * s);
  }
  return std::sqrt(l2.value() + grad.value()) + mask.value();
}

/// sup over a vertex set of the Euclidean norm |u_v|. Empty sets are an
/// error, never silently 0.
inline double sup_on(const VectorField& u, const std::vector<int>& set) {
  require(!set.empty(), "sup_on: empty vertex set");
  double s = 0.0;
  for (int v : set) {
    require(v >= 0 && v < u.vertices, "sup_on: vertex out of range");
    s = std::max(s, u.norm_at(v));
  }
  return s;
}

/// Restriction: values kept on `set`, zero elsewhere; boundary data cleared
/// outside the set as well.
inline VectorField restrict_to(const MetricComplex& mc, const VectorField& u,
                               const std::vector<int>& set) {
  check_shapes(mc, u);
  VectorField out = make_field(mc, u.m);
  std::vector<uint8_t> keep(static_cast<std::size_t>(u.vertices), 0);
  for (int v : set) {
    require(v >= 0 && v < u.vertices, "restrict_to: vertex out of range");
    keep[static_cast<std::size_t>(v)] = 1;
  }
  for (int v = 0; v < u.vertices; ++v)
    if (keep[static_cast<std::size_t>(v)])
      for (int i = 0; i < u.m; ++i) out.at(v, i) = u.at(v, i);
  for (std::size_t b = 0; b < mc.boundary.size(); ++b)
    if (keep[static_cast<std::size_t>(mc.boundary[b])])
      for (int i = 0; i < u.m; ++i)
        out.boundary_data[b * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(i)] =
            u.boundary_data[b * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(i)];
  return out;
}

}  // namespace bernoulli
