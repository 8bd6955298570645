#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "bernoulli/energy.hpp"

namespace bernoulli {

/// Constrained Dirichlet solve: minimize the Dirichlet form over the free
/// vertices with the fixed vertices pinned.
struct DirichletProblem {
  const MetricComplex* complex = nullptr;
  std::vector<int> fixed;          // sorted vertex ids
  std::vector<double> fixed_values;
  double eta = 1e-10;              // relative residual tolerance
  int max_iterations = 20000;
};

/// Reduced SPD operator for one free set. The stiffness matrix is shared by
/// all components; only right-hand sides differ. Also exposes the exact
/// energy increments of single-vertex constraint changes through the
/// factorization (bordering identities), which is what the move search and
/// the certificate evaluate instead of a from-scratch re-solve.
class DirichletOperator {
 public:
  DirichletOperator(const MetricComplex& mc, std::vector<uint8_t> free_mask, double eta = 1e-10,
                    int max_iterations = 20000)
      : mc_(&mc), free_(std::move(free_mask)), eta_(eta), max_iterations_(max_iterations) {
    require(free_.size() == static_cast<std::size_t>(mc.vertex_count()), "free mask size mismatch");
    index_.assign(free_.size(), -1);
    for (int v = 0; v < mc.vertex_count(); ++v)
      if (free_[static_cast<std::size_t>(v)]) {
        index_[static_cast<std::size_t>(v)] = static_cast<int>(ids_.size());
        ids_.push_back(v);
      }
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> diag(ids_.size(), 0.0);
    for (const Edge& e : mc.edges) {
      int fi = index_[static_cast<std::size_t>(e.i)];
      int fj = index_[static_cast<std::size_t>(e.j)];
      if (fi >= 0) diag[static_cast<std::size_t>(fi)] += e.w;
      if (fj >= 0) diag[static_cast<std::size_t>(fj)] += e.w;
      if (fi >= 0 && fj >= 0) {
        trip.emplace_back(fi, fj, -e.w);
        trip.emplace_back(fj, fi, -e.w);
      }
    }
    for (std::size_t k = 0; k < ids_.size(); ++k)
      trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag[k]);
    S_.resize(static_cast<int>(ids_.size()), static_cast<int>(ids_.size()));
    S_.setFromTriplets(trip.begin(), trip.end());
    S_.makeCompressed();
    // every free vertex must reach a fixed one, or the reduced system is singular
    check_anchoring();
  }

  const std::vector<int>& free_ids() const { return ids_; }
  int free_count() const { return static_cast<int>(ids_.size()); }
  bool is_free(int v) const { return free_[static_cast<std::size_t>(v)] != 0; }

  /// Minimizes the Dirichlet form for one component. `values` carries the
  /// fixed entries on input and receives the full solution. Throws
  /// SolveFailure on non-convergence; never returns a silent partial answer.
  void solve_component(std::vector<double>& values, const std::vector<double>* warm = nullptr) const {
    if (ids_.empty()) return;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(free_count());
    for (const Edge& e : mc_->edges) {
      int fi = index_[static_cast<std::size_t>(e.i)];
      int fj = index_[static_cast<std::size_t>(e.j)];
      if (fi >= 0 && fj < 0) b[fi] += e.w * values[static_cast<std::size_t>(e.j)];
      if (fj >= 0 && fi < 0) b[fj] += e.w * values[static_cast<std::size_t>(e.i)];
    }
    Eigen::VectorXd x;
    if (b.norm() == 0.0) {
      x = Eigen::VectorXd::Zero(free_count());
    } else if (ldlt_) {
      x = ldlt_->solve(b);
    } else {
      Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                               Eigen::DiagonalPreconditioner<double>>
          cg;
      cg.setTolerance(eta_);
      cg.setMaxIterations(max_iterations_);
      cg.compute(S_);
      if (warm) {
        Eigen::VectorXd w0(free_count());
        for (int k = 0; k < free_count(); ++k) w0[k] = (*warm)[static_cast<std::size_t>(ids_[static_cast<std::size_t>(k)])];
        x = cg.solveWithGuess(b, w0);
      } else {
        x = cg.solve(b);
      }
      if (cg.info() != Eigen::Success)
        throw SolveFailure("Dirichlet CG did not converge within " + std::to_string(max_iterations_) +
                               " iterations (residual " + format_double(cg.error()) + ")",
                           cg.error());
    }
    for (int k = 0; k < free_count(); ++k) values[static_cast<std::size_t>(ids_[static_cast<std::size_t>(k)])] = x[k];
  }

  /// Solves all components of a field in place (fixed entries already set).
  void solve_field(VectorField& u) const {
    std::vector<double> comp(static_cast<std::size_t>(u.vertices));
    for (int i = 0; i < u.m; ++i) {
      for (int v = 0; v < u.vertices; ++v) comp[static_cast<std::size_t>(v)] = u.at(v, i);
      solve_component(comp);
      for (int v = 0; v < u.vertices; ++v) u.at(v, i) = comp[static_cast<std::size_t>(v)];
    }
  }

  void factorize() const {
    if (ldlt_) return;
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    ldlt_->compute(S_);
    require(ldlt_->info() == Eigen::Success, "LDLT factorization failed (singular reduced system?)");
  }

  /// alpha_v = [S_ff^{-1}]_{vv}: the exact Dirichlet-energy increment of
  /// pinning free vertex v to zero is sum_i u_{v,i}^2 / alpha_v.
  double diag_inverse(int v) const {
    factorize();
    int f = index_[static_cast<std::size_t>(v)];
    require(f >= 0, "diag_inverse: vertex not free");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(free_count());
    e[f] = 1.0;
    return ldlt_->solve(e)[f];
  }

  /// Schur scalar of appending vertex v (currently fixed) to the free set;
  /// freeing v lowers the Dirichlet energy by s_v^2 / schur where s_v is the
  /// incident flux sum_{e: v~w} w_e u_w.
  double schur_complement(int v) const {
    factorize();
    require(index_[static_cast<std::size_t>(v)] < 0, "schur_complement: vertex already free");
    double svv = 0.0;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(free_count());
    for (int a = mc_->adj_offset[static_cast<std::size_t>(v)]; a < mc_->adj_offset[static_cast<std::size_t>(v) + 1]; ++a) {
      const Edge& e = mc_->edges[static_cast<std::size_t>(mc_->adj_edge[static_cast<std::size_t>(a)])];
      svv += e.w;
      int f = index_[static_cast<std::size_t>(mc_->adj_vertex[static_cast<std::size_t>(a)])];
      if (f >= 0) c[f] = e.w;
    }
    if (c.isZero(0.0)) return svv;
    double red = c.dot(ldlt_->solve(c));
    double schur = svv - red;
    require(schur > 0.0, "schur_complement: nonpositive pivot");
    return schur;
  }

  const Eigen::SparseMatrix<double>& matrix() const { return S_; }

 private:
  void check_anchoring() const {
    const int n = mc_->vertex_count();
    std::vector<uint8_t> reached(static_cast<std::size_t>(n), 0);
    std::vector<int> stack;
    for (int v = 0; v < n; ++v)
      if (!free_[static_cast<std::size_t>(v)]) {
        reached[static_cast<std::size_t>(v)] = 1;
        stack.push_back(v);
      }
    require(!stack.empty(), "Dirichlet problem has no fixed vertices");
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int a = mc_->adj_offset[static_cast<std::size_t>(v)]; a < mc_->adj_offset[static_cast<std::size_t>(v) + 1]; ++a) {
        int u = mc_->adj_vertex[static_cast<std::size_t>(a)];
        if (!reached[static_cast<std::size_t>(u)]) {
          reached[static_cast<std::size_t>(u)] = 1;
          stack.push_back(u);
        }
      }
    }
    for (int v : ids_)
      require(reached[static_cast<std::size_t>(v)] != 0,
              "free component without fixed anchor (disconnected Dirichlet problem)");
  }

  const MetricComplex* mc_;
  std::vector<uint8_t> free_;
  std::vector<int> index_;
  std::vector<int> ids_;
  Eigen::SparseMatrix<double> S_;
  double eta_;
  int max_iterations_;
  mutable std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

/// Unique minimizer of the Dirichlet form under the problem's constraints.
inline std::vector<double> solve_dirichlet(const DirichletProblem& p) {
  const MetricComplex& mc = *p.complex;
  require(p.fixed.size() == p.fixed_values.size(), "solve_dirichlet: fixed/value size mismatch");
  require(!p.fixed.empty(), "solve_dirichlet: fixed set empty");
  std::vector<uint8_t> free_mask(static_cast<std::size_t>(mc.vertex_count()), 1);
  std::vector<double> values(static_cast<std::size_t>(mc.vertex_count()), 0.0);
  for (std::size_t k = 0; k < p.fixed.size(); ++k) {
    int v = p.fixed[k];
    require(v >= 0 && v < mc.vertex_count(), "solve_dirichlet: fixed id out of range");
    require(free_mask[static_cast<std::size_t>(v)] == 1, "solve_dirichlet: duplicate fixed id");
    free_mask[static_cast<std::size_t>(v)] = 0;
    values[static_cast<std::size_t>(v)] = p.fixed_values[k];
  }
  DirichletOperator op(mc, std::move(free_mask), p.eta, p.max_iterations);
  op.solve_component(values);
  return values;
}

/// Harmonic extension of the stored boundary data, componentwise.
inline VectorField harmonic_extension(const MetricComplex& mc, const VectorField& g,
                                      double eta = 1e-10, int max_iterations = 20000) {
  check_shapes(mc, g);
  VectorField u = g;
  impose_boundary(mc, u);
  std::vector<uint8_t> free_mask(static_cast<std::size_t>(mc.vertex_count()), 1);
  for (int b : mc.boundary) free_mask[static_cast<std::size_t>(b)] = 0;
  DirichletOperator op(mc, std::move(free_mask), eta, max_iterations);
  op.solve_field(u);
  return u;
}

/// Discrete Laplacian measure in the analyst's sign convention:
/// a_{v,i} = sum_{e: v~w} w_e (u_w - u_v), so subharmonicity reads a >= 0.
/// The raw operator sum_e w (u_v - u_w) is its negative; the pairing
/// sum_v phi_v (-a_v) = sum_e w (dphi)(du) holds to machine precision.
struct LaplacianMeasure {
  int m = 1;
  std::vector<double> values;  // vertex-major, analyst sign

  double at(int v, int i) const { return values[static_cast<std::size_t>(v) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)]; }
};

inline LaplacianMeasure laplacian_measure(const MetricComplex& mc, const VectorField& u) {
  check_shapes(mc, u);
  LaplacianMeasure lm;
  lm.m = u.m;
  lm.values.assign(static_cast<std::size_t>(mc.vertex_count()) * static_cast<std::size_t>(u.m), 0.0);
  for (const Edge& e : mc.edges)
    for (int i = 0; i < u.m; ++i) {
      double d = u.at(e.j, i) - u.at(e.i, i);
      lm.values[static_cast<std::size_t>(e.i) * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(i)] += e.w * d;
      lm.values[static_cast<std::size_t>(e.j) * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(i)] -= e.w * d;
    }
  return lm;
}

/// Scaled Cheng-Yau ratio R * sup_{B_{R/2}} |grad u| / u for a positive
/// harmonic scalar field; the gradient is the edge difference quotient and u
/// is taken at the smaller endpoint. Diagnostic only: the continuum constant
/// C_N is not quantified, so callers record the value rather than assert it.
inline double cheng_yau_ratio(const MetricComplex& mc, const std::vector<double>& u,
                              const DistanceField& dist, double R, double harmonic_tol = 1e-7) {
  require(u.size() == static_cast<std::size_t>(mc.vertex_count()), "cheng_yau_ratio: field size mismatch");
  require(R > 0.0, "cheng_yau_ratio: need R > 0");
  VectorField uf;
  uf.m = 1;
  uf.vertices = mc.vertex_count();
  uf.values = u;
  LaplacianMeasure lm;
  lm.m = 1;
  lm.values.assign(u.size(), 0.0);
  for (const Edge& e : mc.edges) {
    double d = u[static_cast<std::size_t>(e.j)] - u[static_cast<std::size_t>(e.i)];
    lm.values[static_cast<std::size_t>(e.i)] += e.w * d;
    lm.values[static_cast<std::size_t>(e.j)] -= e.w * d;
  }
  double scale = 0.0;
  for (const Edge& e : mc.edges) scale = std::max(scale, e.w);
  for (int v = 0; v < mc.vertex_count(); ++v) {
    if (dist.dist[static_cast<std::size_t>(v)] >= R) continue;
    require(u[static_cast<std::size_t>(v)] > 0.0, "cheng_yau_ratio: field not positive on the ball");
    if (!mc.is_boundary(v))
      require(std::abs(lm.values[static_cast<std::size_t>(v)]) <= harmonic_tol * std::max(1.0, scale),
              "cheng_yau_ratio: field not harmonic on the ball");
  }
  double sup = 0.0;
  double half = 0.5 * R * (1.0 + 1e-12);  // closed half-ball
  for (const Edge& e : mc.edges) {
    if (dist.dist[static_cast<std::size_t>(e.i)] > half || dist.dist[static_cast<std::size_t>(e.j)] > half) continue;
    double g = std::abs(u[static_cast<std::size_t>(e.i)] - u[static_cast<std::size_t>(e.j)]) / e.len;
    sup = std::max(sup, g / std::min(u[static_cast<std::size_t>(e.i)], u[static_cast<std::size_t>(e.j)]));
  }
  return R * sup;
}

}  // namespace bernoulli
