#pragma once

#include <numeric>

#include "bernoulli/harmonic.hpp"

namespace bernoulli {

struct SolveConfig {
  double eps0 = 0.0;               // relaxation start; 0 = domain diameter / 10
  double eps_ratio = 0.5;          // geometric schedule
  double eps_floor_factor = 10.0;  // schedule ends once eps <= factor * h
  double tau = 1e-12;              // positivity threshold
  double armijo = 1e-4;            // sufficient-decrease constant
  int max_descent_iterations = 2000;
  double descent_tol = 1e-10;      // relative energy decrease stop
  int max_moves = 100000;          // accepted-move cap for the set solver
  double cg_eta = 1e-10;
  int cg_max_iterations = 50000;
  uint64_t seed = 1;
  double tol_cert_rel = 1e-8;      // certificate slack, relative to |J|
  int ball_centers_per_round = 8;  // sampled cutoff/replacement centers per round
  int cutoff_exact_candidates = 4;  // re-solved cutoff proposals per stalled round
  std::vector<double> thetas = {0.25, 0.5};
  // certificate grid caps; 0 means the full free-boundary band
  int certify_cutoff_centers = 128;
  int certify_truncation_centers = 256;
  int certify_replacement_balls = 32;

  std::vector<double> eps_schedule(double diameter, double h) const {
    double start = eps0 > 0.0 ? eps0 : diameter / 10.0;
    double floor = eps_floor_factor * h;
    std::vector<double> sched{start};
    while (sched.back() > floor && sched.size() < 60) sched.push_back(sched.back() * eps_ratio);
    return sched;
  }
};

struct SolveResult {
  VectorField u;
  PositivityMask mask;  // positivity of the returned field
  EnergyReport energy;
  bool converged = false;
  int accepted_moves = 0;
  std::vector<double> energy_trace;  // exact J after each accepted move
};

struct MoveClassReport {
  std::string name;
  long evaluated = 0;          // exact evaluations
  long screened = 0;           // proven non-improving without a solve
  double worst_margin = kInf;  // min over moves of J(move) - J(u); >= 0 lower bound if all screened
  double field_dist_at_worst = 0.0;
};

struct MinimizerCertificate {
  double energy = 0.0;
  double tol_cert = 0.0;
  bool valid = false;
  double worst_margin = kInf;
  std::vector<MoveClassReport> classes;
};

namespace detail {

inline std::vector<uint8_t> forced_boundary_mask(const MetricComplex& mc, const VectorField& g,
                                                 double tau) {
  std::vector<uint8_t> forced(static_cast<std::size_t>(mc.vertex_count()), 0);
  for (std::size_t b = 0; b < mc.boundary.size(); ++b) {
    double s = 0.0;
    for (int i = 0; i < g.m; ++i)
      s += sq(g.boundary_data[b * static_cast<std::size_t>(g.m) + static_cast<std::size_t>(i)]);
    if (std::sqrt(s) > tau) forced[static_cast<std::size_t>(mc.boundary[b])] = 1;
  }
  return forced;
}

/// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
inline void seeded_shuffle(std::vector<int>& v, Rng& rng) {
  for (std::size_t k = v.size(); k > 1; --k)
    std::swap(v[k - 1], v[static_cast<std::size_t>(rng() % k)]);
}

/// Solver state: the set of vertices allowed positive, the Dirichlet solve on
/// it, and the exact energy of the solved field. Copyable (trial states).
class MaskState {
 public:
  MaskState(const MetricComplex& mc, const QField& q, const VectorField& g, const SolveConfig& cfg)
      : mc_(&mc), q_(&q), cfg_(&cfg), u_(g) {
    impose_boundary(mc, u_);
    allowed_.assign(static_cast<std::size_t>(mc.vertex_count()), 0);
    forced_ = forced_boundary_mask(mc, g, cfg.tau);
  }

  const MetricComplex& complex() const { return *mc_; }
  const QField& qfield() const { return *q_; }
  const SolveConfig& config() const { return *cfg_; }
  const VectorField& field() const { return u_; }
  const std::vector<uint8_t>& allowed() const { return allowed_; }
  double J() const { return J_.total; }
  const EnergyReport& report() const { return J_; }
  bool forced(int v) const { return forced_[static_cast<std::size_t>(v)] != 0; }

  void set_mask(const std::vector<uint8_t>& allowed) {
    allowed_ = allowed;
    for (int v = 0; v < mc_->vertex_count(); ++v)
      if (forced_[static_cast<std::size_t>(v)]) allowed_[static_cast<std::size_t>(v)] = 1;
    resolve();
  }

  /// Re-solves the Dirichlet problem on the current mask and refreshes J.
  void resolve() {
    const MetricComplex& mc = *mc_;
    std::vector<uint8_t> free_mask(static_cast<std::size_t>(mc.vertex_count()), 0);
    for (int v = 0; v < mc.vertex_count(); ++v)
      if (allowed_[static_cast<std::size_t>(v)] && !mc.is_boundary(v))
        free_mask[static_cast<std::size_t>(v)] = 1;
    impose_boundary(mc, u_);
    for (int v = 0; v < mc.vertex_count(); ++v)
      if (!allowed_[static_cast<std::size_t>(v)] && !mc.is_boundary(v))
        for (int i = 0; i < u_.m; ++i) u_.at(v, i) = 0.0;
    op_ = std::make_shared<DirichletOperator>(mc, free_mask, cfg_->cg_eta, cfg_->cg_max_iterations);
    std::vector<double> comp(static_cast<std::size_t>(u_.vertices));
    std::vector<double> warm(static_cast<std::size_t>(u_.vertices));
    for (int i = 0; i < u_.m; ++i) {
      for (int v = 0; v < u_.vertices; ++v) warm[static_cast<std::size_t>(v)] = comp[static_cast<std::size_t>(v)] = u_.at(v, i);
      op_->solve_component(comp, &warm);
      for (int v = 0; v < u_.vertices; ++v) u_.at(v, i) = comp[static_cast<std::size_t>(v)];
    }
    J_ = energy(mc, u_, *q_, cfg_->tau);
  }

  const DirichletOperator& op() const { return *op_; }

  /// Vertices incident to a positivity-crossing edge (free-boundary band).
  std::vector<int> fb_band() const {
    PositivityMask pm = positivity_mask_view(u_, cfg_->tau);
    std::vector<uint8_t> in(static_cast<std::size_t>(mc_->vertex_count()), 0);
    for (const Edge& e : mc_->edges)
      if (pm.at(e.i) != pm.at(e.j)) in[static_cast<std::size_t>(e.i)] = in[static_cast<std::size_t>(e.j)] = 1;
    std::vector<int> band;
    for (int v = 0; v < mc_->vertex_count(); ++v)
      if (in[static_cast<std::size_t>(v)]) band.push_back(v);
    return band;
  }

  double min_forced_boundary_distance(const DistanceField& dist) const {
    double d = kInf;
    for (int b : mc_->boundary)
      if (forced_[static_cast<std::size_t>(b)]) d = std::min(d, dist.dist[static_cast<std::size_t>(b)]);
    return d;
  }

 private:
  const MetricComplex* mc_;
  const QField* q_;
  const SolveConfig* cfg_;
  VectorField u_;
  std::vector<uint8_t> allowed_;
  std::vector<uint8_t> forced_;
  std::shared_ptr<DirichletOperator> op_;
  EnergyReport J_;
};

struct FlipCandidate {
  int vertex = -1;
  bool flip_out = false;
  double dj = 0.0;
};

/// Resistance upper bound [S^{-1}]_{vv} <= min-path sum of 1/w from v to the
/// fixed set through free vertices (Rayleigh monotonicity); proves most
/// flip-outs non-improving without touching the factorization.
inline std::vector<double> resistance_bound(const MetricComplex& mc, const DirichletOperator& op) {
  std::vector<double> r(static_cast<std::size_t>(mc.vertex_count()), kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (!op.is_free(v)) {
      r[static_cast<std::size_t>(v)] = 0.0;
      pq.push({0.0, v});
    }
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > r[static_cast<std::size_t>(v)]) continue;
    for (int a = mc.adj_offset[static_cast<std::size_t>(v)]; a < mc.adj_offset[static_cast<std::size_t>(v) + 1]; ++a) {
      int u = mc.adj_vertex[static_cast<std::size_t>(a)];
      if (!op.is_free(u)) continue;
      double nd = d + 1.0 / mc.edges[static_cast<std::size_t>(mc.adj_edge[static_cast<std::size_t>(a)])].w;
      if (nd < r[static_cast<std::size_t>(u)]) {
        r[static_cast<std::size_t>(u)] = nd;
        pq.push({nd, u});
      }
    }
  }
  return r;
}

struct FlipScan {
  std::vector<FlipCandidate> improving;  // dj < -tol, most improving first
  std::vector<FlipCandidate> all;        // every priced candidate, by vertex id
  long evaluated = 0;
  long screened = 0;
  double worst_margin = kInf;
  int worst_vertex = -1;
  bool worst_is_out = false;
};

/// Single-flip energy changes. Exact mode prices every unscreened flip through
/// the factorized bordering identities (the energy of the true re-solve).
/// Fast mode uses the one-vertex competitor bound, an upper bound on the
/// re-solved energy change, so anything it reports improving really improves;
/// the search uses it while it makes progress and finishes with exact sweeps.
inline FlipScan scan_flips(const MaskState& st, double tol, const std::vector<int>& candidates,
                           bool exact) {
  const MetricComplex& mc = st.complex();
  const VectorField& u = st.field();
  const QField& q = st.qfield();
  const SolveConfig& cfg = st.config();
  const DirichletOperator& op = st.op();
  FlipScan out;
  std::vector<int> verts = candidates;
  if (verts.empty()) {
    for (int v = 0; v < mc.vertex_count(); ++v)
      if (!mc.is_boundary(v)) verts.push_back(v);
  }
  std::vector<double> rbound;
  auto consider = [&](double dj, int v, bool is_out) {
    if (dj < out.worst_margin) {
      out.worst_margin = dj;
      out.worst_vertex = v;
      out.worst_is_out = is_out;
    }
    out.all.push_back({v, is_out, dj});
    if (dj < -tol) out.improving.push_back({v, is_out, dj});
  };
  for (int v : verts) {
    if (mc.is_boundary(v)) continue;
    double m = mc.mass[static_cast<std::size_t>(v)];
    double qv = q.at(v);
    double svv = 0.0;
    std::vector<double> s(static_cast<std::size_t>(u.m), 0.0);
    for (int a = mc.adj_offset[static_cast<std::size_t>(v)]; a < mc.adj_offset[static_cast<std::size_t>(v) + 1]; ++a) {
      const Edge& e = mc.edges[static_cast<std::size_t>(mc.adj_edge[static_cast<std::size_t>(a)])];
      int w = mc.adj_vertex[static_cast<std::size_t>(a)];
      svv += e.w;
      for (int i = 0; i < u.m; ++i) s[static_cast<std::size_t>(i)] += e.w * u.at(w, i);
    }
    double s2 = 0.0;
    for (int i = 0; i < u.m; ++i) s2 += sq(s[static_cast<std::size_t>(i)]);

    if (op.is_free(v)) {
      // flip out: pin v to zero
      double un2 = 0.0;
      for (int i = 0; i < u.m; ++i) un2 += sq(u.at(v, i));
      double bulk_gain = (std::sqrt(un2) > cfg.tau) ? m * qv : 0.0;
      if (bulk_gain == 0.0) {
        ++out.screened;  // zeroing an already-zero vertex cannot lower J
        continue;
      }
      if (exact) {
        if (rbound.empty()) rbound = resistance_bound(mc, op);
        if (un2 >= bulk_gain * rbound[static_cast<std::size_t>(v)]) {
          ++out.screened;
          continue;
        }
        double alpha = op.diag_inverse(v);
        ++out.evaluated;
        consider(un2 / alpha - bulk_gain, v, true);
      } else {
        // explicit competitor: set u_v = 0, keep the rest
        double dd = 0.0;
        for (int a = mc.adj_offset[static_cast<std::size_t>(v)]; a < mc.adj_offset[static_cast<std::size_t>(v) + 1]; ++a) {
          const Edge& e = mc.edges[static_cast<std::size_t>(mc.adj_edge[static_cast<std::size_t>(a)])];
          int w = mc.adj_vertex[static_cast<std::size_t>(a)];
          for (int i = 0; i < u.m; ++i) dd += e.w * (sq(u.at(w, i)) - sq(u.at(v, i) - u.at(w, i)));
        }
        ++out.evaluated;
        consider(dd - bulk_gain, v, true);
      }
    } else {
      // flip in: free v; optimal one-vertex value is s_i / pivot
      if (s2 == 0.0) {
        ++out.screened;  // isolated zero vertex: freeing it changes nothing
        continue;
      }
      double pivot = svv;
      if (exact) {
        pivot = op.schur_complement(v);
        ++out.evaluated;
      } else {
        ++out.evaluated;
      }
      double norm_new = std::sqrt(s2) / pivot;
      double bulk_cost = (norm_new > cfg.tau) ? m * qv : 0.0;
      consider(-s2 / pivot + bulk_cost, v, false);
    }
  }
  std::sort(out.improving.begin(), out.improving.end(),
            [](const FlipCandidate& a, const FlipCandidate& b) {
              return a.dj != b.dj ? a.dj < b.dj : a.vertex < b.vertex;
            });
  return out;
}

struct CutoffMove {
  int center = -1;
  double r = 0.0;
  double theta = 0.0;
  double dj = 0.0;  // energy change of the explicit competitor
  double fdist = 0.0;
  bool feasible = false;
};

/// Energy change of the explicit radial-cutoff competitor
/// v = min(u, M psi_theta(rho/r)) inside B_r(x0), evaluated locally on the
/// ball with no solve. Admissible whenever B_r avoids boundary vertices that
/// carry positive data (zero-data boundary vertices stay zero either way).
inline CutoffMove eval_cutoff(const MaskState& st, const DistanceField& dist, int x0, double r,
                              double theta, bool want_field_dist) {
  const MetricComplex& mc = st.complex();
  const VectorField& u = st.field();
  const QField& q = st.qfield();
  const SolveConfig& cfg = st.config();
  CutoffMove mv;
  mv.center = x0;
  mv.r = r;
  mv.theta = theta;
  if (st.min_forced_boundary_distance(dist) < r) return mv;
  std::vector<int> inside = ball(mc, dist, r);
  if (inside.empty()) return mv;
  double M = sup_on(u, inside);
  int N = mc.intrinsic_dim;
  double K = mc.curvature_bound;
  std::vector<double> newval(inside.size() * static_cast<std::size_t>(u.m));
  std::vector<int> pos(static_cast<std::size_t>(mc.vertex_count()), -1);
  for (std::size_t k = 0; k < inside.size(); ++k) pos[static_cast<std::size_t>(inside[k])] = static_cast<int>(k);
  KahanSum dj;
  for (std::size_t k = 0; k < inside.size(); ++k) {
    int v = inside[k];
    double cap = M * psi_theta_value(dist.dist[static_cast<std::size_t>(v)] / r, theta, N, K);
    double old2 = 0.0, new2 = 0.0;
    for (int i = 0; i < u.m; ++i) {
      double ov = u.at(v, i);
      double nv = std::min(ov, cap);
      newval[k * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(i)] = nv;
      old2 += sq(ov);
      new2 += sq(nv);
    }
    bool om = std::sqrt(old2) > cfg.tau;
    bool nm = std::sqrt(new2) > cfg.tau;
    if (om != nm) dj.add((nm ? 1.0 : -1.0) * mc.mass[static_cast<std::size_t>(v)] * q.at(v));
  }
  auto val = [&](int v, int i) {
    int k = pos[static_cast<std::size_t>(v)];
    return k >= 0 ? newval[static_cast<std::size_t>(k) * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(i)]
                  : u.at(v, i);
  };
  for (std::size_t k = 0; k < inside.size(); ++k) {
    int v = inside[k];
    for (int a = mc.adj_offset[static_cast<std::size_t>(v)]; a < mc.adj_offset[static_cast<std::size_t>(v) + 1]; ++a) {
      int w = mc.adj_vertex[static_cast<std::size_t>(a)];
      if (pos[static_cast<std::size_t>(w)] >= 0 && w < v) continue;  // interior edges once
      const Edge& e = mc.edges[static_cast<std::size_t>(mc.adj_edge[static_cast<std::size_t>(a)])];
      for (int i = 0; i < u.m; ++i) {
        double od = u.at(v, i) - u.at(w, i);
        double nd = val(v, i) - val(w, i);
        dj.add(e.w * (sq(nd) - sq(od)));
      }
    }
  }
  mv.dj = dj.value();
  mv.feasible = true;
  if (want_field_dist) {
    VectorField comp = u;
    for (std::size_t k = 0; k < inside.size(); ++k)
      for (int i = 0; i < u.m; ++i)
        comp.at(inside[k], i) = newval[k * static_cast<std::size_t>(u.m) + static_cast<std::size_t>(i)];
    mv.fdist = field_dist(mc, u, comp, cfg.tau);
  }
  return mv;
}

/// Vertices killed by the cutoff competitor: its positivity set, not the
/// open ball, is what the mask move must commit (a vertex sitting exactly on
/// the theta*r sphere is zeroed by psi but missed by a strict ball test, and
/// that one-shell disagreement can flip the sign of the move).
inline std::vector<int> cutoff_dead_vertices(const MaskState& st, const DistanceField& dist,
                                             double r, double theta) {
  const MetricComplex& mc = st.complex();
  const VectorField& u = st.field();
  std::vector<int> inside = ball(mc, dist, r);
  if (inside.empty()) return {};
  double M = sup_on(u, inside);
  std::vector<int> dead;
  for (int v : inside) {
    double cap = M * psi_theta_value(dist.dist[static_cast<std::size_t>(v)] / r, theta,
                                     mc.intrinsic_dim, mc.curvature_bound);
    double n2 = 0.0;
    for (int i = 0; i < u.m; ++i) n2 += sq(std::min(u.at(v, i), cap));
    if (!(std::sqrt(n2) > st.config().tau)) dead.push_back(v);
  }
  return dead;
}

/// Harmonic replacement on B_r(x0): every interior ball vertex is freed and
/// re-solved against the outside field. Grows the positivity set; exact via a
/// patch solve.
inline double eval_replacement(const MaskState& st, const DistanceField& dist, double r,
                               VectorField* out_field) {
  const MetricComplex& mc = st.complex();
  const VectorField& u = st.field();
  const SolveConfig& cfg = st.config();
  std::vector<uint8_t> free_mask(static_cast<std::size_t>(mc.vertex_count()), 0);
  int count = 0;
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (dist.dist[static_cast<std::size_t>(v)] < r && !mc.is_boundary(v)) {
      free_mask[static_cast<std::size_t>(v)] = 1;
      ++count;
    }
  if (count == 0) {
    if (out_field) *out_field = u;
    return 0.0;
  }
  DirichletOperator patch(mc, free_mask, cfg.cg_eta, cfg.cg_max_iterations);
  VectorField repl = u;
  std::vector<double> comp(static_cast<std::size_t>(u.vertices));
  std::vector<double> warm(static_cast<std::size_t>(u.vertices));
  for (int i = 0; i < u.m; ++i) {
    for (int v = 0; v < u.vertices; ++v) warm[static_cast<std::size_t>(v)] = comp[static_cast<std::size_t>(v)] = u.at(v, i);
    patch.solve_component(comp, &warm);
    for (int v = 0; v < u.vertices; ++v) repl.at(v, i) = comp[static_cast<std::size_t>(v)];
  }
  double dj = energy(mc, repl, st.qfield(), cfg.tau).total - st.report().total;
  if (out_field) *out_field = std::move(repl);
  return dj;
}

/// Applies a batch of non-adjacent improving flips (most improving first),
/// verified against the exact re-solved energy; falls back to the single best
/// flip if the batch interaction spoiled the gain. Returns false if even the
/// single flip failed to improve (spurious fast-mode candidate).
inline bool apply_flip_batch(MaskState& st, const std::vector<FlipCandidate>& improving) {
  const MetricComplex& mc = st.complex();
  double J_before = st.J();
  std::vector<uint8_t> allowed = st.allowed();
  std::vector<uint8_t> touched(static_cast<std::size_t>(mc.vertex_count()), 0);
  for (const FlipCandidate& fc : improving) {
    if (touched[static_cast<std::size_t>(fc.vertex)]) continue;
    bool clash = false;
    for (int a = mc.adj_offset[static_cast<std::size_t>(fc.vertex)]; a < mc.adj_offset[static_cast<std::size_t>(fc.vertex) + 1]; ++a)
      if (touched[static_cast<std::size_t>(mc.adj_vertex[static_cast<std::size_t>(a)])]) {
        clash = true;
        break;
      }
    if (clash) continue;
    allowed[static_cast<std::size_t>(fc.vertex)] = fc.flip_out ? 0 : 1;
    touched[static_cast<std::size_t>(fc.vertex)] = 1;
    for (int a = mc.adj_offset[static_cast<std::size_t>(fc.vertex)]; a < mc.adj_offset[static_cast<std::size_t>(fc.vertex) + 1]; ++a)
      touched[static_cast<std::size_t>(mc.adj_vertex[static_cast<std::size_t>(a)])] = 1;
  }
  MaskState trial = st;
  trial.set_mask(allowed);
  if (trial.J() < J_before) {
    st = std::move(trial);
    return true;
  }
  const FlipCandidate& fc = improving.front();
  std::vector<uint8_t> single = st.allowed();
  single[static_cast<std::size_t>(fc.vertex)] = fc.flip_out ? 0 : 1;
  MaskState strial = st;
  strial.set_mask(single);
  if (strial.J() < J_before) {
    st = std::move(strial);
    return true;
  }
  return false;
}

struct SearchOutcome {
  int accepted = 0;
  bool converged = false;
};

/// The shared local-search loop over positivity sets. Per round: fast flip
/// batches on the band; sampled radial-cutoff competitors (committed through
/// their own dead set, so the re-solve can only improve on the competitor
/// bound); when those stall, exact re-solves of the best few cutoff
/// candidates -- a flat interface is pinned for single flips and the explicit
/// psi-cap overestimates the cost of moving it, so only the re-solved ball
/// removal can unpin it; then sampled harmonic replacements (growth); finally
/// an exact bordering sweep over every interior vertex gates termination.
inline SearchOutcome mask_local_search(MaskState& st, const SolveConfig& cfg, Rng& rng,
                                       int max_moves, std::vector<double>& trace);

/// Band plus one ring of neighbors; empty result means "use all interior".
inline std::vector<int> band_candidates(const MaskState& st) {
  const MetricComplex& mc = st.complex();
  std::vector<int> band = st.fb_band();
  std::vector<uint8_t> take(static_cast<std::size_t>(mc.vertex_count()), 0);
  for (int v : band) {
    take[static_cast<std::size_t>(v)] = 1;
    for (int a = mc.adj_offset[static_cast<std::size_t>(v)]; a < mc.adj_offset[static_cast<std::size_t>(v) + 1]; ++a)
      take[static_cast<std::size_t>(mc.adj_vertex[static_cast<std::size_t>(a)])] = 1;
  }
  std::vector<int> cand;
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (take[static_cast<std::size_t>(v)] && !mc.is_boundary(v)) cand.push_back(v);
  return cand;
}

inline SearchOutcome mask_local_search(MaskState& st, const SolveConfig& cfg, Rng& rng,
                                       int max_moves, std::vector<double>& trace) {
  const MetricComplex& mc = st.complex();
  double h = median_edge_length(mc);
  double diam = approx_diameter(mc);
  SearchOutcome out;

  while (out.accepted < max_moves) {
    double tol = cfg.tol_cert_rel * std::abs(st.J());
    double J_before = st.J();
    auto try_mask = [&](const std::vector<uint8_t>& allowed) -> bool {
      MaskState trial = st;
      trial.set_mask(allowed);
      if (trial.J() < J_before) {
        st = std::move(trial);
        return true;
      }
      return false;
    };
    bool progressed = false;

    // fast flips on the band
    FlipScan scan = scan_flips(st, tol, band_candidates(st), false);
    if (!scan.improving.empty()) progressed = apply_flip_batch(st, scan.improving);

    // coordinated band batches: a flat interface is pinned for single flips
    // (each one raises the Dirichlet term more than the bulk it saves), but
    // retiring or admitting the most marginal part of the band translates or
    // straightens it. Prefix batches of the dj-sorted band candidates at
    // several granularities, each verified against the exact re-solved
    // energy: the full prefix moves a flat layer, the fractional ones clean
    // ragged interfaces one coherent chunk at a time.
    if (!progressed) {
      std::vector<uint8_t> in_band(static_cast<std::size_t>(mc.vertex_count()), 0);
      for (int v : st.fb_band()) in_band[static_cast<std::size_t>(v)] = 1;
      auto prefix_moves = [&](bool outs) -> bool {
        // rank by the field magnitude (outs) or by the incident pull (ins):
        // vertices of one interface layer share that key, so the layer is a
        // prefix of the order, which a dj ranking cannot guarantee
        std::vector<std::pair<double, int>> cand;
        for (const FlipCandidate& fc : scan.all) {
          if (fc.flip_out != outs || !in_band[static_cast<std::size_t>(fc.vertex)]) continue;
          double key;
          if (outs) {
            key = st.field().norm_at(fc.vertex);
          } else {
            double s2 = 0.0;
            for (int a = mc.adj_offset[static_cast<std::size_t>(fc.vertex)]; a < mc.adj_offset[static_cast<std::size_t>(fc.vertex) + 1]; ++a) {
              const Edge& e = mc.edges[static_cast<std::size_t>(mc.adj_edge[static_cast<std::size_t>(a)])];
              int w = mc.adj_vertex[static_cast<std::size_t>(a)];
              for (int i = 0; i < st.field().m; ++i) s2 += sq(e.w * st.field().at(w, i));
            }
            key = -s2;  // strongest pull first
          }
          cand.push_back({key, fc.vertex});
        }
        if (cand.empty()) return false;
        std::sort(cand.begin(), cand.end());
        // cut points: every small prefix (a stray protrusion is jointly
        // improving though none of its flips is), natural breaks in the key,
        // and dyadic fractions (layer translation)
        std::vector<std::size_t> cuts;
        auto push_cut = [&cuts, &cand](std::size_t c) {
          if (c > 0 && c <= cand.size() && std::find(cuts.begin(), cuts.end(), c) == cuts.end())
            cuts.push_back(c);
        };
        for (std::size_t c = 1; c <= 8; ++c) push_cut(c);
        int breaks = 0;
        for (std::size_t k = 0; k + 1 < cand.size() && breaks < 8; ++k)
          if (std::abs(cand[k + 1].first) > 1.15 * std::abs(cand[k].first) + 1e-300) {
            push_cut(k + 1);
            ++breaks;
          }
        for (std::size_t denom : {1, 2, 4, 8}) push_cut(cand.size() / denom);
        if (cuts.size() > 24) cuts.resize(24);
        for (std::size_t count : cuts) {
          std::vector<uint8_t> allowed = st.allowed();
          for (std::size_t k = 0; k < count; ++k)
            allowed[static_cast<std::size_t>(cand[k].second)] = outs ? 0 : 1;
          if (try_mask(allowed)) return true;
        }
        return false;
      };
      progressed = prefix_moves(true) || prefix_moves(false);
    }

    // level-set snaps: masks {|u| > c} for a few levels near the interface
    // scale. The solved field's level sets follow the correct interface
    // geometry, so these proposals straighten terraced interfaces that
    // single-direction batches cannot reach (mixed admit/retire in one move).
    if (!progressed) {
      std::vector<double> band_vals;
      for (int v : st.fb_band())
        if (st.field().norm_at(v) > cfg.tau) band_vals.push_back(st.field().norm_at(v));
      if (!band_vals.empty()) {
        std::nth_element(band_vals.begin(), band_vals.begin() + static_cast<std::ptrdiff_t>(band_vals.size() / 2),
                         band_vals.end());
        double scale = band_vals[band_vals.size() / 2];
        for (double f : {0.5, 1.0, 1.5, 2.0, 3.0}) {
          double c = f * scale;
          std::vector<uint8_t> allowed(static_cast<std::size_t>(mc.vertex_count()), 0);
          for (int v = 0; v < mc.vertex_count(); ++v)
            if (st.field().norm_at(v) > c) allowed[static_cast<std::size_t>(v)] = 1;
          if (try_mask(allowed)) {
            progressed = true;
            break;
          }
        }
      }
    }

    // sampled cutoffs: competitor bound first, exact re-solve escalation after
    if (!progressed) {
      std::vector<int> centers = st.fb_band();
      seeded_shuffle(centers, rng);
      if (static_cast<int>(centers.size()) > cfg.ball_centers_per_round)
        centers.resize(static_cast<std::size_t>(cfg.ball_centers_per_round));
      std::sort(centers.begin(), centers.end());
      std::vector<DistanceField> dists;
      std::vector<CutoffMove> moves;
      std::vector<std::size_t> move_dist;
      for (int c : centers) {
        DistanceField dist = geodesic_distances(mc, c);
        double cap = std::min(0.5 * diam, st.min_forced_boundary_distance(dist) - 0.5 * h);
        bool used = false;
        for (double r = 4.0 * h; r <= cap; r *= 2.0)
          for (double theta : cfg.thetas) {
            CutoffMove mv = eval_cutoff(st, dist, c, r, theta, false);
            if (!mv.feasible) continue;
            moves.push_back(mv);
            move_dist.push_back(dists.size());
            used = true;
          }
        if (used) dists.push_back(std::move(dist));
      }
      std::vector<std::size_t> order(moves.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return moves[a].dj != moves[b].dj ? moves[a].dj < moves[b].dj
                                          : moves[a].center < moves[b].center;
      });
      auto commit_cutoff = [&](const CutoffMove& mv, const DistanceField& dist) -> bool {
        std::vector<uint8_t> allowed = st.allowed();
        for (int v : cutoff_dead_vertices(st, dist, mv.r, mv.theta))
          if (!st.forced(v)) allowed[static_cast<std::size_t>(v)] = 0;
        return try_mask(allowed);
      };
      if (!order.empty() && moves[order[0]].dj < -tol)
        progressed = commit_cutoff(moves[order[0]], dists[move_dist[order[0]]]);
      if (!progressed) {
        // pinning escape: exact re-solve of the most promising candidates
        int tried = 0;
        for (std::size_t k : order) {
          if (tried >= cfg.cutoff_exact_candidates) break;
          ++tried;
          if (commit_cutoff(moves[k], dists[move_dist[k]])) {
            progressed = true;
            break;
          }
        }
      }
      // growth: sampled harmonic replacements
      if (!progressed) {
        double best_repl = kInf;
        VectorField best_field;
        for (int c : centers) {
          DistanceField dist = geodesic_distances(mc, c);
          double cap = std::min(0.25 * diam, st.min_forced_boundary_distance(dist) - 0.5 * h);
          for (double r = 4.0 * h; r <= cap; r *= 4.0) {
            VectorField repl;
            double dj = eval_replacement(st, dist, r, &repl);
            if (dj < best_repl) {
              best_repl = dj;
              best_field = std::move(repl);
            }
          }
        }
        if (best_repl < -tol) {
          std::vector<uint8_t> allowed = st.allowed();
          for (int v = 0; v < mc.vertex_count(); ++v)
            if (best_field.norm_at(v) > cfg.tau) allowed[static_cast<std::size_t>(v)] = 1;
          progressed = try_mask(allowed);
        }
      }
    }

    if (!progressed) {
      // exact stability sweep over all interior vertices
      FlipScan full = scan_flips(st, tol, {}, true);
      if (!full.improving.empty()) progressed = apply_flip_batch(st, full.improving);
      if (!progressed) {
        out.converged = true;
        break;
      }
    }

    ++out.accepted;
    require(st.J() <= J_before, "mask search: energy increased across an accepted move");
    trace.push_back(st.J());
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Set-move solver
// ---------------------------------------------------------------------------

/// Local search over positivity sets with exact re-solved energies: single
/// vertex flips, sampled radial-cutoff removals and sampled harmonic
/// replacement growth. Fast competitor bounds drive the descent; exact
/// bordering sweeps (all interior vertices) gate termination. Every accepted
/// move re-solves and verifies that J dropped, so the trace is monotone by
/// construction.
inline SolveResult solve_setmove(const MetricComplex& mc, const QField& q, const VectorField& g,
                                 const PositivityMask& init, const SolveConfig& cfg) {
  check_shapes(mc, g);
  validate_nonnegative(g);
  require(init.mask.size() == static_cast<std::size_t>(mc.vertex_count()),
          "solve_setmove: init mask size mismatch");
  detail::MaskState st(mc, q, g, cfg);
  {
    auto forced = detail::forced_boundary_mask(mc, g, cfg.tau);
    for (int v = 0; v < mc.vertex_count(); ++v)
      require(!forced[static_cast<std::size_t>(v)] || init.mask[static_cast<std::size_t>(v)] != 0,
              "solve_setmove: init mask drops a boundary vertex with positive data");
  }
  st.set_mask(init.mask);
  Rng rng(cfg.seed);
  SolveResult res;
  res.energy_trace.push_back(st.J());
  detail::SearchOutcome outcome = detail::mask_local_search(st, cfg, rng, cfg.max_moves, res.energy_trace);
  res.accepted_moves = outcome.accepted;
  bool converged = outcome.converged;

  res.u = st.field();
  impose_boundary(mc, res.u);
  res.mask = positivity_mask(res.u, cfg.tau);
  res.energy = energy(mc, res.u, q, cfg.tau);
  res.converged = converged;
  return res;
}

// ---------------------------------------------------------------------------
// Relaxed continuation solver
// ---------------------------------------------------------------------------

/// Continuation over the clamp width eps: preconditioned projected descent on
/// the relaxed energy at each stage, then snap-then-mask, one harmonic
/// replacement per component on the final positivity set, and an exact-energy
/// flip polish so the output is stable against single flips (anything less
/// leaves an improving flip of order h^2, far above the certificate slack).
inline SolveResult solve_relaxed(const MetricComplex& mc, const QField& q, const VectorField& g,
                                 const SolveConfig& cfg) {
  check_shapes(mc, g);
  validate_nonnegative(g);
  double h = median_edge_length(mc);
  double diam = approx_diameter(mc);

  VectorField u = harmonic_extension(mc, g, cfg.cg_eta, cfg.cg_max_iterations);
  for (double& x : u.values) x = std::max(x, 0.0);
  impose_boundary(mc, u);

  std::vector<int> free_ids;
  std::vector<int> idx(static_cast<std::size_t>(mc.vertex_count()), -1);
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (!mc.is_boundary(v)) {
      idx[static_cast<std::size_t>(v)] = static_cast<int>(free_ids.size());
      free_ids.push_back(v);
    }

  bool descent_converged = true;
  for (double eps : cfg.eps_schedule(diam, h)) {
    // quasi-Newton direction: stiffness plus the clamp's slope scale, factored
    // once per stage
    Eigen::SparseMatrix<double> P(static_cast<int>(free_ids.size()), static_cast<int>(free_ids.size()));
    {
      std::vector<Eigen::Triplet<double>> trip;
      std::vector<double> diag(free_ids.size(), 0.0);
      for (const Edge& e : mc.edges) {
        int fi = idx[static_cast<std::size_t>(e.i)], fj = idx[static_cast<std::size_t>(e.j)];
        if (fi >= 0) diag[static_cast<std::size_t>(fi)] += 2.0 * e.w;
        if (fj >= 0) diag[static_cast<std::size_t>(fj)] += 2.0 * e.w;
        if (fi >= 0 && fj >= 0) {
          trip.emplace_back(fi, fj, -2.0 * e.w);
          trip.emplace_back(fj, fi, -2.0 * e.w);
        }
      }
      for (std::size_t k = 0; k < free_ids.size(); ++k) {
        diag[k] += mc.mass[static_cast<std::size_t>(free_ids[k])] * q.at(free_ids[k]) / eps;
        trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag[k]);
      }
      P.setFromTriplets(trip.begin(), trip.end());
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(P);
    require(ldlt.info() == Eigen::Success, "solve_relaxed: preconditioner factorization failed");

    double f = relaxed_energy(mc, u, q, eps);
    bool stage_done = false;
    int it = 0;
    for (; it < cfg.max_descent_iterations && !stage_done; ++it) {
      LaplacianMeasure lm = laplacian_measure(mc, u);
      Eigen::MatrixXd grad(static_cast<Eigen::Index>(free_ids.size()), u.m);
      for (std::size_t k = 0; k < free_ids.size(); ++k) {
        int v = free_ids[k];
        double nv = u.norm_at(v);
        double bulk_slope =
            (nv > 0.0 && nv < eps) ? mc.mass[static_cast<std::size_t>(v)] * q.at(v) / (eps * nv) : 0.0;
        for (int i = 0; i < u.m; ++i)
          grad(static_cast<Eigen::Index>(k), i) = -2.0 * lm.at(v, i) + bulk_slope * u.at(v, i);
      }
      Eigen::MatrixXd dir = ldlt.solve(grad);
      bool accepted = false;
      for (double t = 1.0; t >= 1e-16; t *= 0.5) {
        VectorField trial = u;
        for (std::size_t k = 0; k < free_ids.size(); ++k)
          for (int i = 0; i < u.m; ++i)
            trial.at(free_ids[k], i) =
                std::max(u.at(free_ids[k], i) - t * dir(static_cast<Eigen::Index>(k), i), 0.0);
        KahanSum decrease;  // <grad, u - trial> over the free entries
        for (std::size_t k = 0; k < free_ids.size(); ++k)
          for (int i = 0; i < u.m; ++i)
            decrease.add(grad(static_cast<Eigen::Index>(k), i) *
                         (u.at(free_ids[k], i) - trial.at(free_ids[k], i)));
        if (decrease.value() <= 0.0) break;  // projected direction stalled
        double ft = relaxed_energy(mc, trial, q, eps);
        if (ft <= f - cfg.armijo * decrease.value()) {
          double drop = f - ft;
          u = std::move(trial);
          f = ft;
          accepted = true;
          if (drop <= cfg.descent_tol * std::max(1.0, std::abs(f))) stage_done = true;
          break;
        }
      }
      if (!accepted) stage_done = true;  // stationary at this eps
    }
    if (it >= cfg.max_descent_iterations && !stage_done) descent_converged = false;
  }

  // snap-then-mask, harmonic replacement on the final set (the mask solve),
  // then the exact local-search polish: the descent parks the interface
  // within a few layers of the optimum, and flat interfaces are pinned for
  // single flips, so the polish needs the full move catalogue to finish
  PositivityMask pm = positivity_mask(u, cfg.tau);
  detail::MaskState st(mc, q, g, cfg);
  st.set_mask(pm.mask);
  SolveResult res;
  res.energy_trace.push_back(st.J());
  Rng rng(cfg.seed);
  detail::SearchOutcome outcome = detail::mask_local_search(st, cfg, rng, cfg.max_moves, res.energy_trace);
  res.accepted_moves = outcome.accepted;
  bool polish_converged = outcome.converged;

  res.u = st.field();
  impose_boundary(mc, res.u);
  res.mask = positivity_mask(res.u, cfg.tau);
  res.energy = energy(mc, res.u, q, cfg.tau);
  res.converged = descent_converged && polish_converged;
  return res;
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

struct OracleResult {
  PositivityMask mask;  // enumerated support (lexicographically smallest optimum)
  double energy = 0.0;
  long masks_tried = 0;
};

/// Ground truth on small instances: enumerate admissible supports, solve each
/// Dirichlet problem, take the global minimum. Chains of any length are
/// enumerated over boundary-anchored interval supports; general complexes up
/// to 16 interior vertices get the full power set.
inline OracleResult brute_force_oracle(const MetricComplex& mc, const QField& q,
                                       const VectorField& g, const SolveConfig& cfg = {}) {
  check_shapes(mc, g);
  auto forced = detail::forced_boundary_mask(mc, g, cfg.tau);
  std::vector<int> interior;
  for (int v = 0; v < mc.vertex_count(); ++v)
    if (!mc.is_boundary(v)) interior.push_back(v);

  OracleResult best;
  best.energy = kInf;
  auto id_list = [](const std::vector<uint8_t>& mask) {
    std::vector<int> ids;
    for (std::size_t v = 0; v < mask.size(); ++v)
      if (mask[v]) ids.push_back(static_cast<int>(v));
    return ids;
  };
  auto offer = [&](const std::vector<uint8_t>& allowed) {
    ++best.masks_tried;
    detail::MaskState st(mc, q, g, cfg);
    st.set_mask(allowed);
    double J = st.J();
    double slack =
        std::isfinite(best.energy) ? 1e-15 * std::max(1.0, std::abs(best.energy)) : 0.0;
    if (J < best.energy - slack) {
      best.energy = J;
      best.mask.mask = allowed;
      best.mask.tau = cfg.tau;
    } else if (J <= best.energy + slack && !best.mask.mask.empty()) {
      // deterministic tie-break: lexicographically smallest sorted id list
      std::vector<int> a = id_list(allowed), b = id_list(best.mask.mask);
      if (std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()))
        best.mask.mask = allowed;
    }
  };

  if (mc.chart == ChartKind::line) {
    int n = mc.vertex_count();
    int n_int = static_cast<int>(interior.size());
    bool left = forced[0] != 0;
    bool right = forced[static_cast<std::size_t>(n - 1)] != 0;
    std::vector<uint8_t> base(static_cast<std::size_t>(n), 0);
    for (int v = 0; v < n; ++v)
      if (forced[static_cast<std::size_t>(v)]) base[static_cast<std::size_t>(v)] = 1;
    int lmax = left ? n_int : 0;
    int rmax = right ? n_int : 0;
    for (int l = 0; l <= lmax; ++l)
      for (int r = 0; r <= rmax; ++r) {
        if (l + r > n_int) continue;
        std::vector<uint8_t> allowed = base;
        for (int k = 0; k < l; ++k) allowed[static_cast<std::size_t>(interior[static_cast<std::size_t>(k)])] = 1;
        for (int k = 0; k < r; ++k)
          allowed[static_cast<std::size_t>(interior[static_cast<std::size_t>(n_int - 1 - k)])] = 1;
        offer(allowed);
      }
  } else {
    require(interior.size() <= 16,
            "brute_force_oracle: general enumeration limited to 16 interior vertices, got " +
                std::to_string(interior.size()));
    std::uint64_t total = 1ull << interior.size();
    for (std::uint64_t bits = 0; bits < total; ++bits) {
      std::vector<uint8_t> allowed(static_cast<std::size_t>(mc.vertex_count()), 0);
      for (int v = 0; v < mc.vertex_count(); ++v)
        if (forced[static_cast<std::size_t>(v)]) allowed[static_cast<std::size_t>(v)] = 1;
      for (std::size_t b = 0; b < interior.size(); ++b)
        if (bits & (1ull << b)) allowed[static_cast<std::size_t>(interior[b])] = 1;
      offer(allowed);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Certification
// ---------------------------------------------------------------------------

/// Evaluates the competitor catalogue at a candidate minimizer: the full-set
/// harmonic re-solve, all single flips (exact via bordering, screened through
/// the resistance bound), radial cutoffs on a center x radius x theta grid,
/// tent truncations at band vertices, and harmonic replacements on sampled
/// balls. Valid iff every margin clears -tol_cert, tol_cert = tol_cert_rel * |J|.
inline MinimizerCertificate certify(const MetricComplex& mc, const VectorField& u, const QField& q,
                                    const SolveConfig& cfg) {
  check_shapes(mc, u);
  validate_nonnegative(u);
  double J_u = energy(mc, u, q, cfg.tau).total;
  PositivityMask pm = positivity_mask_view(u, cfg.tau);
  detail::MaskState st(mc, q, u, cfg);
  st.set_mask(pm.mask);

  MinimizerCertificate cert;
  cert.energy = J_u;
  cert.tol_cert = cfg.tol_cert_rel * std::abs(J_u);
  Rng rng(cfg.seed);
  double h = median_edge_length(mc);
  double diam = approx_diameter(mc);
  std::vector<int> band = st.fb_band();

  // 0. harmonic re-solve on the field's own positivity set; for a candidate
  // already harmonic there this margin is ~0, otherwise it is negative and
  // the certificate fails (the field is not even Dirichlet-optimal)
  {
    MoveClassReport rep;
    rep.name = "resolve";
    rep.evaluated = 1;
    rep.worst_margin = st.J() - J_u;
    rep.field_dist_at_worst = field_dist(mc, u, st.field(), cfg.tau);
    cert.classes.push_back(rep);
  }
  bool self_consistent = std::abs(st.J() - J_u) <= std::max(cert.tol_cert, 1e-12 * std::abs(J_u) + 1e-300);

  // 1. single-vertex flips (exact against the solved state)
  {
    MoveClassReport rep;
    rep.name = "flip";
    detail::FlipScan scan = detail::scan_flips(st, cert.tol_cert, {}, true);
    rep.evaluated = scan.evaluated;
    rep.screened = scan.screened;
    rep.worst_margin = scan.evaluated > 0 ? scan.worst_margin : (scan.screened > 0 ? 0.0 : kInf);
    if (scan.worst_vertex >= 0 && scan.evaluated > 0) {
      std::vector<uint8_t> allowed = st.allowed();
      allowed[static_cast<std::size_t>(scan.worst_vertex)] = scan.worst_is_out ? 0 : 1;
      detail::MaskState trial = st;
      trial.set_mask(allowed);
      rep.field_dist_at_worst = field_dist(mc, st.field(), trial.field(), cfg.tau);
    }
    cert.classes.push_back(rep);
  }

  auto pick_centers = [&](int cap) {
    std::vector<int> centers = band;
    if (cap > 0 && static_cast<int>(centers.size()) > cap) {
      detail::seeded_shuffle(centers, rng);
      centers.resize(static_cast<std::size_t>(cap));
    }
    std::sort(centers.begin(), centers.end());
    return centers;
  };

  // 2. radial cutoff competitors (explicit fields, no solve)
  {
    MoveClassReport rep;
    rep.name = "cutoff";
    for (int c : pick_centers(cfg.certify_cutoff_centers)) {
      DistanceField dist = geodesic_distances(mc, c);
      double cap = std::min(0.5 * diam, st.min_forced_boundary_distance(dist) - 0.5 * h);
      for (double r = 4.0 * h; r <= cap; r *= 2.0)
        for (double theta : cfg.thetas) {
          detail::CutoffMove mv = detail::eval_cutoff(st, dist, c, r, theta, true);
          if (!mv.feasible) continue;
          ++rep.evaluated;
          if (mv.dj < rep.worst_margin) {
            rep.worst_margin = mv.dj;
            rep.field_dist_at_worst = mv.fdist;
          }
        }
    }
    cert.classes.push_back(rep);
  }

  // 3. tent truncations (u_i - delta * hat_v)^+ at band vertices
  {
    MoveClassReport rep;
    rep.name = "truncation";
    int worst_c = -1, worst_i = 0;
    double worst_delta = 0.0;
    for (int c : pick_centers(cfg.certify_truncation_centers)) {
      if (mc.is_boundary(c)) continue;
      for (double delta : {h, 4.0 * h})
        for (int i = 0; i < u.m; ++i) {
          double old_v = st.field().at(c, i);
          double new_v = std::max(old_v - delta, 0.0);
          if (new_v == old_v) {
            ++rep.screened;
            continue;
          }
          ++rep.evaluated;
          KahanSum dj;
          for (int a = mc.adj_offset[static_cast<std::size_t>(c)]; a < mc.adj_offset[static_cast<std::size_t>(c) + 1]; ++a) {
            const Edge& e = mc.edges[static_cast<std::size_t>(mc.adj_edge[static_cast<std::size_t>(a)])];
            int w = mc.adj_vertex[static_cast<std::size_t>(a)];
            double nb = st.field().at(w, i);
            dj.add(e.w * (sq(new_v - nb) - sq(old_v - nb)));
          }
          double old2 = 0.0, new2 = 0.0;
          for (int k = 0; k < u.m; ++k) {
            old2 += sq(st.field().at(c, k));
            new2 += sq(k == i ? new_v : st.field().at(c, k));
          }
          if ((std::sqrt(old2) > cfg.tau) && !(std::sqrt(new2) > cfg.tau))
            dj.add(-mc.mass[static_cast<std::size_t>(c)] * q.at(c));
          if (dj.value() < rep.worst_margin) {
            rep.worst_margin = dj.value();
            worst_c = c;
            worst_i = i;
            worst_delta = delta;
          }
        }
    }
    if (worst_c >= 0) {
      VectorField comp = st.field();
      comp.at(worst_c, worst_i) = std::max(comp.at(worst_c, worst_i) - worst_delta, 0.0);
      rep.field_dist_at_worst = field_dist(mc, st.field(), comp, cfg.tau);
    }
    if (rep.evaluated == 0 && rep.screened > 0) rep.worst_margin = 0.0;
    cert.classes.push_back(rep);
  }

  // 4. harmonic replacements on sampled balls
  {
    MoveClassReport rep;
    rep.name = "replacement";
    for (int c : pick_centers(cfg.certify_replacement_balls)) {
      DistanceField dist = geodesic_distances(mc, c);
      double cap = std::min(0.25 * diam, st.min_forced_boundary_distance(dist) - 0.5 * h);
      for (double r = 4.0 * h; r <= cap; r *= 4.0) {
        VectorField repl;
        double dj = detail::eval_replacement(st, dist, r, &repl);
        ++rep.evaluated;
        if (dj < rep.worst_margin) {
          rep.worst_margin = dj;
          rep.field_dist_at_worst = field_dist(mc, st.field(), repl, cfg.tau);
        }
      }
    }
    cert.classes.push_back(rep);
  }

  cert.worst_margin = kInf;
  for (const MoveClassReport& rep : cert.classes)
    if (rep.evaluated + rep.screened > 0)
      cert.worst_margin = std::min(cert.worst_margin, rep.worst_margin);
  cert.valid = self_consistent && cert.worst_margin >= -cert.tol_cert;
  return cert;
}

}  // namespace bernoulli
