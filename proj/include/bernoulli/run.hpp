#pragma once

#include <chrono>

#include "bernoulli/config.hpp"

namespace bernoulli {

inline constexpr const char* kToolVersion = "1.0.0";

/// Exit-code contract: 0 success, 1 input/IO, 2 quantitative failure,
/// 3 non-convergence.
enum ExitCode { kOk = 0, kInputError = 1, kQuantitativeFailure = 2, kNonConvergence = 3 };

namespace detail {

inline double wall_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// Manifest is written last; every listed output must exist and be non-empty.
inline void write_manifest(const RunConfig& rc, const std::string& command,
                           const MetricComplex* mc, ordered_json stats,
                           const std::vector<std::string>& outputs) {
  ordered_json j;
  j["tool"] = "bernoulli";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["seed"] = rc.solve.seed;
  j["config_path"] = rc.config_path;
  j["config"] = rc.ini.to_json();
  if (mc) j["mesh"] = mc->description;
  j["stats"] = std::move(stats);
  ordered_json files = ordered_json::array();
  for (const std::string& f : outputs) {
    std::filesystem::path p = std::filesystem::path(rc.out_dir) / f;
    require(std::filesystem::exists(p) && std::filesystem::file_size(p) > 0,
            "manifest: output missing or empty: " + p.string());
    files.push_back(f);
  }
  j["outputs"] = std::move(files);
  write_text_file(std::filesystem::path(rc.out_dir) / "manifest.json", j.dump(2) + "\n");
}

struct SolverRuns {
  std::optional<SolveResult> relaxed;
  std::optional<SolveResult> setmove;
  double relaxed_ms = 0.0;
  double setmove_ms = 0.0;

  const SolveResult& best() const {
    if (relaxed && setmove)
      return setmove->energy.total < relaxed->energy.total ? *setmove : *relaxed;
    return relaxed ? *relaxed : *setmove;
  }
  bool all_converged() const {
    return (!relaxed || relaxed->converged) && (!setmove || setmove->converged);
  }
  std::optional<double> agreement() const {
    if (!relaxed || !setmove) return std::nullopt;
    double scale = std::max({std::abs(relaxed->energy.total), std::abs(setmove->energy.total), 1e-300});
    return std::abs(relaxed->energy.total - setmove->energy.total) / scale;
  }
};

inline SolverRuns run_solvers(const RunConfig& rc, const MetricComplex& mc, const QField& q,
                              const VectorField& g) {
  SolverRuns runs;
  if (rc.solver_method == "both" || rc.solver_method == "relaxed") {
    auto t0 = std::chrono::steady_clock::now();
    runs.relaxed = solve_relaxed(mc, q, g, rc.solve);
    runs.relaxed_ms = wall_ms(t0);
  }
  if (rc.solver_method == "both" || rc.solver_method == "setmove") {
    std::string init = rc.ini.get_string("solver", "init", "all_true");
    PositivityMask start;
    start.tau = rc.solve.tau;
    start.mask.assign(static_cast<std::size_t>(mc.vertex_count()), init == "all_true" ? 1 : 0);
    require(init == "all_true" || init == "all_false", "solver: init must be all_true | all_false");
    auto t0 = std::chrono::steady_clock::now();
    runs.setmove = solve_setmove(mc, q, g, start, rc.solve);
    runs.setmove_ms = wall_ms(t0);
  }
  return runs;
}

inline ordered_json solver_stats(const SolverRuns& runs) {
  ordered_json j;
  auto emit = [](const SolveResult& r, double ms) {
    ordered_json s;
    s["energy"] = r.energy.total;
    s["dirichlet"] = r.energy.dirichlet;
    s["bulk"] = r.energy.bulk;
    s["converged"] = r.converged;
    s["accepted_moves"] = r.accepted_moves;
    s["wall_ms"] = ms;
    return s;
  };
  if (runs.relaxed) j["relaxed"] = emit(*runs.relaxed, runs.relaxed_ms);
  if (runs.setmove) j["setmove"] = emit(*runs.setmove, runs.setmove_ms);
  if (auto a = runs.agreement()) j["cross_agreement"] = *a;
  return j;
}

}  // namespace detail

/// solve: run the configured solvers, write field/energy/certificate, exit 0
/// only if everything converged, the solvers agree and the certificate holds.
inline int run_solve(const RunConfig& rc) {
  std::filesystem::create_directories(rc.out_dir);
  MetricComplex mc = rc.build_mesh();
  QField q = rc.build_q(mc);
  VectorField g = rc.build_boundary(mc);
  detail::SolverRuns runs = detail::run_solvers(rc, mc, q, g);
  const SolveResult& best = runs.best();

  MinimizerCertificate cert = certify(mc, best.u, q, rc.solve);
  write_text_file(std::filesystem::path(rc.out_dir) / "field.csv", field_to_csv(best.u, best.mask));
  write_text_file(std::filesystem::path(rc.out_dir) / "energy.json",
                  energy_to_json(best.energy).dump(2) + "\n");
  write_text_file(std::filesystem::path(rc.out_dir) / "certificate.json",
                  certificate_to_json(cert).dump(2) + "\n");
  ordered_json stats = detail::solver_stats(runs);
  stats["certificate_valid"] = cert.valid;
  detail::write_manifest(rc, "solve", &mc, stats,
                         {"field.csv", "energy.json", "certificate.json"});

  if (!runs.all_converged()) return kNonConvergence;
  if (auto a = runs.agreement(); a && *a > rc.cross_tol) return kQuantitativeFailure;
  if (!cert.valid) return kQuantitativeFailure;
  return kOk;
}

/// diagnose: profiles of an existing field around a configured center.
inline int run_diagnose(const RunConfig& rc, const std::string& field_path) {
  std::filesystem::create_directories(rc.out_dir);
  MetricComplex mc = rc.build_mesh();
  QField q = rc.build_q(mc);
  VectorField u = field_from_csv(mc, read_text_file(field_path));
  double tau = rc.solve.tau;
  double h = median_edge_length(mc);

  int center;
  {
    std::string c = rc.ini.get_string("diagnose", "center", "fb_auto");
    if (c == "apex") {
      require(mc.chart == ChartKind::cone, "diagnose: center=apex needs a cone mesh");
      center = 0;
    } else if (c == "fb_auto") {
      // deterministic: smallest-id vertex on the positivity interface
      PositivityMask pm = positivity_mask_view(u, tau);
      center = -1;
      for (const Edge& e : mc.edges)
        if (pm.at(e.i) != pm.at(e.j)) {
          int v = std::min(e.i, e.j);
          if (center < 0 || v < center) center = v;
        }
      require(center >= 0, "diagnose: field has no free boundary for fb_auto");
    } else {
      center = static_cast<int>(rc.ini.get_int("diagnose", "center"));
      require(center >= 0 && center < mc.vertex_count(), "diagnose: center out of range");
    }
  }
  DistanceField dist = geodesic_distances(mc, center);

  double r_min = rc.ini.get_double("diagnose", "r_min", 4.0 * h);
  double r_max = rc.ini.get_double("diagnose", "r_max",
                                   0.5 * min_boundary_distance(mc, dist));
  long n_radii = rc.ini.get_int("diagnose", "n_radii", 16);
  require(r_min > 0.0 && r_max > r_min && n_radii >= 2, "diagnose: bad radius grid");
  std::vector<double> grid;
  for (long k = 0; k < n_radii; ++k)
    grid.push_back(r_min + (r_max - r_min) * static_cast<double>(k) / static_cast<double>(n_radii - 1));

  ordered_json summary;
  summary["center"] = center;
  summary["tau"] = tau;
  summary["h"] = h;
  std::vector<std::string> outputs;
  bool quantitative_ok = true;

  // Weiss profile
  {
    double dr_factor = rc.ini.get_double("diagnose", "dr_factor", 16.0);
    std::vector<double> wgrid;
    for (double r : grid)
      if (min_boundary_distance(mc, dist) >= r + 0.5 * default_shell_width(h, r)) wgrid.push_back(r);
    if (wgrid.size() >= 2) {
      WeissProfile wp;
      wp.center = center;
      wp.N = mc.intrinsic_dim;
      for (double r : wgrid) {
        double dr = std::max(2.0 * h, r / dr_factor);
        wp.radii.push_back(r);
        wp.widths.push_back(dr);
        wp.values.push_back(weiss_density(mc, u, q, dist, r, dr, mc.intrinsic_dim, tau));
      }
      for (std::size_t j = 0; j + 1 < wp.values.size(); ++j)
        wp.monotonicity_defect = std::max(wp.monotonicity_defect, wp.values[j] - wp.values[j + 1]);
      wp.monotonicity_defect = std::max(wp.monotonicity_defect, 0.0);
      double defect_tol = rc.ini.get_double("diagnose", "weiss_defect_tol", kInf);
      write_text_file(std::filesystem::path(rc.out_dir) / "weiss.csv",
                      weiss_to_csv(wp, std::isfinite(defect_tol) ? defect_tol : 0.0));
      outputs.push_back("weiss.csv");
      summary["weiss"] = {{"monotonicity_defect", wp.monotonicity_defect},
                          {"samples", wp.values.size()},
                          {"max", *std::max_element(wp.values.begin(), wp.values.end())}};
      if (std::isfinite(defect_tol) && wp.monotonicity_defect > defect_tol) quantitative_ok = false;
    }
  }

  // growth + density + Euler-Lagrange around a free-boundary center
  if (fb_distance(mc, u, tau, dist) <= 2.0 * h + 1e-12) {
    GrowthProfile gp = growth_profile(mc, u, dist, grid, q.at(center), tau);
    write_text_file(std::filesystem::path(rc.out_dir) / "growth.csv", growth_to_csv(gp));
    outputs.push_back("growth.csv");
    summary["growth"] = {{"slope", gp.slope},
                         {"min_ratio", *std::min_element(gp.sup_ratio.begin(), gp.sup_ratio.end())},
                         {"trimmed", gp.trimmed}};

    DensityProfile dp = density_profile(mc, u, dist, grid, tau);
    write_text_file(std::filesystem::path(rc.out_dir) / "density.csv", density_to_csv(dp));
    outputs.push_back("density.csv");
    summary["density"] = {{"min_pos", *std::min_element(dp.positive.begin(), dp.positive.end())},
                          {"max_pos", *std::max_element(dp.positive.begin(), dp.positive.end())}};

    double el_r = rc.ini.get_double("diagnose", "el_radius", 8.0 * h);
    ElDensity el = el_density(mc, u, q, dist, el_r, tau);
    write_text_file(std::filesystem::path(rc.out_dir) / "el.csv", el_to_csv(el));
    outputs.push_back("el.csv");
    summary["el"] = {{"defect", el.defect}, {"radius", el_r}};
    double el_tol = rc.ini.get_double("diagnose", "el_defect_tol", kInf);
    if (std::isfinite(el_tol) && el.defect > el_tol) quantitative_ok = false;
  }

  // perimeter of the positivity set
  {
    PositivityMask pm = positivity_mask_view(u, tau);
    summary["perimeter"] = perimeter_estimate(mc, pm);
  }
  if (mc.chart == ChartKind::cone && center == 0)
    summary["homogeneity_defect"] = homogeneity_defect(mc, u, tau);

  write_text_file(std::filesystem::path(rc.out_dir) / "summary.json", summary.dump(2) + "\n");
  outputs.push_back("summary.json");
  detail::write_manifest(rc, "diagnose", &mc, summary, outputs);
  return quantitative_ok ? kOk : kQuantitativeFailure;
}

/// oracle: enumerate ground truth and require both solvers to match it.
inline int run_oracle(const RunConfig& rc) {
  std::filesystem::create_directories(rc.out_dir);
  MetricComplex mc = rc.build_mesh();
  QField q = rc.build_q(mc);
  VectorField g = rc.build_boundary(mc);
  OracleResult oracle = brute_force_oracle(mc, q, g, rc.solve);
  detail::SolverRuns runs = detail::run_solvers(rc, mc, q, g);
  double gap_tol = rc.ini.get_double("oracle", "gap_tol", 1e-8);

  ordered_json j;
  j["oracle_energy"] = oracle.energy;
  j["masks_tried"] = oracle.masks_tried;
  double scale = std::max(std::abs(oracle.energy), 1e-300);
  bool ok = true;
  if (runs.relaxed) {
    double gap = (runs.relaxed->energy.total - oracle.energy) / scale;
    j["relaxed_gap"] = gap;
    ok = ok && std::abs(gap) <= gap_tol;
  }
  if (runs.setmove) {
    double gap = (runs.setmove->energy.total - oracle.energy) / scale;
    j["setmove_gap"] = gap;
    ok = ok && std::abs(gap) <= gap_tol;
  }
  j["gap_tol"] = gap_tol;
  j["ok"] = ok;
  write_text_file(std::filesystem::path(rc.out_dir) / "oracle.json", j.dump(2) + "\n");
  detail::write_manifest(rc, "oracle", &mc, j, {"oracle.json"});
  if (!runs.all_converged()) return kNonConvergence;
  return ok ? kOk : kQuantitativeFailure;
}

/// blowup: rescale a solved field around a center into a refined unit chart.
inline int run_blowup(const RunConfig& rc) {
  std::filesystem::create_directories(rc.out_dir);
  MetricComplex mc = rc.build_mesh();
  QField q = rc.build_q(mc);
  VectorField u;
  if (rc.ini.has("blowup", "field")) {
    u = field_from_csv(mc, read_text_file(rc.ini.get_string("blowup", "field")));
  } else {
    VectorField g = rc.build_boundary(mc);
    u = detail::run_solvers(rc, mc, q, g).best().u;
  }
  int center = static_cast<int>(rc.ini.get_int("blowup", "center"));
  double r = rc.ini.get_double("blowup", "scale");
  int nr = static_cast<int>(rc.ini.get_int("blowup", "nr", 64));
  int ntheta = static_cast<int>(rc.ini.get_int("blowup", "ntheta", 128));
  BlowupResult blow = blowup_rescale(mc, u, q, center, r, nr, ntheta, rc.solve);

  VectorField out_u = blow.u;
  PositivityMask pm = positivity_mask(out_u, rc.solve.tau);
  write_text_file(std::filesystem::path(rc.out_dir) / "blowup_mesh.json",
                  mesh_to_json(blow.complex).dump(2) + "\n");
  write_text_file(std::filesystem::path(rc.out_dir) / "blowup_field.csv",
                  field_to_csv(out_u, pm));
  ordered_json j;
  j["center"] = center;
  j["scale"] = r;
  j["energy"] = energy_to_json(blow.energy);
  j["converged"] = blow.converged;
  // identity-scale round trip: with the same polar layout the rescaled field
  // should reproduce the input on the matching chart
  if (rc.ini.has("blowup", "round_trip_tol")) {
    require(mc.chart == ChartKind::cone && center == 0,
            "blowup round trip check needs a cone mesh with the apex center");
    double err = 0.0;
    DistanceField dist = geodesic_distances(mc, center);
    for (int v = 0; v < blow.complex.vertex_count(); ++v) {
      double rr = blow.complex.coords[static_cast<std::size_t>(v)][0] * r;
      double th = blow.complex.coords[static_cast<std::size_t>(v)][1];
      // match against the source vertex with the same chart position
      for (int w = 0; w < mc.vertex_count(); ++w) {
        if (std::abs(mc.coords[static_cast<std::size_t>(w)][0] - rr) > 1e-9) continue;
        double dth = std::abs(mc.coords[static_cast<std::size_t>(w)][1] - th);
        dth = std::min(dth, mc.cone_angle - dth);
        if (dth > 1e-9) continue;
        for (int i = 0; i < u.m; ++i)
          err = std::max(err, std::abs(blow.u.at(v, i) - u.at(w, i) / r));
        break;
      }
    }
    (void)dist;
    j["round_trip_error"] = err;
    if (err > rc.ini.get_double("blowup", "round_trip_tol")) {
      write_text_file(std::filesystem::path(rc.out_dir) / "blowup.json", j.dump(2) + "\n");
      detail::write_manifest(rc, "blowup", &mc, j,
                             {"blowup_mesh.json", "blowup_field.csv", "blowup.json"});
      return kQuantitativeFailure;
    }
  }
  write_text_file(std::filesystem::path(rc.out_dir) / "blowup.json", j.dump(2) + "\n");
  detail::write_manifest(rc, "blowup", &mc, j,
                         {"blowup_mesh.json", "blowup_field.csv", "blowup.json"});
  return blow.converged ? kOk : kNonConvergence;
}

/// mesh: export only.
inline int run_mesh(const RunConfig& rc) {
  std::filesystem::create_directories(rc.out_dir);
  MetricComplex mc = rc.build_mesh();
  write_text_file(std::filesystem::path(rc.out_dir) / "mesh.json", mesh_to_json(mc).dump(2) + "\n");
  ordered_json stats;
  stats["vertices"] = mc.vertex_count();
  stats["edges"] = mc.edge_count();
  stats["total_mass"] = mc.total_mass();
  detail::write_manifest(rc, "mesh", &mc, stats, {"mesh.json"});
  return kOk;
}

/// Exception-to-exit-code mapping shared by the CLI and the test harness.
inline int run_command(const std::string& command, const std::string& config_path,
                       const std::string& field_path = "") {
  try {
    RunConfig rc = RunConfig::load(config_path);
    if (command == "solve") return run_solve(rc);
    if (command == "diagnose") {
      require(!field_path.empty(), "diagnose: field path required");
      return run_diagnose(rc, field_path);
    }
    if (command == "oracle") return run_oracle(rc);
    if (command == "blowup") return run_blowup(rc);
    if (command == "mesh") return run_mesh(rc);
    std::fprintf(stderr, "unknown command: %s\n", command.c_str());
    return kInputError;
  } catch (const SolveFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNonConvergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
}

}  // namespace bernoulli
