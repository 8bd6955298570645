#pragma once

#include <map>
#include <optional>

#include "bernoulli/io.hpp"

namespace bernoulli {

/// Minimal INI reader: [section] headers, key = value pairs, # or ;
/// comments. Errors carry the offending line number.
class IniFile {
 public:
  static IniFile parse(const std::string& body, const std::string& origin) {
    IniFile ini;
    ini.origin_ = origin;
    std::istringstream in(body);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = strip(line);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[') {
        require(s.back() == ']' && s.size() > 2,
                origin + ":" + std::to_string(lineno) + ": malformed section header");
        section = strip(s.substr(1, s.size() - 2));
        ini.sections_[section];
        continue;
      }
      auto eq = s.find('=');
      require(eq != std::string::npos,
              origin + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = strip(s.substr(0, eq));
      std::string value = strip(s.substr(eq + 1));
      require(!key.empty(), origin + ":" + std::to_string(lineno) + ": empty key");
      require(!section.empty(), origin + ":" + std::to_string(lineno) + ": key outside any section");
      auto& sec = ini.sections_[section];
      require(!sec.count(key), origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      sec[key] = {value, lineno};
    }
    return ini;
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

  std::string get_string(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    require(s != sections_.end(), origin_ + ": missing section [" + section + "]");
    auto k = s->second.find(key);
    require(k != s->second.end(),
            origin_ + ": missing key '" + key + "' in section [" + section + "]");
    return k->second.first;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    return has(section, key) ? get_string(section, key) : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return parse_double(section, key, get_string(section, key));
  }
  double get_double(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  long get_int(const std::string& section, const std::string& key) const {
    std::string v = get_string(section, key);
    try {
      std::size_t pos = 0;
      long r = std::stol(v, &pos);
      require(pos == v.size(), "");
      return r;
    } catch (...) {
      throw Error(origin_ + ":" + std::to_string(line_of(section, key)) + ": '" + key +
                  "' is not an integer: " + v);
    }
  }
  long get_int(const std::string& section, const std::string& key, long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
  }

  std::vector<double> get_doubles(const std::string& section, const std::string& key) const {
    std::string v = get_string(section, key);
    std::vector<double> out;
    std::istringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(parse_double(section, key, strip(cell)));
    require(!out.empty(), origin_ + ": empty list for '" + key + "'");
    return out;
  }

  /// Flattened view for the manifest echo.
  ordered_json to_json() const {
    ordered_json j;
    for (const auto& [name, sec] : sections_) {
      ordered_json js;
      for (const auto& [key, val] : sec) js[key] = val.first;
      j[name] = std::move(js);
    }
    return j;
  }

 private:
  static std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }
  double parse_double(const std::string& section, const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      double r = std::stod(v, &pos);
      require(pos == v.size(), "");
      return r;
    } catch (...) {
      throw Error(origin_ + ":" + std::to_string(line_of(section, key)) + ": '" + key +
                  "' is not a number: " + v);
    }
  }
  int line_of(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return 0;
    auto k = s->second.find(key);
    return k == s->second.end() ? 0 : k->second.second;
  }

  std::string origin_;
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> sections_;
};

// ---------------------------------------------------------------------------
// Resolved run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  IniFile ini;
  std::string config_path;
  std::string out_dir = "out";
  std::string solver_method = "both";  // both | relaxed | setmove
  double cross_tol = 1e-6;             // relative cross-solver agreement
  SolveConfig solve;
  int m = 1;

  MetricComplex build_mesh() const {
    std::string b = ini.get_string("mesh", "builder");
    if (b == "interval") {
      return build_interval(static_cast<int>(ini.get_int("mesh", "n")),
                            ini.get_double("mesh", "length"));
    }
    if (b == "rectangle") {
      return build_rectangle(static_cast<int>(ini.get_int("mesh", "nx")),
                             static_cast<int>(ini.get_int("mesh", "ny")),
                             ini.get_double("mesh", "lx"), ini.get_double("mesh", "ly"));
    }
    if (b == "cone") {
      return build_cone(ini.get_double("mesh", "angle"), static_cast<int>(ini.get_int("mesh", "nr")),
                        static_cast<int>(ini.get_int("mesh", "ntheta")),
                        ini.get_double("mesh", "rmax"));
    }
    if (b == "doubled_triangle") {
      return build_doubled_triangle(ini.get_double("mesh", "side"),
                                    static_cast<int>(ini.get_int("mesh", "refine")));
    }
    if (b == "product") {
      MetricComplex line = build_interval(static_cast<int>(ini.get_int("mesh", "line_n")),
                                          ini.get_double("mesh", "line_length"));
      std::string fk = ini.get_string("mesh", "fiber");
      MetricComplex fiber =
          fk == "doubled_triangle"
              ? build_doubled_triangle(ini.get_double("mesh", "fiber_side"),
                                       static_cast<int>(ini.get_int("mesh", "fiber_refine")))
              : build_interval(static_cast<int>(ini.get_int("mesh", "fiber_n")),
                               ini.get_double("mesh", "fiber_length"));
      require(fk == "doubled_triangle" || fk == "interval",
              "mesh: fiber must be doubled_triangle or interval");
      return build_product(line, fiber);
    }
    throw Error("mesh: unknown builder '" + b + "'");
  }

  QField build_q(const MetricComplex& mc) const {
    if (ini.has("problem", "q_file")) {
      std::string body = read_text_file(ini.get_string("problem", "q_file"));
      std::istringstream in(body);
      std::string line;
      require(static_cast<bool>(std::getline(in, line)) && line.rfind("vertex_id", 0) == 0,
              "q_file: missing header");
      std::vector<double> q(static_cast<std::size_t>(mc.vertex_count()), 0.0);
      int rows = 0;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        require(comma != std::string::npos, "q_file: bad row");
        int v = std::stoi(line.substr(0, comma));
        require(v >= 0 && v < mc.vertex_count(), "q_file: vertex id out of range");
        q[static_cast<std::size_t>(v)] = std::stod(line.substr(comma + 1));
        ++rows;
      }
      require(rows == mc.vertex_count(), "q_file: row count mismatch");
      return make_qfield(mc, std::move(q));
    }
    return make_qfield(mc, ini.get_double("problem", "q"));
  }

  /// Boundary data families; all produce nonnegative g.
  ///   const:     g_i = value_i
  ///   endpoints: 1D, g(left) / g(right) per component
  ///   halfplane: g_i = xi_i * max(coord[axis] - offset, 0)
  ///   rim_sector: cones, value on theta in [theta0, theta1), else 0
  VectorField build_boundary(const MetricComplex& mc) const {
    VectorField g = make_field(mc, m);
    std::string kind = ini.get_string("problem", "boundary");
    std::vector<double> data(mc.boundary.size() * static_cast<std::size_t>(m), 0.0);
    if (kind == "const") {
      std::vector<double> val = ini.get_doubles("problem", "value");
      require(static_cast<int>(val.size()) == m, "boundary const: need one value per component");
      for (std::size_t b = 0; b < mc.boundary.size(); ++b)
        for (int i = 0; i < m; ++i)
          data[b * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)] = val[static_cast<std::size_t>(i)];
    } else if (kind == "endpoints") {
      require(mc.chart == ChartKind::line, "boundary endpoints: mesh is not a chain");
      std::vector<double> left = ini.get_doubles("problem", "left");
      std::vector<double> right = ini.get_doubles("problem", "right");
      require(static_cast<int>(left.size()) == m && static_cast<int>(right.size()) == m,
              "boundary endpoints: need one value per component");
      for (std::size_t b = 0; b < mc.boundary.size(); ++b) {
        bool is_left = mc.boundary[b] == 0;
        for (int i = 0; i < m; ++i)
          data[b * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)] =
              is_left ? left[static_cast<std::size_t>(i)] : right[static_cast<std::size_t>(i)];
      }
    } else if (kind == "halfplane") {
      std::vector<double> xi = ini.get_doubles("problem", "xi");
      require(static_cast<int>(xi.size()) == m, "boundary halfplane: need one xi per component");
      double offset = ini.get_double("problem", "offset", 0.0);
      int axis = static_cast<int>(ini.get_int("problem", "axis", 0));
      require(axis == 0 || axis == 1, "boundary halfplane: axis must be 0 or 1");
      for (std::size_t b = 0; b < mc.boundary.size(); ++b) {
        double c = mc.coords[static_cast<std::size_t>(mc.boundary[b])][static_cast<std::size_t>(axis)];
        double s = std::max(c - offset, 0.0);
        for (int i = 0; i < m; ++i)
          data[b * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)] = xi[static_cast<std::size_t>(i)] * s;
      }
    } else if (kind == "rim_sector") {
      require(mc.chart == ChartKind::cone, "boundary rim_sector: mesh is not a cone");
      std::vector<double> val = ini.get_doubles("problem", "value");
      require(static_cast<int>(val.size()) == m, "boundary rim_sector: need one value per component");
      double t0 = ini.get_double("problem", "theta0");
      double t1 = ini.get_double("problem", "theta1");
      for (std::size_t b = 0; b < mc.boundary.size(); ++b) {
        double theta = mc.coords[static_cast<std::size_t>(mc.boundary[b])][1];
        bool on = theta >= t0 && theta < t1;
        for (int i = 0; i < m; ++i)
          data[b * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)] =
              on ? val[static_cast<std::size_t>(i)] : 0.0;
      }
    } else {
      throw Error("problem: unknown boundary family '" + kind + "'");
    }
    set_boundary_data(mc, g, data);
    return g;
  }

  static RunConfig load(const std::string& path) {
    RunConfig rc;
    rc.config_path = path;
    rc.ini = IniFile::parse(read_text_file(path), path);
    rc.out_dir = rc.ini.get_string("output", "dir", "out");
    rc.m = static_cast<int>(rc.ini.get_int("problem", "m", 1));
    require(rc.m >= 1, "problem: m must be >= 1");
    rc.solver_method = rc.ini.get_string("solver", "method", "both");
    require(rc.solver_method == "both" || rc.solver_method == "relaxed" ||
                rc.solver_method == "setmove",
            "solver: method must be both | relaxed | setmove");
    rc.cross_tol = rc.ini.get_double("solver", "cross_tol", 1e-6);
    SolveConfig& s = rc.solve;
    s.eps0 = rc.ini.get_double("solver", "eps0", 0.0);
    s.eps_ratio = rc.ini.get_double("solver", "eps_ratio", 0.5);
    s.eps_floor_factor = rc.ini.get_double("solver", "eps_floor_factor", 10.0);
    s.tau = rc.ini.get_double("problem", "tau", 1e-12);
    s.armijo = rc.ini.get_double("solver", "armijo", 1e-4);
    s.max_descent_iterations = static_cast<int>(rc.ini.get_int("solver", "max_descent_iterations", 2000));
    s.descent_tol = rc.ini.get_double("solver", "descent_tol", 1e-10);
    s.max_moves = static_cast<int>(rc.ini.get_int("solver", "max_moves", 100000));
    s.cg_eta = rc.ini.get_double("solver", "cg_eta", 1e-10);
    s.cg_max_iterations = static_cast<int>(rc.ini.get_int("solver", "cg_max_iterations", 50000));
    s.seed = static_cast<uint64_t>(rc.ini.get_int("solver", "seed", 1));
    s.ball_centers_per_round = static_cast<int>(rc.ini.get_int("solver", "ball_centers_per_round", 8));
    s.cutoff_exact_candidates = static_cast<int>(rc.ini.get_int("solver", "cutoff_exact_candidates", 4));
    if (rc.ini.has("solver", "thetas")) s.thetas = rc.ini.get_doubles("solver", "thetas");
    s.tol_cert_rel = rc.ini.get_double("certify", "tol_cert_rel", 1e-8);
    s.certify_cutoff_centers = static_cast<int>(rc.ini.get_int("certify", "cutoff_centers", 128));
    s.certify_truncation_centers = static_cast<int>(rc.ini.get_int("certify", "truncation_centers", 256));
    s.certify_replacement_balls = static_cast<int>(rc.ini.get_int("certify", "replacement_balls", 32));
    return rc;
  }
};

}  // namespace bernoulli
