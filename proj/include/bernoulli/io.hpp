#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bernoulli/diagnostics.hpp"

namespace bernoulli {

using ordered_json = nlohmann::ordered_json;

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open for writing: " + path.string());
  out << body;
  require(out.good(), "write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Mesh: deterministic JSON (vertices by builder index, edges lexicographic)
// ---------------------------------------------------------------------------

inline ordered_json mesh_to_json(const MetricComplex& mc) {
  ordered_json j;
  j["dim"] = mc.intrinsic_dim;
  j["K"] = mc.curvature_bound;
  j["description"] = mc.description;
  ordered_json verts = ordered_json::array();
  for (int v = 0; v < mc.vertex_count(); ++v) {
    ordered_json jv;
    jv["mass"] = mc.mass[static_cast<std::size_t>(v)];
    jv["coords"] = {mc.coords[static_cast<std::size_t>(v)][0], mc.coords[static_cast<std::size_t>(v)][1]};
    verts.push_back(jv);
  }
  j["vertices"] = std::move(verts);
  ordered_json edges = ordered_json::array();
  for (const Edge& e : mc.edges) {
    ordered_json je;
    je["i"] = e.i;
    je["j"] = e.j;
    je["w"] = e.w;
    je["len"] = e.len;
    je["per"] = e.per;
    edges.push_back(je);
  }
  j["edges"] = std::move(edges);
  j["boundary"] = mc.boundary;
  switch (mc.chart) {
    case ChartKind::line: j["chart"] = "line"; break;
    case ChartKind::plane: j["chart"] = "plane"; break;
    case ChartKind::cone:
      j["chart"] = "cone";
      j["cone_angle"] = mc.cone_angle;
      break;
    default: j["chart"] = "none"; break;
  }
  return j;
}

/// Import drops product charts to "none" (factor complexes are not embedded
/// in the file); distances then fall back to Dijkstra.
inline MetricComplex mesh_from_json(const ordered_json& j) {
  MetricComplex mc;
  require(j.contains("dim") && j.contains("vertices") && j.contains("edges") && j.contains("boundary"),
          "mesh json: missing required keys");
  mc.intrinsic_dim = j.at("dim").get<int>();
  mc.curvature_bound = j.value("K", 0.0);
  mc.description = j.value("description", std::string("imported"));
  for (const auto& jv : j.at("vertices")) {
    mc.mass.push_back(jv.at("mass").get<double>());
    auto c = jv.at("coords");
    mc.coords.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  }
  for (const auto& je : j.at("edges"))
    mc.edges.push_back({je.at("i").get<int>(), je.at("j").get<int>(), je.at("w").get<double>(),
                        je.at("len").get<double>(), je.at("per").get<double>()});
  mc.boundary = j.at("boundary").get<std::vector<int>>();
  std::string chart = j.value("chart", std::string("none"));
  if (chart == "line") mc.chart = ChartKind::line;
  else if (chart == "plane") mc.chart = ChartKind::plane;
  else if (chart == "cone") {
    mc.chart = ChartKind::cone;
    mc.cone_angle = j.at("cone_angle").get<double>();
  }
  mc.finalize();
  return mc;
}

// ---------------------------------------------------------------------------
// Field CSV: vertex_id,u_1..u_m,mask (header mandatory, builder vertex order)
// ---------------------------------------------------------------------------

inline std::string field_to_csv(const VectorField& u, const PositivityMask& mask) {
  std::ostringstream out;
  out << "vertex_id";
  for (int i = 1; i <= u.m; ++i) out << ",u_" << i;
  out << ",mask\n";
  for (int v = 0; v < u.vertices; ++v) {
    out << v;
    for (int i = 0; i < u.m; ++i) out << "," << format_double(u.at(v, i));
    out << "," << (mask.at(v) ? 1 : 0) << "\n";
  }
  return out.str();
}

inline VectorField field_from_csv(const MetricComplex& mc, const std::string& body) {
  std::istringstream in(body);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "field csv: empty file");
  int m = 0;
  {
    std::istringstream hs(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(hs, col, ',')) cols.push_back(col);
    require(cols.size() >= 3 && cols.front() == "vertex_id" && cols.back() == "mask",
            "field csv: bad header");
    m = static_cast<int>(cols.size()) - 2;
  }
  VectorField u = make_field(mc, m);
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    require(static_cast<bool>(std::getline(ls, cell, ',')), "field csv: bad row");
    int v = std::stoi(cell);
    require(v >= 0 && v < mc.vertex_count(), "field csv: vertex id out of range");
    for (int i = 0; i < m; ++i) {
      require(static_cast<bool>(std::getline(ls, cell, ',')), "field csv: short row");
      u.at(v, i) = std::stod(cell);
    }
    ++rows;
  }
  require(rows == mc.vertex_count(), "field csv: row count does not match the mesh");
  // adopt the stored boundary values as the field's Dirichlet data
  for (std::size_t b = 0; b < mc.boundary.size(); ++b)
    for (int i = 0; i < m; ++i)
      u.boundary_data[b * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)] =
          u.at(mc.boundary[b], i);
  validate_nonnegative(u);
  return u;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline ordered_json energy_to_json(const EnergyReport& e) {
  ordered_json j;
  j["dirichlet"] = e.dirichlet;
  j["bulk"] = e.bulk;
  j["total"] = e.total;
  j["tau"] = e.tau;
  return j;
}

inline ordered_json certificate_to_json(const MinimizerCertificate& c) {
  ordered_json j;
  j["energy"] = c.energy;
  j["tol_cert"] = c.tol_cert;
  j["valid"] = c.valid;
  j["worst_margin"] = std::isfinite(c.worst_margin) ? c.worst_margin : 0.0;
  ordered_json cls = ordered_json::array();
  for (const MoveClassReport& r : c.classes) {
    ordered_json jr;
    jr["class"] = r.name;
    jr["evaluated"] = r.evaluated;
    jr["screened"] = r.screened;
    jr["worst_margin"] = std::isfinite(r.worst_margin) ? r.worst_margin : 0.0;
    jr["field_dist_at_worst"] = r.field_dist_at_worst;
    cls.push_back(jr);
  }
  j["classes"] = std::move(cls);
  return j;
}

inline std::string weiss_to_csv(const WeissProfile& wp, double defect_tol) {
  std::ostringstream out;
  out << "r,W,defect_flag\n";
  for (std::size_t k = 0; k < wp.radii.size(); ++k) {
    bool flagged = k + 1 < wp.values.size() && wp.values[k] - wp.values[k + 1] > defect_tol;
    out << format_double(wp.radii[k]) << "," << format_double(wp.values[k]) << ","
        << (flagged ? 1 : 0) << "\n";
  }
  return out.str();
}

inline std::string growth_to_csv(const GrowthProfile& gp) {
  std::ostringstream out;
  out << "r,sup_ratio\n";
  for (std::size_t k = 0; k < gp.radii.size(); ++k)
    out << format_double(gp.radii[k]) << "," << format_double(gp.sup_ratio[k]) << "\n";
  return out.str();
}

inline std::string density_to_csv(const DensityProfile& dp) {
  std::ostringstream out;
  out << "r,pos,zero\n";
  for (std::size_t k = 0; k < dp.radii.size(); ++k)
    out << format_double(dp.radii[k]) << "," << format_double(dp.positive[k]) << ","
        << format_double(dp.zero[k]) << "\n";
  return out.str();
}

inline std::string el_to_csv(const ElDensity& el) {
  std::ostringstream out;
  out << "component,q\n";
  for (std::size_t i = 0; i < el.q.size(); ++i)
    out << (i + 1) << "," << format_double(el.q[i]) << "\n";
  return out.str();
}

}  // namespace bernoulli
