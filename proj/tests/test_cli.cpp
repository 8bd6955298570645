#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "bernoulli/run.hpp"

using namespace bernoulli;

namespace {

std::filesystem::path test_dir() {
  auto p = std::filesystem::temp_directory_path() / "bernoulli_cli_test";
  std::filesystem::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(BERNOULLI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
#ifdef WEXITSTATUS
  return WEXITSTATUS(status);
#else
  return status;
#endif
}

std::string one_d_config(const std::filesystem::path& out, double q, const std::string& extra = "") {
  std::ostringstream ss;
  ss << "[mesh]\nbuilder = interval\nn = 101\nlength = 2.0\n"
     << "[problem]\nm = 1\nq = " << q << "\nboundary = endpoints\nleft = 1.0\nright = 0.0\n"
     << "[solver]\nseed = 7\n" << extra << "[certify]\n[output]\ndir = " << out.string() << "\n";
  return ss.str();
}

}  // namespace

TEST_CASE("cli solve: 1D acceptance problem exits 0 with the closed-form energy") {
  auto dir = test_dir();
  auto cfg = dir / "solve_1d.ini";
  auto out = dir / "out_1d";
  std::filesystem::remove_all(out);
  write_text_file(cfg, one_d_config(out, 4.0));
  CHECK(run_cli("solve " + cfg.string()) == 0);

  ordered_json e = ordered_json::parse(read_text_file(out / "energy.json"));
  double h = 0.02;
  CHECK(e.at("total").get<double>() == Catch::Approx(4.0 - 2.0 * h).epsilon(1e-9));
  ordered_json cert = ordered_json::parse(read_text_file(out / "certificate.json"));
  CHECK(cert.at("valid") == true);
  ordered_json manifest = ordered_json::parse(read_text_file(out / "manifest.json"));
  CHECK(manifest.at("command") == "solve");
  for (const auto& f : manifest.at("outputs"))
    CHECK(std::filesystem::exists(out / f.get<std::string>()));

  SECTION("diagnose on the solved field") {
    auto dcfg = dir / "diag_1d.ini";
    std::string body = one_d_config(out / "diag", 4.0);
    body += "[diagnose]\ncenter = fb_auto\nr_min = 0.08\nr_max = 0.4\nn_radii = 8\n";
    write_text_file(dcfg, body);
    CHECK(run_cli("diagnose " + dcfg.string() + " " + (out / "field.csv").string()) == 0);
    CHECK(std::filesystem::exists(out / "diag" / "growth.csv"));
    CHECK(std::filesystem::exists(out / "diag" / "density.csv"));
    CHECK(std::filesystem::exists(out / "diag" / "summary.json"));
  }
}

TEST_CASE("cli solve: zero data exits 0 with zero energy") {
  auto dir = test_dir();
  auto cfg = dir / "solve_zero.ini";
  auto out = dir / "out_zero";
  std::ostringstream ss;
  ss << "[mesh]\nbuilder = interval\nn = 21\nlength = 2.0\n"
     << "[problem]\nm = 1\nq = 4.0\nboundary = const\nvalue = 0.0\n"
     << "[solver]\n[certify]\n[output]\ndir = " << out.string() << "\n";
  write_text_file(cfg, ss.str());
  CHECK(run_cli("solve " + cfg.string()) == 0);
  ordered_json e = ordered_json::parse(read_text_file(out / "energy.json"));
  CHECK(e.at("total").get<double>() == 0.0);
}

TEST_CASE("cli exit codes: input errors") {
  auto dir = test_dir();
  SECTION("nonpositive Q is rejected at construction") {
    auto cfg = dir / "bad_q.ini";
    write_text_file(cfg, one_d_config(dir / "out_badq", -1.0));
    CHECK(run_cli("solve " + cfg.string()) == 1);
  }
  SECTION("malformed config") {
    auto cfg = dir / "malformed.ini";
    write_text_file(cfg, "[mesh\nbuilder=interval\n");
    CHECK(run_cli("solve " + cfg.string()) == 1);
  }
  SECTION("missing config file") {
    CHECK(run_cli("solve /nonexistent/nowhere.ini") == 1);
  }
  SECTION("unknown subcommand") {
    CHECK(run_cli("frobnicate x.ini") != 0);
  }
}

TEST_CASE("cli oracle on the 1D suite") {
  auto dir = test_dir();
  auto cfg = dir / "oracle.ini";
  auto out = dir / "out_oracle";
  write_text_file(cfg, one_d_config(out, 4.0));
  CHECK(run_cli("oracle " + cfg.string()) == 0);
  ordered_json j = ordered_json::parse(read_text_file(out / "oracle.json"));
  CHECK(j.at("ok") == true);
  CHECK(std::abs(j.at("relaxed_gap").get<double>()) <= 1e-8);
  CHECK(std::abs(j.at("setmove_gap").get<double>()) <= 1e-8);
}

TEST_CASE("cli mesh export") {
  auto dir = test_dir();
  auto cfg = dir / "mesh.ini";
  auto out = dir / "out_mesh";
  write_text_file(cfg, one_d_config(out, 4.0));
  CHECK(run_cli("mesh " + cfg.string()) == 0);
  MetricComplex back = mesh_from_json(ordered_json::parse(read_text_file(out / "mesh.json")));
  CHECK(back.vertex_count() == 101);
}

TEST_CASE("cli runs are byte-reproducible for a fixed config and seed") {
  auto dir = test_dir();
  auto out1 = dir / "repro1";
  auto out2 = dir / "repro2";
  auto cfg1 = dir / "repro1.ini";
  auto cfg2 = dir / "repro2.ini";
  write_text_file(cfg1, one_d_config(out1, 4.0));
  write_text_file(cfg2, one_d_config(out2, 4.0));
  REQUIRE(run_cli("solve " + cfg1.string()) == 0);
  REQUIRE(run_cli("solve " + cfg2.string()) == 0);
  CHECK(read_text_file(out1 / "field.csv") == read_text_file(out2 / "field.csv"));
  CHECK(read_text_file(out1 / "energy.json") == read_text_file(out2 / "energy.json"));
  CHECK(read_text_file(out1 / "certificate.json") == read_text_file(out2 / "certificate.json"));
}

TEST_CASE("cli blowup identity scale") {
  auto dir = test_dir();
  auto cfg = dir / "blowup.ini";
  auto out = dir / "out_blowup";
  std::ostringstream ss;
  ss << "[mesh]\nbuilder = cone\nangle = 4.71238898038469\nnr = 48\nntheta = 72\nrmax = 2.4\n"
     << "[problem]\nm = 1\nq = 0.25\nboundary = rim_sector\nvalue = 1.0\n"
        "theta0 = 0.0\ntheta1 = 2.356194490192345\n"
     << "[solver]\nmethod = relaxed\n"
     << "[blowup]\ncenter = 0\nscale = 1.0\nnr = 20\nntheta = 72\nround_trip_tol = 0.08\n"
     << "[certify]\n[output]\ndir = " << out.string() << "\n";
  write_text_file(cfg, ss.str());
  CHECK(run_cli("blowup " + cfg.string()) == 0);
  ordered_json j = ordered_json::parse(read_text_file(out / "blowup.json"));
  CHECK(j.at("round_trip_error").get<double>() <= 0.08);
}
