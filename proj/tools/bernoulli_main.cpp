// Batch front end: build meshes, solve, certify, diagnose, compare against
// the brute-force oracle and emit CSV/JSON reports. All experiment inputs
// live in a single config file; the only command-line arguments are the
// subcommand and paths.

#include <CLI11.hpp>

#include "bernoulli/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"one-phase Bernoulli free-boundary laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string field_path;

  CLI::App* solve = app.add_subcommand("solve", "run both solvers, certify, write reports");
  solve->add_option("config", config_path, "config file")->required();

  CLI::App* diagnose = app.add_subcommand("diagnose", "profiles of a solved field");
  diagnose->add_option("config", config_path, "config file")->required();
  diagnose->add_option("field", field_path, "field csv produced by solve")->required();

  CLI::App* oracle = app.add_subcommand("oracle", "brute-force ground truth comparison");
  oracle->add_option("config", config_path, "config file")->required();

  CLI::App* blowup = app.add_subcommand("blowup", "rescaled re-solve around a center");
  blowup->add_option("config", config_path, "config file")->required();

  CLI::App* mesh = app.add_subcommand("mesh", "export the configured mesh");
  mesh->add_option("config", config_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? bernoulli::kInputError : bernoulli::kOk;
  }

  std::string cmd = app.get_subcommands().front()->get_name();
  return bernoulli::run_command(cmd, config_path, field_path);
}
