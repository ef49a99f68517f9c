// Command-line front end: hsc <solve|simulate|verify|compare|check> --config FILE

#include "hsc/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Homogeneous stochastic control: BSDE solver and verification harness"};
  app.require_subcommand(1);

  std::filesystem::path config;
  hsc::Overrides overrides;
  std::string out;
  std::int64_t paths = 0;
  std::uint64_t seed = 0;
  int grid = 0;

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"solve", "solve both BSDEs and check their invariants"},
      {"simulate", "simulate the optimally controlled state"},
      {"verify", "compare Monte Carlo cost with the value function"},
      {"compare", "tabulate competitor costs against the value"},
      {"check", "regime and homogeneity diagnostics"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "experiment file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--paths", paths, "number of simulated paths")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "simulation seed");
    sub->add_option("--grid", grid, "time steps N")->check(CLI::Range(2, 1 << 24));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : hsc::exit_code::config_error;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--out")) overrides.out = out;
  if (chosen->count("--paths")) overrides.paths = paths;
  if (chosen->count("--seed")) overrides.seed = seed;
  if (chosen->count("--grid")) overrides.grid = grid;
  return hsc::run_command(chosen->get_name(), config, overrides, std::cout);
}
