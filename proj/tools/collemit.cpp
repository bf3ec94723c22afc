#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "collemit/cli/commands.hpp"

namespace cli = collemit::cli;

int main(int argc, char** argv) {
  CLI::App app{"Directional emission from collective atomic states"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string format = "both";
  std::uint64_t seed = 0;
  int jobs = 1;
  app.add_option("--config", config_path, "Configuration file (INI)")->required();
  app.add_option("--out", out_dir, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Monte Carlo seed (overrides [sampling] seed)");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", format, "Artifacts to write")->check(CLI::IsMember({"csv", "json", "both"}));

  app.add_subcommand("pattern", "Emission pattern, error probability and cone width");
  app.add_subcommand("sweep", "Parameter sweep with optional power-law fit");
  app.add_subcommand("states", "Schmidt ranks and MPS form of a collective state");
  app.add_subcommand("rydberg", "Blockade preparation dynamics");
  app.add_subcommand("chain", "Coulomb-chain equilibrium positions");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitInvalidConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return cli::guarded(
      [&] {
        cli::GlobalOptions opts;
        opts.out_dir = out_dir;
        opts.jobs = jobs;
        opts.format = cli::parse_format(format);
        if (seed_opt->count() > 0) opts.seed = seed;
        const cli::Config cfg = cli::Config::load(config_path);
        if (command == "pattern") cli::run_pattern(cfg, opts, std::cout);
        else if (command == "sweep") cli::run_sweep(cfg, opts, std::cout);
        else if (command == "states") cli::run_states(cfg, opts, std::cout);
        else if (command == "rydberg") cli::run_rydberg(cfg, opts, std::cout);
        else cli::run_chain(cfg, opts, std::cout);
      },
      std::cerr);
}
