#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qresp/io.hpp"
#include "qresp/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  bool exact_sampling = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Path to the JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "Output directory (default: output.dir from the config)");
  cmd->add_option("--seed", args.seed, "Master seed override")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--workers", args.workers, "Worker threads (default: available parallelism)");
  cmd->add_flag("--exact-sampling", args.exact_sampling,
                "Skip shot noise: keep exact populations, attach predicted errors");
}

qresp::io::CommandOptions to_options(const CommonArgs& args) {
  qresp::io::CommandOptions opt;
  if (!args.out_dir.empty()) opt.out_dir = args.out_dir;
  if (args.seed_set) opt.seed = args.seed;
  opt.workers = args.workers;
  opt.exact_sampling = args.exact_sampling;
  return opt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qresp: weak-field light-matter response simulator"};
  app.set_version_flag("--version", qresp::kVersion);
  app.require_subcommand(1);

  CommonArgs oracle_args, protocol_args, sample_args, convolve_args, auxcheck_args, budget_args,
      sweep_args;

  auto* oracle = app.add_subcommand("oracle", "Exact continuum response table");
  add_common(oracle, oracle_args);

  auto* protocol = app.add_subcommand(
      "protocol", "Single-mode pulse-pair emulation and response reconstruction");
  add_common(protocol, protocol_args);

  auto* sample = app.add_subcommand("sample", "Protocol emulation with binomial shot noise");
  add_common(sample, sample_args);

  auto* convolve =
      app.add_subcommand("convolve", "Convolve a response table with the configured wavepacket");
  add_common(convolve, convolve_args);
  std::string table_path;
  convolve->add_option("--table", table_path, "Response table CSV (default: <out>/greens_exact.csv)")
      ->check(CLI::ExistingFile);

  auto* auxcheck =
      app.add_subcommand("auxcheck", "Adiabatic-elimination error sweep for the engineered decay");
  add_common(auxcheck, auxcheck_args);

  auto* budget = app.add_subcommand("budget", "Trial-count planning for a target population error");
  add_common(budget, budget_args);
  double target_sigma = 0.0;
  bool target_set = false;
  budget->add_option("--target-sigma", target_sigma, "Target sigma_P (overrides the config)")
      ->each([&](const std::string&) { target_set = true; });

  auto* sweep = app.add_subcommand("sweep", "Run the protocol along one parameter axis");
  add_common(sweep, sweep_args);
  std::vector<std::string> axis_args;
  sweep
      ->add_option("--axis", axis_args,
                   "Axis name followed by values, e.g. --axis dt 5 10 20 "
                   "(axes: dt, t_gamma, n_gamma, chi2, trials, sigma_t)")
      ->required()
      ->expected(2, -1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (oracle->parsed()) {
      auto cfg = qresp::io::parse_config_file(oracle_args.config_path);
      qresp::io::cmd_oracle(cfg, to_options(oracle_args));
    } else if (protocol->parsed()) {
      auto cfg = qresp::io::parse_config_file(protocol_args.config_path);
      qresp::io::cmd_protocol(cfg, to_options(protocol_args));
    } else if (sample->parsed()) {
      auto cfg = qresp::io::parse_config_file(sample_args.config_path);
      qresp::io::cmd_sample(cfg, to_options(sample_args));
    } else if (convolve->parsed()) {
      auto cfg = qresp::io::parse_config_file(convolve_args.config_path);
      auto opt = to_options(convolve_args);
      if (!table_path.empty()) opt.table_path = table_path;
      qresp::io::cmd_convolve(cfg, opt);
    } else if (auxcheck->parsed()) {
      auto cfg = qresp::io::parse_config_file(auxcheck_args.config_path);
      qresp::io::cmd_auxcheck(cfg, to_options(auxcheck_args));
    } else if (budget->parsed()) {
      auto cfg = qresp::io::parse_config_file(budget_args.config_path);
      auto opt = to_options(budget_args);
      if (target_set) opt.target_sigma = target_sigma;
      qresp::io::cmd_budget(cfg, opt);
    } else if (sweep->parsed()) {
      auto cfg = qresp::io::parse_config_file(sweep_args.config_path);
      const std::string axis = axis_args.front();
      std::vector<double> values;
      for (size_t i = 1; i < axis_args.size(); ++i) {
        // allow comma-separated lists as a single argument
        std::stringstream ss(axis_args[i]);
        std::string cell;
        while (std::getline(ss, cell, ','))
          if (!cell.empty()) values.push_back(std::stod(cell));
      }
      qresp::io::cmd_sweep(cfg, to_options(sweep_args), axis, values);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
