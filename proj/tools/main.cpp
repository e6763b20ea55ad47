// epgrad command line: config-driven experiment runs, the analytical
// verification suite, and hyperparameter sweeps.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epgrad/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Policy-gradient classification losses with entropy annealing and a "
      "class-incremental training harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int jobs = 1;

  CLI::App* run = app.add_subcommand("run", "Run every seed of a config");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("--jobs", jobs, "max concurrent seed runs");
  run->add_option("--out", out_dir, "output directory (overrides config)");

  CLI::App* verify =
      app.add_subcommand("verify", "Run the analytical identity suite");

  std::string sweep_param;
  std::string sweep_values;
  CLI::App* sweep =
      app.add_subcommand("sweep", "Run one config across parameter values");
  sweep->add_option("config", config_path, "JSON experiment config")
      ->required();
  sweep->add_option("--param", sweep_param,
                    "alpha_const | tau | eta | loss.kind | schedule.kind")
      ->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")
      ->required();
  sweep->add_option("--jobs", jobs, "max concurrent seed runs");
  sweep->add_option("--out", out_dir, "output directory (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems map to exit 2
  }

  if (run->parsed()) {
    return epgrad::cmd_run(config_path, jobs, out_dir, std::cout);
  }
  if (verify->parsed()) {
    return epgrad::cmd_verify(std::cout);
  }
  if (sweep->parsed()) {
    std::vector<std::string> values;
    std::string cur;
    for (char c : sweep_values) {
      if (c == ',') {
        values.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) values.push_back(cur);
    return epgrad::cmd_sweep(config_path, sweep_param, values, jobs, out_dir,
                             std::cout);
  }
  return 2;
}
