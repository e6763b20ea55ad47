// Command entry points behind the CLI, exposed as library functions so tests
// can exercise the exit-code contract in-process: 0 success, 1 run or check
// failure, 2 usage/config error.
#pragma once

#include <iostream>
#include <string>
#include <vector>

#include "epgrad/harness.hpp"
#include "epgrad/verify.hpp"

namespace epgrad {

// Mean and n-1 sample standard deviation; the summary writer and any
// recomputation must go through this exact function.
std::pair<double, double> mean_and_sample_std(const std::vector<double>& xs);

// Resolves the output directory: explicit --out flag, then the config's
// out_dir, then $EPGRAD_OUT, then "runs".
std::string resolve_out_dir(const std::string& flag_out,
                            const std::string& cfg_out);

// Executes every seed of the config (up to `jobs` in parallel), writing
// <out>/seed_<s>/{metrics.json,trace.csv,accuracy_matrix.csv} and
// <out>/summary.json.
int cmd_run(const std::string& config_path, int jobs,
            const std::string& out_override, std::ostream& log);

// Runs the analytical-identity suite; prints one line per check.
int cmd_verify(std::ostream& out, const VerifyOptions& opts = {});

// One run set per value of a sweepable parameter (alpha_const, tau, eta,
// loss.kind, schedule.kind); writes <out>/sweep.csv.
int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::vector<std::string>& values, int jobs,
              const std::string& out_override, std::ostream& log);

// Single-run output writer (also used by sweep).
void write_run_outputs(const ExperimentConfig& cfg, const RunResult& result,
                       const std::string& dir);

}  // namespace epgrad
