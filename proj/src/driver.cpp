#include "epgrad/driver.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "epgrad/config.hpp"

namespace epgrad {

namespace fs = std::filesystem;
using nlohmann::json;

std::pair<double, double> mean_and_sample_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

std::string resolve_out_dir(const std::string& flag_out,
                            const std::string& cfg_out) {
  if (!flag_out.empty()) return flag_out;
  if (!cfg_out.empty()) return cfg_out;
  if (const char* env = std::getenv("EPGRAD_OUT"); env != nullptr && *env) {
    return env;
  }
  return "runs";
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "step,task,epoch,alpha,loss,entropy\n";
  for (const TraceRow& r : trace) {
    f << r.step << "," << r.task << "," << r.epoch << "," << fmt17(r.alpha)
      << "," << fmt17(r.loss) << "," << fmt17(r.entropy) << "\n";
  }
}

void write_accuracy_csv(const AccuracyMatrix& acc, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  const int T = acc.num_tasks();
  f << "after_task";
  for (int i = 0; i < T; ++i) f << ",task_" << (i + 1);
  f << "\n";
  // row j holds the accuracies measured after training task j; cells for
  // tasks not yet seen stay blank
  for (int j = 0; j < T; ++j) {
    f << (j + 1);
    for (int i = 0; i < T; ++i) {
      f << ",";
      if (i <= j) f << fmt17(acc.at(i, j));
    }
    f << "\n";
  }
}

void write_metrics_json(const ExperimentConfig& cfg, const RunResult& r,
                        const std::string& path) {
  json j;
  j["seed"] = r.seed;
  j["end_accuracy"] = r.metrics.end_accuracy;
  j["average_accuracy"] = r.metrics.average_accuracy;
  j["final_entropy"] = r.final_entropy;
  j["per_task_accuracy"] = r.acc.cols.back();
  j["forgetting"] = r.metrics.forgetting;  // diagnostic, not a headline metric
  j["config"] = config_to_json(cfg);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << j.dump(1) << "\n";
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  double end_accuracy = 0.0;
  double average_accuracy = 0.0;
  double final_entropy = 0.0;
};

// Runs every seed of cfg, up to `jobs` concurrently; per-seed outputs land in
// <out_dir>/seed_<s>/. Rethrows the first per-run failure.
std::vector<SeedOutcome> run_all_seeds(const ExperimentConfig& cfg,
                                       const std::string& out_dir, int jobs) {
  fs::create_directories(out_dir);
  std::vector<SeedOutcome> outcomes(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      try {
        const std::uint64_t seed = cfg.seeds[i];
        const RunResult result = run_experiment(cfg, seed);
        const std::string dir =
            out_dir + "/seed_" + std::to_string(seed);
        write_run_outputs(cfg, result, dir);
        outcomes[i] = SeedOutcome{seed, result.metrics.end_accuracy,
                                  result.metrics.average_accuracy,
                                  result.final_entropy};
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int n_threads =
      std::max(1, std::min<int>(jobs, static_cast<int>(cfg.seeds.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return outcomes;
}

json summarize(const std::vector<SeedOutcome>& outcomes) {
  std::vector<double> acc, avg, ent;
  json per_seed = json::array();
  for (const SeedOutcome& o : outcomes) {
    acc.push_back(o.end_accuracy);
    avg.push_back(o.average_accuracy);
    ent.push_back(o.final_entropy);
    per_seed.push_back({{"seed", o.seed},
                        {"end_accuracy", o.end_accuracy},
                        {"average_accuracy", o.average_accuracy},
                        {"final_entropy", o.final_entropy}});
  }
  const auto [am, as] = mean_and_sample_std(acc);
  const auto [vm, vs] = mean_and_sample_std(avg);
  const auto [em, es] = mean_and_sample_std(ent);
  json j;
  j["runs"] = per_seed;
  j["end_accuracy"] = {{"mean", am}, {"std", as}};
  j["average_accuracy"] = {{"mean", vm}, {"std", vs}};
  j["final_entropy"] = {{"mean", em}, {"std", es}};
  return j;
}

}  // namespace

void write_run_outputs(const ExperimentConfig& cfg, const RunResult& result,
                       const std::string& dir) {
  fs::create_directories(dir);
  write_metrics_json(cfg, result, dir + "/metrics.json");
  write_trace_csv(result.trace, dir + "/trace.csv");
  write_accuracy_csv(result.acc, dir + "/accuracy_matrix.csv");
}

int cmd_run(const std::string& config_path, int jobs,
            const std::string& out_override, std::ostream& log) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
  const std::string out_dir = resolve_out_dir(out_override, cfg.out_dir);
  try {
    const auto outcomes = run_all_seeds(cfg, out_dir, jobs);
    json summary = summarize(outcomes);
    summary["config"] = config_to_json(cfg);
    std::ofstream f(out_dir + "/summary.json");
    if (!f) throw std::runtime_error("cannot open " + out_dir + "/summary.json");
    f << summary.dump(1) << "\n";
    for (const auto& o : outcomes) {
      log << "seed " << o.seed << ": A_T=" << o.end_accuracy
          << " ~A_T=" << o.average_accuracy << " H=" << o.final_entropy
          << "\n";
    }
    log << "summary written to " << out_dir << "/summary.json\n";
    return 0;
  } catch (const std::exception& e) {
    log << "run failed: " << e.what() << "\n";
    return 1;
  }
}

int cmd_verify(std::ostream& out, const VerifyOptions& opts) {
  const std::vector<CheckResult> results = run_identity_suite(opts);
  bool all_pass = true;
  for (const CheckResult& r : results) {
    out << (r.pass ? "PASS" : "FAIL") << "  " << r.name
        << "  max_dev=" << r.max_deviation << "  (" << r.detail << ")\n";
    all_pass = all_pass && r.pass;
  }
  out << (all_pass ? "verify: all checks passed\n"
                   : "verify: FAILURES present\n");
  return all_pass ? 0 : 1;
}

namespace {

// Applies one sweep value to a config; throws ConfigError on unknown params.
void apply_sweep_value(ExperimentConfig& cfg, const std::string& param,
                       const std::string& value) {
  auto as_number = [&]() {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("junk");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("sweep: value '" + value + "' is not numeric");
    }
  };
  if (param == "alpha_const") {
    cfg.loss.kind = LossKind::AdaptiveEpg;
    cfg.schedule.kind = ScheduleKind::Constant;
    cfg.schedule.value = as_number();
    if (cfg.schedule.value < 0.0 || cfg.schedule.value > 1.0) {
      throw ConfigError("sweep: alpha_const must lie in [0,1]");
    }
  } else if (param == "tau") {
    cfg.schedule.tau = as_number();
    if (cfg.schedule.tau <= 0.0) throw ConfigError("sweep: tau must be > 0");
  } else if (param == "eta") {
    cfg.noise_eta = as_number();
    if (cfg.noise_eta < 0.0 || cfg.noise_eta > 1.0) {
      throw ConfigError("sweep: eta must lie in [0,1]");
    }
  } else if (param == "loss.kind") {
    try {
      cfg.loss.kind = loss_kind_from_string(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("sweep: ") + e.what());
    }
  } else if (param == "schedule.kind") {
    try {
      cfg.schedule.kind = schedule_kind_from_string(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("sweep: ") + e.what());
    }
  } else {
    throw ConfigError("sweep: unknown parameter '" + param + "'");
  }
}

std::string sanitize_component(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == '.') c = '_';
  }
  return s;
}

}  // namespace

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::vector<std::string>& values, int jobs,
              const std::string& out_override, std::ostream& log) {
  ExperimentConfig base;
  try {
    base = parse_config_file(config_path);
    if (values.empty()) throw ConfigError("sweep: no values given");
    for (const std::string& v : values) {
      ExperimentConfig probe = base;
      apply_sweep_value(probe, param, v);  // validate all values up front
    }
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
  const std::string out_dir = resolve_out_dir(out_override, base.out_dir);
  try {
    fs::create_directories(out_dir);
    std::ofstream csv(out_dir + "/sweep.csv");
    if (!csv) throw std::runtime_error("cannot open " + out_dir + "/sweep.csv");
    csv << "value,end_accuracy_mean,end_accuracy_std,final_entropy_mean\n";
    for (const std::string& v : values) {
      ExperimentConfig cfg = base;
      apply_sweep_value(cfg, param, v);
      const std::string sub =
          out_dir + "/" + sanitize_component(param) + "_" +
          sanitize_component(v);
      const auto outcomes = run_all_seeds(cfg, sub, jobs);
      json summary = summarize(outcomes);
      summary["config"] = config_to_json(cfg);
      std::ofstream sf(sub + "/summary.json");
      sf << summary.dump(1) << "\n";
      std::vector<double> acc, ent;
      for (const auto& o : outcomes) {
        acc.push_back(o.end_accuracy);
        ent.push_back(o.final_entropy);
      }
      const auto [am, as] = mean_and_sample_std(acc);
      const auto [em, es] = mean_and_sample_std(ent);
      (void)es;
      csv << v << "," << fmt17(am) << "," << fmt17(as) << "," << fmt17(em)
          << "\n";
      log << param << "=" << v << ": A_T " << am << " +/- " << as << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    log << "sweep failed: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace epgrad
