#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "epgrad/config.hpp"
#include "epgrad/driver.hpp"

using namespace epgrad;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("drv_test") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all("drv_test"); }
  std::string str() const { return path.string(); }
};

// Tiny 2-task benchmark so driver tests run in seconds.
json tiny_config_json() {
  return json{
      {"dataset",
       {{"kind", "blobs"}, {"classes", 6}, {"pretext_classes", 2}, {"dim", 6},
        {"per_class", 40}, {"spread", 0.8}, {"margin", 3.0}}},
      {"tasks", {{"count", 2}}},
      {"model",
       {{"hidden", 16}, {"depth", 1}, {"adapter_rank", 2},
        {"pretrained", true}, {"pretrain_epochs", 3}}},
      {"loss", {{"kind", "aepg"}}},
      {"train", {{"epochs", 3}, {"batch", 16}}},
      {"seeds", {1}},
  };
}

std::string write_config(const TempDir& dir, const json& j,
                         const std::string& name = "cfg.json") {
  const std::string path = (dir.path / name).string();
  std::ofstream f(path);
  f << j.dump(2);
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults are a valid benchmark") {
    const ExperimentConfig cfg = default_config();
    CHECK(cfg.dataset.classes == 20);
    CHECK(cfg.dataset.pretext_classes == 10);
    CHECK(cfg.n_tasks == 5);
    CHECK(cfg.schedule.tau == 6.0);
    CHECK(!cfg.seeds.empty());
  }
  SUBCASE("round-trip through json") {
    const ExperimentConfig cfg = default_config();
    const ExperimentConfig back = parse_config(config_to_json(cfg));
    CHECK(config_to_json(back) == config_to_json(cfg));
  }
  SUBCASE("unknown keys are rejected") {
    json j = tiny_config_json();
    j["trains"] = json::object();
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    json j2 = tiny_config_json();
    j2["loss"]["gama"] = 1.0;
    CHECK_THROWS_AS(parse_config(j2), ConfigError);
  }
  SUBCASE("per-kind hyperparameter defaults") {
    CHECK(parse_config({{"loss", {{"kind", "focal"}}}}).loss.gamma == 1.0);
    CHECK(parse_config({{"loss", {{"kind", "label_smooth"}}}}).loss.gamma ==
          0.01);
    CHECK(parse_config({{"loss", {{"kind", "conf_penalty"}}}}).loss.beta ==
          0.1);
    CHECK(parse_config({{"loss", {{"kind", "entropy_penalty"}}}}).loss.beta ==
          1.0);
    CHECK(parse_config({{"optimizer", {{"kind", "sgd"}}}}).optimizer.lr ==
          0.05);
    CHECK(parse_config({{"optimizer", {{"kind", "adam"}}}}).optimizer.lr ==
          5e-4);
  }
  SUBCASE("range validation") {
    CHECK_THROWS_AS(parse_config({{"noise", {{"eta", 1.5}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"loss", {{"kind", "label_smooth"},
                                            {"gamma", 1.0}}}}),
                    ConfigError);
    CHECK_THROWS_AS(parse_config({{"seeds", json::array()}}), ConfigError);
  }
}

TEST_CASE("cmd_run") {
  TempDir dir("run");
  std::ostringstream log;

  SUBCASE("missing config file exits 2") {
    CHECK(cmd_run("no_such_config.json", 1, dir.str(), log) == 2);
  }
  SUBCASE("malformed json exits 2") {
    const std::string path = (dir.path / "bad.json").string();
    std::ofstream f(path);
    f << "{ not json";
    f.close();
    CHECK(cmd_run(path, 1, dir.str(), log) == 2);
  }
  SUBCASE("unreadable dataset file exits 1") {
    json j = tiny_config_json();
    j["dataset"] = {{"kind", "csv"}, {"path", "missing.csv"},
                    {"pretext_classes", 0}};
    const std::string path = write_config(dir, j);
    CHECK(cmd_run(path, 1, dir.str(), log) == 1);
  }

  SUBCASE("minimal 2-task run writes all three files per seed plus summary") {
    const std::string path = write_config(dir, tiny_config_json());
    const std::string out = (dir.path / "out").string();
    CHECK(cmd_run(path, 1, out, log) == 0);

    CHECK(fs::exists(out + "/seed_1/metrics.json"));
    CHECK(fs::exists(out + "/seed_1/trace.csv"));
    CHECK(fs::exists(out + "/seed_1/accuracy_matrix.csv"));
    CHECK(fs::exists(out + "/summary.json"));

    const json metrics = json::parse(slurp(out + "/seed_1/metrics.json"));
    for (const char* key :
         {"seed", "end_accuracy", "average_accuracy", "final_entropy",
          "per_task_accuracy", "forgetting", "config"}) {
      CHECK(metrics.contains(key));
    }
    CHECK(metrics["per_task_accuracy"].size() == 2);
    CHECK(metrics["end_accuracy"].get<double>() >= 0.0);
    CHECK(metrics["end_accuracy"].get<double>() <= 1.0);

    // trace.csv schema
    std::ifstream trace(out + "/seed_1/trace.csv");
    std::string header;
    std::getline(trace, header);
    CHECK(header == "step,task,epoch,alpha,loss,entropy");
    std::string first_row;
    std::getline(trace, first_row);
    CHECK(first_row.substr(0, 2) == "0,");

    // accuracy_matrix.csv: 2x2 lower-triangular with a blank upper cell
    std::ifstream acc(out + "/seed_1/accuracy_matrix.csv");
    std::getline(acc, header);
    CHECK(header == "after_task,task_1,task_2");
    std::string row1, row2;
    std::getline(acc, row1);
    std::getline(acc, row2);
    CHECK(row1.back() == ',');  // task_2 cell blank after task 1
    CHECK(row2.find(',') != std::string::npos);
  }

  SUBCASE("three seeds: summary holds mean and sample std, recomputable") {
    json j = tiny_config_json();
    j["seeds"] = {1, 2, 3};
    const std::string path = write_config(dir, j);
    const std::string out = (dir.path / "out3").string();
    REQUIRE(cmd_run(path, 2, out, log) == 0);

    const json summary = json::parse(slurp(out + "/summary.json"));
    std::vector<double> acc;
    for (int seed : {1, 2, 3}) {
      const json m = json::parse(
          slurp(out + "/seed_" + std::to_string(seed) + "/metrics.json"));
      acc.push_back(m["end_accuracy"].get<double>());
    }
    const auto [mean, sd] = mean_and_sample_std(acc);
    CHECK(summary["end_accuracy"]["mean"].get<double>() == mean);
    CHECK(summary["end_accuracy"]["std"].get<double>() == sd);
    CHECK(summary["runs"].size() == 3);
  }

  SUBCASE("repeated runs produce byte-identical metrics.json") {
    const std::string path = write_config(dir, tiny_config_json());
    const std::string out_a = (dir.path / "det_a").string();
    const std::string out_b = (dir.path / "det_b").string();
    REQUIRE(cmd_run(path, 1, out_a, log) == 0);
    REQUIRE(cmd_run(path, 1, out_b, log) == 0);
    CHECK(slurp(out_a + "/seed_1/metrics.json") ==
          slurp(out_b + "/seed_1/metrics.json"));
    CHECK(slurp(out_a + "/seed_1/trace.csv") ==
          slurp(out_b + "/seed_1/trace.csv"));
    CHECK(slurp(out_a + "/seed_1/accuracy_matrix.csv") ==
          slurp(out_b + "/seed_1/accuracy_matrix.csv"));
  }

  SUBCASE("EPGRAD_OUT provides the default output directory") {
    json j = tiny_config_json();  // no out_dir in config
    const std::string path = write_config(dir, j);
    const std::string env_out = (dir.path / "env_out").string();
    setenv("EPGRAD_OUT", env_out.c_str(), 1);
    CHECK(cmd_run(path, 1, "", log) == 0);
    unsetenv("EPGRAD_OUT");
    CHECK(fs::exists(env_out + "/summary.json"));
  }
}

TEST_CASE("cmd_verify") {
  std::ostringstream out;
  SUBCASE("fresh suite passes and prints the annealing endpoints") {
    CHECK(cmd_verify(out) == 0);
    const std::string s = out.str();
    CHECK(s.find("FAIL") == std::string::npos);
    CHECK(s.find("0.9975") != std::string::npos);  // endpoint reproduction
    CHECK(s.find("0.9820") != std::string::npos);
    CHECK(s.find("0.9997") != std::string::npos);
  }
  SUBCASE("injected EPG sign error is caught and named") {
    VerifyOptions opts;
    opts.inject_epg_sign_error = true;
    CHECK(cmd_verify(out, opts) == 1);
    const std::string s = out.str();
    CHECK(s.find("FAIL  grad_ratio_check") != std::string::npos);
  }
}

TEST_CASE("cmd_sweep") {
  TempDir dir("sweep");
  std::ostringstream log;
  const std::string path = write_config(dir, tiny_config_json());

  SUBCASE("alpha_const over four values emits four rows") {
    const std::string out = (dir.path / "sw").string();
    CHECK(cmd_sweep(path, "alpha_const", {"0", "0.2", "0.5", "1"}, 2, out,
                    log) == 0);
    std::ifstream csv(out + "/sweep.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "value,end_accuracy_mean,end_accuracy_std,final_entropy_mean");
    int rows = 0;
    std::string line;
    while (std::getline(csv, line)) {
      if (!line.empty()) ++rows;
    }
    CHECK(rows == 4);
  }

  SUBCASE("loss.kind sweep covers the zoo") {
    const std::string out = (dir.path / "zoo").string();
    CHECK(cmd_sweep(path, "loss.kind", {"ce", "epg", "aepg"}, 2, out, log) ==
          0);
    CHECK(fs::exists(out + "/loss_kind_ce/summary.json"));
    CHECK(fs::exists(out + "/loss_kind_epg/summary.json"));
  }

  SUBCASE("unknown parameter exits 2") {
    CHECK(cmd_sweep(path, "bogus_param", {"1"}, 1, dir.str(), log) == 2);
  }
  SUBCASE("non-numeric value for a numeric parameter exits 2") {
    CHECK(cmd_sweep(path, "tau", {"abc"}, 1, dir.str(), log) == 2);
  }
}
