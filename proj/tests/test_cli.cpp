// Copyright 2026 The fedmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "fedmix/checkpoint.hpp"
#include "fedmix/cli.hpp"
#include "fedmix/error.hpp"

using namespace fedmix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

// Scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("fedmix_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

// A small synthetic run that finishes in well under a second.
std::vector<std::string> small_flags() {
  return {"--k",        "4",    "--f",      "0.5",  "--syn-train", "400", "--syn-test", "100",
          "--syn-dims", "6",    "--n",      "20",   "--b-u",       "16",  "--b-s",      "8",
          "--hidden",   "5",    "--n-labeled", "8", "--seed",      "4"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("metrics formatting") {
  RunResult r;
  r.records.push_back({0, 0.5, 1.0 / 3.0, 2.0, 0.0, {1, 3}, {0.25, 0.75}, 0});
  r.records.push_back({1, 0.123456789, 1e-9, 12345678.0, 0.0316998, {2}, {1.0}, 17});
  CHECK(cli::metrics_csv(r) ==
        "round,test_accuracy,sup_loss,unsup_loss,lambda_t,selected,weights,wall_ms\n"
        "0,0.5,0.333333,2,0,1;3,0.25;0.75,0\n"
        "1,0.123457,1e-09,1.23457e+07,0.0316998,2,1,17\n");
}

TEST_CASE("train writes one row per round") {
  TempDir dir;
  const auto res = run_cli(concat({"train", "--t", "2", "--out", dir / "run"}, small_flags()));
  INFO(res.err);
  REQUIRE(res.code == cli::kExitOk);
  const auto rows = lines(slurp(dir / "run/metrics.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "round,test_accuracy,sup_loss,unsup_loss,lambda_t,selected,weights,wall_ms");
  CHECK(fields(rows[1])[0] == "0");
  CHECK(fields(rows[2])[0] == "1");
  CHECK(fields(rows[1]).back() == "0");  // no timing unless requested
  CHECK(fs::exists(dir / "run/model.bin"));
  CHECK(fs::exists(dir / "run/run_meta.json"));
  CHECK(res.out.find("rounds=2") != std::string::npos);
}

TEST_CASE("same seed gives identical bytes and a monotone lambda column") {
  TempDir dir;
  for (auto scenario : {"labels_at_client", "labels_at_server"}) {
    const auto flags = concat({"--t", "6", "--scenario", scenario}, small_flags());
    REQUIRE(run_cli(concat({"train", "--out", dir / "a"}, flags)).code == 0);
    REQUIRE(run_cli(concat({"train", "--out", dir / "b"}, flags)).code == 0);
    const std::string a = slurp(dir / "a/metrics.csv");
    CHECK(a == slurp(dir / "b/metrics.csv"));
    CHECK(slurp(dir / "a/model.bin") == slurp(dir / "b/model.bin"));
    const auto rows = lines(a);
    REQUIRE(rows.size() == 7);
    double prev = -1.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double lambda = std::stod(fields(rows[i])[4]);
      CHECK(lambda >= prev);
      prev = lambda;
    }
  }
}

TEST_CASE("full participation gives identical output under both aggregation rules") {
  TempDir dir;
  const auto flags = concat(small_flags(), {"--t", "4", "--f", "1"});
  REQUIRE(run_cli(concat({"train", "--aggregation", "fedavg", "--out", dir / "avg"}, flags)).code == 0);
  REQUIRE(run_cli(concat({"train", "--aggregation", "fedfreq", "--out", dir / "freq"}, flags)).code == 0);
  CHECK(slurp(dir / "avg/metrics.csv") == slurp(dir / "freq/metrics.csv"));
  CHECK(slurp(dir / "avg/model.bin") == slurp(dir / "freq/model.bin"));
}

TEST_CASE("gamma = 1 keeps the accuracy column constant") {
  TempDir dir;
  const auto res = run_cli(concat(
      {"train", "--t", "5", "--alpha", "0", "--beta", "0", "--gamma", "1", "--out", dir / "frozen"},
      small_flags()));
  REQUIRE(res.code == 0);
  const auto rows = lines(slurp(dir / "frozen/metrics.csv"));
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 2; i < rows.size(); ++i) CHECK(fields(rows[i])[1] == fields(rows[1])[1]);
}

TEST_CASE("run_meta reproduces the run") {
  TempDir dir;
  REQUIRE(run_cli(concat({"train", "--t", "3", "--mu", "0.3", "--method", "ssl_fedavg", "--out", dir / "orig"},
                         small_flags()))
              .code == 0);
  const auto meta = nlohmann::json::parse(slurp(dir / "orig/run_meta.json"));
  CHECK(meta["seed"] == 4);
  CHECK(meta["config"]["mu"] == "0.3");
  CHECK(meta["config"]["method"] == "ssl_fedavg");
  CHECK(meta.contains("version"));
  CHECK(meta.contains("kernel_backend"));
  CHECK(meta["fedfreq_rescaled"] == false);  // 4 * 0.5 clients, exact

  REQUIRE(run_cli({"train", "--meta", dir / "orig/run_meta.json", "--out", dir / "again"}).code == 0);
  CHECK(slurp(dir / "orig/metrics.csv") == slurp(dir / "again/metrics.csv"));
  CHECK(slurp(dir / "orig/model.bin") == slurp(dir / "again/model.bin"));
  CHECK(slurp(dir / "orig/run_meta.json") == slurp(dir / "again/run_meta.json"));

  // A flag still overrides the recorded value.
  REQUIRE(run_cli({"train", "--meta", dir / "orig/run_meta.json", "--t", "1", "--out", dir / "short"}).code == 0);
  CHECK(lines(slurp(dir / "short/metrics.csv")).size() == 2);

  const ExperimentConfig cfg = cli::config_from_meta(meta);
  CHECK(cli::run_meta(cfg)["config"] == meta["config"]);
  CHECK_THROWS_AS(cli::config_from_meta(nlohmann::json::object()), ConfigError);
}

TEST_CASE("fedfreq rescaling is recorded in run_meta") {
  TempDir dir;
  // F*K = 1.2 rounds to one client: weight 1, nothing rescaled.
  const auto one = run_cli(concat(concat({"train"}, small_flags()), {"--t", "2", "--f", "0.3", "--out", dir / "one"}));
  INFO(one.err);
  REQUIRE(one.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "one/run_meta.json"))["fedfreq_rescaled"] == false);
  // F*K = 2.5 rounds up to three clients.
  const auto res = run_cli(concat(concat({"train"}, small_flags()), {"--t", "2", "--k", "10", "--f", "0.25", "--out", dir / "three"}));
  REQUIRE(res.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "three/run_meta.json"))["fedfreq_rescaled"] == true);
  CHECK(res.err.find("F*K") != std::string::npos);
}

TEST_CASE("config file with flag overrides") {
  TempDir dir;
  {
    std::ofstream f(dir / "exp.cfg");
    f << "# tiny run\nT = 9\nK=4\nF=0.5\nsyn_train=400\nsyn_test=100\nsyn_dims=6\nn=20\nB_u=16\nB_s=8\n"
         "hidden=5\nn_labeled=8\n";
  }
  REQUIRE(run_cli({"train", "--config", dir / "exp.cfg", "--T", "2", "--out", dir / "run"}).code == 0);
  CHECK(lines(slurp(dir / "run/metrics.csv")).size() == 3);
  const auto meta = nlohmann::json::parse(slurp(dir / "run/run_meta.json"));
  CHECK(meta["config"]["T"] == "2");
  CHECK(meta["config"]["hidden"] == "5");
}

TEST_CASE("partition matches the frozen snapshot") {
  TempDir dir;
  const auto res = run_cli({"partition", "--syn-train", "40", "--syn-test", "10", "--k", "4", "--mu", "0.5",
                            "--seed", "3", "--out", dir / "p.json"});
  REQUIRE(res.code == 0);
  CHECK(res.out == "clients=4\n");
  const std::string text = slurp(dir / "p.json");
  CHECK(text == slurp(fs::path(FEDMIX_GOLDEN_DIR) / "partition_k4_mu0.5_seed3.json"));

  const PartitionPlan plan = plan_from_json(text);
  CHECK(plan.mu == 0.5);
  CHECK_NOTHROW(validate_plan(plan, 40));

  REQUIRE(run_cli({"partition", "--syn-train", "40", "--k", "4", "--out", dir / "iid.json"}).code == 0);
  const PartitionPlan iid = plan_from_json(slurp(dir / "iid.json"));
  CHECK_FALSE(iid.mu.has_value());
  CHECK_NOTHROW(validate_plan(iid, 40));

  // Labels-at-server partitions only what the server does not keep.
  REQUIRE(run_cli({"partition", "--scenario", "labels_at_server", "--syn-train", "100", "--n-labeled", "30",
                   "--k", "3", "--mu", "2", "--out", dir / "las.json"})
              .code == 0);
  CHECK_NOTHROW(validate_plan(plan_from_json(slurp(dir / "las.json")), 70));
}

TEST_CASE("evaluate reports the accuracy of the saved model") {
  TempDir dir;
  REQUIRE(run_cli(concat({"train", "--t", "3", "--out", dir / "run"}, small_flags())).code == 0);
  const auto rows = lines(slurp(dir / "run/metrics.csv"));
  const std::string last_acc = fields(rows.back())[1];

  const auto res = run_cli({"evaluate", "--model", dir / "run/model.bin", "--meta", dir / "run/run_meta.json"});
  REQUIRE(res.code == 0);
  CHECK(res.out == "accuracy=" + last_acc + "\n");

  const auto trimmed = run_cli({"evaluate", "--model", dir / "run/model.bin", "--meta",
                                dir / "run/run_meta.json", "--test-size", "1"});
  REQUIRE(trimmed.code == 0);
  CHECK((trimmed.out == "accuracy=1\n" || trimmed.out == "accuracy=0\n"));

  // Wrong feature width is reported as a configuration problem.
  const auto wrong = run_cli({"evaluate", "--model", dir / "run/model.bin", "--syn-dims", "7"});
  CHECK(wrong.code == cli::kExitConfig);
  CHECK(wrong.out.empty());
}

TEST_CASE("checkpoint round trip") {
  TempDir dir;
  const MlpModel m = MlpModel::initialize({3, 4, 2}, 9);
  save_model(dir / "m.bin", m);
  const MlpModel back = load_model(dir / "m.bin");
  CHECK(back.layer_dims() == m.layer_dims());
  CHECK(back.params() == m.params());

  std::string bytes = slurp(dir / "m.bin");
  {
    std::ofstream f(dir / "short.bin", std::ios::binary);
    f << bytes.substr(0, bytes.size() - 3);
  }
  CHECK_THROWS(load_model(dir / "short.bin"));
  CHECK_THROWS(load_model(dir / "missing.bin"));
}

TEST_CASE("gen-synthetic output trains through the idx loader") {
  TempDir dir;
  REQUIRE(run_cli({"gen-synthetic", "--syn-train", "300", "--syn-test", "60", "--syn-dims", "6", "--out",
                   dir / "syn"})
              .code == 0);
  const Dataset train = load_idx(dir / "syn/train-images.idx", dir / "syn/train-labels.idx");
  CHECK(train.size() == 300);
  CHECK(train.dims() == 6);
  ::setenv("FEDMIX_DATA_DIR", (dir / "syn").c_str(), 1);
  const auto res = run_cli({"train", "--dataset", "idx", "--train-images", "train-images.idx", "--train-labels",
                            "train-labels.idx", "--test-images", "test-images.idx", "--test-labels",
                            "test-labels.idx", "--augment", "noise", "--k", "3", "--f", "1", "--t", "2", "--n",
                            "20", "--b-u", "16", "--b-s", "8", "--hidden", "4", "--n-labeled", "5", "--out",
                            dir / "run"});
  ::unsetenv("FEDMIX_DATA_DIR");
  INFO(res.err);
  CHECK(res.code == 0);
  CHECK(lines(slurp(dir / "run/metrics.csv")).size() == 3);
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(run_cli({"train", "--no-such-flag", "1"}).code == cli::kExitConfig);
  CHECK(run_cli({}).code == cli::kExitConfig);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitConfig);
  CHECK(run_cli({"evaluate"}).code == cli::kExitConfig);  // --model is required
  CHECK(run_cli({"train", "--help"}).code == cli::kExitOk);

  const auto bad_mix = run_cli({"train", "--alpha", "0.6", "--beta", "0.5", "--out", dir / "x"});
  CHECK(bad_mix.code == cli::kExitConfig);
  CHECK(bad_mix.err.find("alpha") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "x/metrics.csv"));

  CHECK(run_cli({"train", "--config", dir / "missing.cfg"}).code == cli::kExitRuntime);
  CHECK(run_cli({"evaluate", "--model", dir / "missing.bin"}).code == cli::kExitRuntime);
  CHECK(run_cli({"train", "--dataset", "idx", "--train-images", dir / "a", "--train-labels", dir / "b",
                 "--test-images", dir / "c", "--test-labels", dir / "d", "--out", dir / "y"})
            .code == cli::kExitRuntime);
  CHECK(run_cli({"train", "--dataset", "idx", "--out", dir / "z"}).code == cli::kExitConfig);

  const auto keys = run_cli({"keys"});
  CHECK(keys.code == 0);
  CHECK(keys.out == serialize(default_config(Scenario::labels_at_client)));
}
