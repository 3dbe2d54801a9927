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

#include "fedmix/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "fedmix/checkpoint.hpp"
#include "fedmix/error.hpp"
#include "fedmix/simd/kernels.hpp"

#ifndef FEDMIX_VERSION
#define FEDMIX_VERSION "0.0.0"
#endif

namespace fedmix::cli {

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ';';
    out += fmt(items[i]);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string kebab(const std::string& key) {
  std::string flag = key;
  std::ranges::replace(flag, '_', '-');
  return flag;
}

struct ParsedArgs {
  std::string config;
  std::string meta;
  std::string out;
  std::string model;
  std::map<std::string, std::string> values;  // config key -> flag value
  ConfigEntries overrides;
};

// Every config key becomes a kebab-case flag, matched case-insensitively so
// --lambda-l2 and --b-u work as well as --lambda-L2 and --B-u.
void add_config_flags(CLI::App* sub, ParsedArgs& parsed) {
  for (const auto& key : config_keys()) {
    sub->add_option("--" + kebab(key), parsed.values[key], "config key " + key)
        ->ignore_case()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)
        ->group("Config");
  }
}

void collect_overrides(const CLI::App* sub, ParsedArgs& parsed) {
  for (const auto& key : config_keys()) {
    if (sub->count("--" + kebab(key)) > 0) parsed.overrides.emplace_back(key, parsed.values[key]);
  }
}

ExperimentConfig resolve_config(const ParsedArgs& parsed) {
  if (!parsed.meta.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(parsed.meta));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("meta", std::string("unreadable run_meta.json: ") + e.what());
    }
    return parse_config(to_entries(config_from_meta(j)), parsed.overrides);
  }
  ConfigEntries file;
  if (!parsed.config.empty()) file = read_config_entries(read_file(parsed.config));
  return parse_config(file, parsed.overrides);
}

}  // namespace

std::string metrics_header() { return "round,test_accuracy,sup_loss,unsup_loss,lambda_t,selected,weights,wall_ms\n"; }

std::string metrics_csv(const RunResult& result) {
  std::string out = metrics_header();
  for (const auto& r : result.records) {
    out += std::to_string(r.round) + ',' + fmt6(r.test_accuracy) + ',' + fmt6(r.sup_loss) + ',' +
           fmt6(r.unsup_loss) + ',' + fmt6(r.lambda_t) + ',' +
           join(r.selected, [](std::size_t k) { return std::to_string(k); }) + ',' + join(r.weights, fmt6) + ',' +
           std::to_string(r.wall_ms) + '\n';
  }
  return out;
}

nlohmann::json run_meta(const ExperimentConfig& cfg) {
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : to_entries(cfg)) config[k] = v;
  return {{"version", FEDMIX_VERSION},
          {"seed", cfg.seed},
          {"kernel_backend", std::string(simd::active().name)},
          {"config", config}};
}

ExperimentConfig config_from_meta(const nlohmann::json& meta) {
  if (!meta.contains("config") || !meta["config"].is_object()) {
    throw ConfigError("meta", "run_meta.json has no config object");
  }
  ConfigEntries entries;
  for (const auto& key : config_keys()) {
    if (meta["config"].contains(key)) entries.emplace_back(key, meta["config"][key].get<std::string>());
  }
  for (const auto& [k, v] : meta["config"].items()) {
    if (std::ranges::find(config_keys(), k) == config_keys().end()) throw ConfigError(k, "unknown key");
  }
  return parse_config(entries);
}

RunResult cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  RunResult result = run_experiment(cfg);
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "metrics.csv", metrics_csv(result));
  nlohmann::json meta = run_meta(cfg);
  // Set when a round selected a count other than F*K and FedFreq weights were
  // renormalized to sum to 1.
  meta["fedfreq_rescaled"] = result.fedfreq_rescaled;
  write_file(out_dir / "run_meta.json", meta.dump(2) + "\n");
  save_model(out_dir / "model.bin", MlpModel(result.layer_dims, result.final_state.omega));
  return result;
}

PartitionPlan cmd_partition(const ExperimentConfig& cfg, const std::filesystem::path& out_file) {
  const LoadedData loaded = load_datasets(cfg);
  Dataset pool = loaded.train;
  if (cfg.scenario == Scenario::labels_at_server) pool = pool.subset(server_split(cfg, pool).unlabeled_indices);
  PartitionPlan plan = plan_partition(cfg, pool);
  write_file(out_file, plan_to_json(plan) + "\n");
  return plan;
}

double cmd_evaluate(const std::filesystem::path& model_file, const ExperimentConfig& cfg) {
  const MlpModel model = load_model(model_file);
  const LoadedData loaded = load_datasets(cfg);
  if (loaded.test.dims() != model.input_dim()) {
    throw ConfigError("dataset", "test features have " + std::to_string(loaded.test.dims()) +
                                     " columns, the model expects " + std::to_string(model.input_dim()));
  }
  return evaluate(model, loaded.test);
}

void cmd_gen_synthetic(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  SyntheticSpec spec{cfg.syn_classes, cfg.syn_dims, cfg.syn_train + cfg.syn_test, cfg.syn_spread, cfg.seed};
  const Dataset all = gen_synthetic(spec);
  std::vector<std::size_t> head(cfg.syn_train);
  std::vector<std::size_t> tail(cfg.syn_test);
  std::iota(head.begin(), head.end(), 0);
  std::iota(tail.begin(), tail.end(), cfg.syn_train);
  std::filesystem::create_directories(out_dir);
  for (auto [name, idx] : {std::pair{"train", &head}, std::pair{"test", &tail}}) {
    const Dataset part = all.subset(*idx);
    write_idx_images(out_dir / (std::string(name) + "-images.idx"), part.features, 1, cfg.syn_dims);
    write_idx_labels(out_dir / (std::string(name) + "-labels.idx"), *part.labels);
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised federated learning simulator", "fedmix"};
  app.footer(
      "Relative data paths resolve against $FEDMIX_DATA_DIR when set.\n"
      "Exit codes: 0 ok, 1 runtime error, 2 config error.");
  app.set_version_flag("--version", std::string("fedmix ") + FEDMIX_VERSION);
  app.require_subcommand(1);

  ParsedArgs parsed;
  auto* train = app.add_subcommand("train", "run the configured protocol");
  train->add_option("--config", parsed.config, "key=value config file");
  train->add_option("--meta", parsed.meta, "run_meta.json of a previous run to reproduce");
  train->add_option("--out", parsed.out, "output directory")->default_str(".");
  add_config_flags(train, parsed);

  auto* partition = app.add_subcommand("partition", "write the client partition as JSON");
  partition->add_option("--config", parsed.config, "key=value config file");
  partition->add_option("--out", parsed.out, "output file")->default_str("partition.json");
  add_config_flags(partition, parsed);

  auto* eval = app.add_subcommand("evaluate", "accuracy of a saved model on the configured test set");
  eval->add_option("--model", parsed.model, "model file written by train")->required();
  eval->add_option("--config", parsed.config, "key=value config file");
  eval->add_option("--meta", parsed.meta, "run_meta.json of the run that produced the model");
  add_config_flags(eval, parsed);

  auto* gen = app.add_subcommand("gen-synthetic", "write synthetic train/test sets as IDX files");
  gen->add_option("--config", parsed.config, "key=value config file");
  gen->add_option("--out", parsed.out, "output directory")->default_str(".");
  add_config_flags(gen, parsed);

  auto* keys = app.add_subcommand("keys", "print every config key with its default");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (keys->parsed()) {
      out << serialize(default_config(Scenario::labels_at_client));
      return kExitOk;
    }
    if (train->parsed()) {
      collect_overrides(train, parsed);
      const ExperimentConfig cfg = resolve_config(parsed);
      const RunResult result = cmd_train(cfg, parsed.out.empty() ? "." : parsed.out);
      const double final_acc = result.records.empty() ? 0.0 : result.records.back().test_accuracy;
      out << "rounds=" << result.records.size() << " final_accuracy=" << fmt6(final_acc)
          << " backend=" << simd::active().name << "\n";
      if (result.fedfreq_rescaled) err << "note: some rounds selected a count other than F*K\n";
      return kExitOk;
    }
    if (partition->parsed()) {
      collect_overrides(partition, parsed);
      const PartitionPlan plan =
          cmd_partition(resolve_config(parsed), parsed.out.empty() ? "partition.json" : parsed.out);
      out << "clients=" << plan.assignments.size() << "\n";
      return kExitOk;
    }
    if (eval->parsed()) {
      collect_overrides(eval, parsed);
      const double accuracy = cmd_evaluate(parsed.model, resolve_config(parsed));
      out << "accuracy=" << fmt6(accuracy) << "\n";
      return kExitOk;
    }
    collect_overrides(gen, parsed);
    cmd_gen_synthetic(resolve_config(parsed), parsed.out.empty() ? "." : parsed.out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace fedmix::cli
