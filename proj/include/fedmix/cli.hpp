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

#pragma once

// Command-line front end. Everything here is callable in-process so tests can
// drive it without spawning the binary.

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "fedmix/config.hpp"
#include "fedmix/orchestrator.hpp"

namespace fedmix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Dispatches `args` (program name excluded) to a subcommand and maps
/// exceptions onto exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string metrics_header();
std::string metrics_csv(const RunResult& result);

nlohmann::json run_meta(const ExperimentConfig& cfg);
ExperimentConfig config_from_meta(const nlohmann::json& meta);

/// Runs the configured protocol and writes metrics.csv, run_meta.json and
/// model.bin under `out_dir`.
RunResult cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Writes the client partition as JSON.
PartitionPlan cmd_partition(const ExperimentConfig& cfg, const std::filesystem::path& out_file);

/// Accuracy of a saved model on the configured test set.
double cmd_evaluate(const std::filesystem::path& model_file, const ExperimentConfig& cfg);

/// Writes the configured synthetic train/test sets as IDX files
/// (train-images.idx, train-labels.idx, test-images.idx, test-labels.idx).
void cmd_gen_synthetic(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace fedmix::cli
