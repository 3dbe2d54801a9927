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

// Declarative description of one run, parsed from a flat key=value file with
// command-line overrides.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedmix/aggregation.hpp"
#include "fedmix/objectives.hpp"
#include "fedmix/pseudo.hpp"

namespace fedmix {

enum class Scenario { labels_at_client, labels_at_server };
enum class Method { fedmix, sl_fedavg, ssl_fedavg, naive_decomposition };
enum class AggregationRule { fedavg, fedfreq };
enum class DatasetKind { idx, cifar_bin, synthetic };
enum class AugmentMode { automatic, image, noise };

struct ExperimentConfig {
  Scenario scenario = Scenario::labels_at_client;
  Method method = Method::fedmix;
  AggregationRule aggregation = AggregationRule::fedfreq;
  SelectionKind selection = SelectionKind::uncertainty;
  ConsistencyKind consistency = ConsistencyKind::squared;

  DatasetKind dataset = DatasetKind::synthetic;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::vector<std::string> cifar_train;
  std::vector<std::string> cifar_test;
  std::size_t syn_classes = 4;
  std::size_t syn_dims = 16;
  std::size_t syn_train = 4200;
  std::size_t syn_test = 2000;
  double syn_spread = 0.35;
  std::size_t test_size = 0;  // 0 keeps the whole test set

  // Labeled samples per client (labels-at-client) or at the server
  // (labels-at-server).
  std::size_t n_labeled = 50;

  std::size_t K = 100;
  double F = 0.05;
  std::size_t T = 600;
  std::size_t A = 3;
  std::size_t n = 100;
  std::size_t B_u = 100;
  std::size_t B_s = 10;
  std::size_t E_u = 1;
  std::size_t E_s = 1;
  double eta = 1e-2;
  double lambda_s = 10.0;
  double lambda_L2 = 15.0;
  double alpha = 0.5;
  double beta = 0.3;
  double gamma = 0.2;
  std::optional<double> mu;  // nullopt: IID partition
  bool streaming = false;
  std::uint64_t seed = 0;

  std::vector<std::size_t> hidden{64};
  AugmentMode augment = AugmentMode::automatic;
  double aug_noise = 0.05;
  bool record_timing = false;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  SslHyperparams ssl_hyperparams() const;
  MixWeights mix_weights() const { return {alpha, beta, gamma}; }
};

/// Defaults for a scenario: batch size, learning rate, rounds and labeled
/// counts differ between the two.
ExperimentConfig default_config(Scenario scenario);

/// Key=value pairs in file order; '#' starts a comment line. Keys are
/// snake_case field names.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;
ConfigEntries read_config_entries(const std::string& text);

/// Builds a validated config: defaults for the scenario (from `overrides`,
/// else `file`, else labels_at_client), then file entries, then overrides.
/// Throws ConfigError naming the key on unknown keys, bad values, or
/// invariant violations. Relative dataset paths resolve against
/// $FEDMIX_DATA_DIR when set.
ExperimentConfig parse_config(const ConfigEntries& file, const ConfigEntries& overrides = {});
ExperimentConfig parse_config_text(const std::string& text, const ConfigEntries& overrides = {});

/// Throws ConfigError when an invariant fails.
void validate(const ExperimentConfig& cfg);

/// Every field as key=value lines; parse_config_text inverts it exactly.
std::string serialize(const ExperimentConfig& cfg);
ConfigEntries to_entries(const ExperimentConfig& cfg);

/// Names of all recognized keys, in serialization order.
const std::vector<std::string>& config_keys();

std::string to_string(Scenario s);
std::string to_string(Method m);
std::string to_string(AggregationRule a);
std::string to_string(SelectionKind k);

}  // namespace fedmix
