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

// Round loops for both semi-supervised protocols and the baselines, plus the
// per-client and server-side update steps they are built from.
//
// Every random draw comes from a generator derived from (seed, round, client,
// stream), so a run is a pure function of its config and client updates do
// not depend on the order they are evaluated in.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fedmix/aggregation.hpp"
#include "fedmix/config.hpp"
#include "fedmix/data.hpp"
#include "fedmix/nn.hpp"
#include "fedmix/objectives.hpp"
#include "fedmix/pseudo.hpp"

namespace fedmix {

enum class RngStream : std::uint64_t { init = 1, sampling = 2, client = 3, server = 4, data = 5 };

/// Generator for one (round, client, purpose) triple.
std::mt19937_64 derive_rng(std::uint64_t seed, RngStream stream, std::uint64_t round = 0,
                           std::uint64_t client = 0);

struct ClientState {
  std::size_t id = 0;
  Dataset labeled;    // empty in labels-at-server
  Dataset unlabeled;  // labels stripped
  std::vector<int> unlabeled_truth;  // ground truth, read only by sl_fedavg
  std::optional<StreamingShard> streaming;  // row indices into `unlabeled`

  /// Unlabeled rows available in round t.
  Matrix pool(std::size_t t) const;
};

struct FederatedData {
  std::vector<ClientState> clients;
  Dataset server_labeled;  // labels-at-server only
  Dataset test;
  Augmenter augmenter;
  std::vector<std::size_t> layer_dims;
};

/// Loads or generates data, partitions it over clients, and splits labeled
/// from unlabeled per the scenario. Throws ConfigError for setups that cannot
/// run (e.g. a client without labeled data in labels-at-client).
struct LoadedData {
  Dataset train;
  Dataset test;  // already truncated to test_size
};
LoadedData load_datasets(const ExperimentConfig& cfg);

/// Labels-at-server: the server's labeled draw from the training set.
LabeledSplit server_split(const ExperimentConfig& cfg, const Dataset& train);

/// The client partition prepare_data uses. Indices refer to `client_pool`:
/// the whole training set in labels-at-client, the rows left after the
/// server's labeled draw in labels-at-server.
PartitionPlan plan_partition(const ExperimentConfig& cfg, const Dataset& client_pool);

FederatedData prepare_data(const ExperimentConfig& cfg);

/// Same, from already loaded train and test sets.
FederatedData prepare_data(const ExperimentConfig& cfg, const Dataset& train, Dataset test);

struct ServerState {
  ParamVector omega;
  ParamVector sigma;
  ParamVector psi;
  FrequencyTracker tracker;
  std::size_t round = 0;
};

struct RoundRecord {
  std::size_t round = 0;
  double test_accuracy = 0.0;
  double sup_loss = 0.0;
  double unsup_loss = 0.0;
  double lambda_t = 0.0;
  std::vector<std::size_t> selected;
  std::vector<double> weights;
  std::int64_t wall_ms = 0;
};

struct RunResult {
  std::vector<RoundRecord> records;
  ServerState final_state;
  std::vector<std::size_t> layer_dims;
  bool fedfreq_rescaled = false;  // some round used |selected| != F*K
};

/// Knobs the update steps read, taken from an ExperimentConfig.
struct TrainingSettings {
  SslHyperparams hp;
  double eta = 1e-2;
  std::size_t batch_unlabeled = 100;
  std::size_t batch_labeled = 10;
  std::size_t epochs_unlabeled = 1;
  std::size_t epochs_labeled = 1;
  std::size_t copies = 3;  // A
  SelectionStrategy selection;

  static TrainingSettings from(const ExperimentConfig& cfg);
};

/// Shuffled mini-batches of row indices [0, n); the last may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::mt19937_64& rng);

/// m = max(round(F*K), 1) distinct clients, ascending.
std::vector<std::size_t> sample_clients(std::size_t num_clients, double participation,
                                        std::mt19937_64& rng);

struct ClientLacResult {
  ParamVector psi;
  ParamVector sigma;
  double unsup_loss = 0.0;  // mean over steps, before each step
  double sup_loss = 0.0;
};

/// Local unsupervised and supervised models, both started from omega.
ClientLacResult client_update_lac(const ClientState& client, const MlpModel& omega,
                                  const TrainingSettings& s, const Augmenter& augmenter,
                                  std::size_t t, std::mt19937_64& rng);

struct ClientLasResult {
  ParamVector psi;
  double unsup_loss = 0.0;
};

/// Local unsupervised model started from `psi_start`, anchored to the
/// broadcast supervised model.
ClientLasResult client_update_las(const ClientState& client, const MlpModel& psi_start,
                                  const ParamVector& sigma, const TrainingSettings& s,
                                  const Augmenter& augmenter, std::size_t t, std::mt19937_64& rng);

struct ServerUpdateResult {
  ParamVector sigma;
  double sup_loss = 0.0;
};

/// E_s epochs of SGD on lambda_s * CE over the server's labeled set.
ServerUpdateResult server_update_las(const MlpModel& sigma, const Dataset& labeled,
                                     const TrainingSettings& s, std::mt19937_64& rng);

/// Fraction of argmax predictions equal to the labels.
double evaluate(const MlpModel& model, const Dataset& test);
double evaluate(const ParamVector& params, std::span<const std::size_t> layer_dims, const Dataset& test);

RunResult run_labels_at_client(const ExperimentConfig& cfg, const FederatedData& data);
RunResult run_labels_at_server(const ExperimentConfig& cfg, const FederatedData& data);

enum class BaselineKind { sl_fedavg, ssl_fedavg, naive_decomposition };
RunResult run_baseline(const ExperimentConfig& cfg, const FederatedData& data, BaselineKind kind);

/// Dispatch on cfg.method and cfg.scenario.
RunResult run_experiment(const ExperimentConfig& cfg, const FederatedData& data);
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace fedmix
