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

#include "fedmix/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "fedmix/error.hpp"

namespace fedmix {

std::mt19937_64 derive_rng(std::uint64_t seed, RngStream stream, std::uint64_t round,
                           std::uint64_t client) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed),  hi(seed),  static_cast<std::uint32_t>(stream),
                    lo(round), hi(round), lo(client),
                    hi(client)};
  return std::mt19937_64(seq);
}

Matrix ClientState::pool(std::size_t t) const {
  if (!streaming) return unlabeled.features;
  return unlabeled.features.gather_rows(streaming->for_round(t));
}

TrainingSettings TrainingSettings::from(const ExperimentConfig& cfg) {
  TrainingSettings s;
  s.hp = cfg.ssl_hyperparams();
  s.eta = cfg.eta;
  s.batch_unlabeled = cfg.B_u;
  s.batch_labeled = cfg.B_s;
  s.epochs_unlabeled = cfg.E_u;
  s.epochs_labeled = cfg.E_s;
  s.copies = cfg.A;
  s.selection = {cfg.selection, cfg.n};
  return s;
}

// ---------------------------------------------------------------------------
// Data preparation

namespace {

std::uint64_t data_seed(const ExperimentConfig& cfg, std::uint64_t tag, std::uint64_t client = 0) {
  return derive_rng(cfg.seed, RngStream::data, tag, client)();
}

enum DataTag : std::uint64_t { kPartition = 1, kServerSplit = 2, kClientSplit = 3, kStreaming = 4 };

std::vector<std::filesystem::path> to_paths(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

Dataset truncate(Dataset ds, std::size_t limit) {
  if (limit == 0 || limit >= ds.size()) return ds;
  std::vector<std::size_t> idx(limit);
  std::iota(idx.begin(), idx.end(), 0);
  return ds.subset(idx);
}

Augmenter make_augmenter(const ExperimentConfig& cfg, const Dataset& train) {
  AugmentParams params;
  params.noise_sigma = cfg.aug_noise;
  switch (cfg.augment) {
    case AugmentMode::automatic:
      return Augmenter::for_dataset(train, params);
    case AugmentMode::image:
      if (!train.image) throw ConfigError("augment", "image augmentation needs image data");
      return Augmenter(AugmentPolicy::image, train.image, params);
    case AugmentMode::noise:
      return Augmenter(AugmentPolicy::noise, std::nullopt, params);
  }
  throw ConfigError("augment", "unknown mode");
}

}  // namespace

PartitionPlan plan_partition(const ExperimentConfig& cfg, const Dataset& ds) {
  if (ds.size() < cfg.K) {
    throw ConfigError("K", std::to_string(ds.size()) + " client-side samples cannot cover " +
                               std::to_string(cfg.K) + " clients");
  }
  const std::uint64_t seed = data_seed(cfg, kPartition);
  return cfg.mu ? partition_dirichlet(ds, cfg.K, *cfg.mu, seed) : partition_iid(ds.size(), cfg.K, seed);
}

namespace {

void attach_streaming(const ExperimentConfig& cfg, ClientState& client) {
  if (!cfg.streaming) return;
  if (client.unlabeled.size() < kStreamingParts) {
    throw ConfigError("streaming", "client " + std::to_string(client.id) + " has only " +
                                       std::to_string(client.unlabeled.size()) +
                                       " unlabeled samples");
  }
  std::vector<std::size_t> rows(client.unlabeled.size());
  std::iota(rows.begin(), rows.end(), 0);
  client.streaming = split_streaming(rows, data_seed(cfg, kStreaming, client.id));
}

}  // namespace

LoadedData load_datasets(const ExperimentConfig& cfg) {
  validate(cfg);
  Dataset train;
  Dataset test;
  switch (cfg.dataset) {
    case DatasetKind::synthetic: {
      SyntheticSpec spec{cfg.syn_classes, cfg.syn_dims, cfg.syn_train + cfg.syn_test, cfg.syn_spread,
                         data_seed(cfg, 0)};
      Dataset all = gen_synthetic(spec);
      std::vector<std::size_t> head(cfg.syn_train);
      std::vector<std::size_t> tail(cfg.syn_test);
      std::iota(head.begin(), head.end(), 0);
      std::iota(tail.begin(), tail.end(), cfg.syn_train);
      train = all.subset(head);
      test = all.subset(tail);
      break;
    }
    case DatasetKind::idx:
      train = load_idx(cfg.train_images, cfg.train_labels);
      test = load_idx(cfg.test_images, cfg.test_labels);
      break;
    case DatasetKind::cifar_bin:
      train = load_cifar_bin(to_paths(cfg.cifar_train));
      test = load_cifar_bin(to_paths(cfg.cifar_test));
      break;
  }
  return {std::move(train), truncate(std::move(test), cfg.test_size)};
}

FederatedData prepare_data(const ExperimentConfig& cfg) {
  LoadedData loaded = load_datasets(cfg);
  return prepare_data(cfg, loaded.train, std::move(loaded.test));
}

LabeledSplit server_split(const ExperimentConfig& cfg, const Dataset& train) {
  if (cfg.n_labeled == 0 || cfg.n_labeled >= train.size()) {
    throw ConfigError("n_labeled", "server labeled count must be in [1, train size)");
  }
  return split_labeled_unlabeled(train, cfg.n_labeled, data_seed(cfg, kServerSplit));
}

FederatedData prepare_data(const ExperimentConfig& cfg, const Dataset& train, Dataset test) {
  validate(cfg);
  if (!train.labels) throw ConfigError("dataset", "training set has no labels");
  if (!test.labels || test.size() == 0) throw ConfigError("dataset", "test set is empty or unlabeled");
  if (test.dims() != train.dims()) throw ConfigError("dataset", "train and test feature widths differ");

  FederatedData data{{}, {}, std::move(test), make_augmenter(cfg, train), {}};
  const std::size_t classes = std::max(train.num_classes, data.test.num_classes);
  data.layer_dims.push_back(train.dims());
  data.layer_dims.insert(data.layer_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  data.layer_dims.push_back(classes);

  Dataset pool = train;
  pool.num_classes = classes;
  if (cfg.scenario == Scenario::labels_at_server) {
    LabeledSplit split = server_split(cfg, pool);
    data.server_labeled = std::move(split.labeled);
    pool = pool.subset(split.unlabeled_indices);
  }

  const PartitionPlan plan = plan_partition(cfg, pool);
  data.clients.resize(cfg.K);
  for (std::size_t k = 0; k < cfg.K; ++k) {
    ClientState& client = data.clients[k];
    client.id = k;
    const Dataset shard = pool.subset(plan.assignments[k]);
    if (cfg.scenario == Scenario::labels_at_client) {
      if (cfg.n_labeled == 0) throw ConfigError("n_labeled", "clients need labeled samples");
      LabeledSplit split = split_labeled_unlabeled(shard, std::min(cfg.n_labeled, shard.size()),
                                                   data_seed(cfg, kClientSplit, k));
      client.labeled = std::move(split.labeled);
      client.unlabeled = std::move(split.unlabeled);
      for (std::size_t i : split.unlabeled_indices) client.unlabeled_truth.push_back((*shard.labels)[i]);
    } else {
      client.unlabeled = shard.without_labels();
      client.unlabeled_truth = *shard.labels;
    }
    attach_streaming(cfg, client);
  }
  return data;
}

// ---------------------------------------------------------------------------
// Building blocks

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::mt19937_64& rng) {
  if (batch_size == 0) throw InvalidInput("make_batches: batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t pos = 0; pos < n; pos += batch_size) {
    const std::size_t end = std::min(n, pos + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<std::size_t> sample_clients(std::size_t num_clients, double participation,
                                        std::mt19937_64& rng) {
  if (!(participation > 0.0 && participation <= 1.0)) {
    throw InvalidInput("sample_clients: participation must be in (0, 1]");
  }
  const auto rounded = static_cast<std::size_t>(std::floor(participation * static_cast<double>(num_clients) + 0.5));
  const std::size_t m = std::min(num_clients, std::max<std::size_t>(rounded, 1));
  std::vector<std::size_t> ids(num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(m);
  std::ranges::sort(ids);
  return ids;
}

namespace {

std::vector<int> gather_labels(const std::vector<int>& labels, std::span<const std::size_t> idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

struct Mean {
  double total = 0.0;
  std::size_t count = 0;
  void add(double v) {
    total += v;
    ++count;
  }
  double value() const { return count == 0 ? 0.0 : total / static_cast<double>(count); }
};

// Selected pool rows with their pseudo-labels, computed with `labeler`.
struct PseudoLabeled {
  Matrix inputs;
  Matrix targets;
};

PseudoLabeled pseudo_label_pool(const MlpModel& labeler, const Matrix& pool, const TrainingSettings& s,
                                const Augmenter& augmenter, std::mt19937_64& rng) {
  SelectionStrategy strategy = s.selection;
  strategy.n = std::min(strategy.n, pool.rows());
  const auto chosen = select(labeler, pool, strategy, rng);
  PseudoLabeled out;
  out.inputs = pool.gather_rows(chosen);
  out.targets = pseudo_labels(labeler, out.inputs, s.copies, augmenter, rng);
  return out;
}

}  // namespace

ClientLacResult client_update_lac(const ClientState& client, const MlpModel& omega,
                                  const TrainingSettings& s, const Augmenter& augmenter,
                                  std::size_t t, std::mt19937_64& rng) {
  if (client.labeled.size() == 0 || !client.labeled.labels) {
    throw ConfigError("n_labeled", "client " + std::to_string(client.id) + " has no labeled samples");
  }
  MlpModel psi = omega;
  MlpModel sigma = omega;
  const PseudoLabeled unl = pseudo_label_pool(psi, client.pool(t), s, augmenter, rng);
  const Matrix& x = client.labeled.features;
  const auto& y = *client.labeled.labels;

  Mean unsup;
  Mean sup;
  const std::size_t epochs = std::max(s.epochs_unlabeled, s.epochs_labeled);
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto ub = e < s.epochs_unlabeled ? make_batches(unl.inputs.rows(), s.batch_unlabeled, rng)
                                           : std::vector<std::vector<std::size_t>>{};
    const auto sb = e < s.epochs_labeled ? make_batches(x.rows(), s.batch_labeled, rng)
                                         : std::vector<std::vector<std::size_t>>{};
    for (std::size_t i = 0; i < std::max(ub.size(), sb.size()); ++i) {
      std::optional<ParamVector> g_psi;
      std::optional<ParamVector> g_sigma;
      if (i < ub.size()) {
        const Matrix inputs = unl.inputs.gather_rows(ub[i]);
        const Matrix a1 = augmenter.first_rows(inputs, rng);
        const Matrix a2 = augmenter.second_rows(inputs, rng);
        auto r = unsup_loss(psi, sigma.params(), inputs, unl.targets.gather_rows(ub[i]), a1, a2, s.hp, t);
        unsup.add(r.value);
        g_psi = std::move(r.grad);
      }
      if (i < sb.size()) {
        auto r = sup_loss(sigma, x.gather_rows(sb[i]), gather_labels(y, sb[i]), s.hp);
        sup.add(r.value);
        g_sigma = std::move(r.grad);
      }
      if (g_psi) psi = sgd_step(psi, *g_psi, s.eta);
      if (g_sigma) sigma = sgd_step(sigma, *g_sigma, s.eta);
    }
  }
  return {psi.params(), sigma.params(), unsup.value(), sup.value()};
}

ClientLasResult client_update_las(const ClientState& client, const MlpModel& psi_start,
                                  const ParamVector& sigma, const TrainingSettings& s,
                                  const Augmenter& augmenter, std::size_t t, std::mt19937_64& rng) {
  MlpModel psi = psi_start;
  const PseudoLabeled unl = pseudo_label_pool(psi, client.pool(t), s, augmenter, rng);
  Mean unsup;
  for (std::size_t e = 0; e < s.epochs_unlabeled; ++e) {
    for (const auto& batch : make_batches(unl.inputs.rows(), s.batch_unlabeled, rng)) {
      const Matrix inputs = unl.inputs.gather_rows(batch);
      const Matrix a1 = augmenter.first_rows(inputs, rng);
      const Matrix a2 = augmenter.second_rows(inputs, rng);
      auto r = unsup_loss(psi, sigma, inputs, unl.targets.gather_rows(batch), a1, a2, s.hp, t);
      unsup.add(r.value);
      psi = sgd_step(psi, r.grad, s.eta);
    }
  }
  return {psi.params(), unsup.value()};
}

ServerUpdateResult server_update_las(const MlpModel& sigma, const Dataset& labeled,
                                     const TrainingSettings& s, std::mt19937_64& rng) {
  if (labeled.size() == 0 || !labeled.labels) {
    throw ConfigError("n_labeled", "server has no labeled samples");
  }
  MlpModel model = sigma;
  Mean sup;
  for (std::size_t e = 0; e < s.epochs_labeled; ++e) {
    for (const auto& batch : make_batches(labeled.size(), s.batch_labeled, rng)) {
      auto r = sup_loss(model, labeled.features.gather_rows(batch), gather_labels(*labeled.labels, batch), s.hp);
      sup.add(r.value);
      model = sgd_step(model, r.grad, s.eta);
    }
  }
  return {model.params(), sup.value()};
}

double evaluate(const MlpModel& model, const Dataset& test) {
  if (test.size() == 0) throw InvalidInput("evaluate: empty test set");
  if (!test.labels) throw InvalidInput("evaluate: test set has no labels");
  constexpr std::size_t kChunk = 512;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    idx.resize(std::min(kChunk, test.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Matrix probs = forward(model, test.features.gather_rows(idx));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (static_cast<int>(argmax(probs.row(i))) == (*test.labels)[idx[i]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double evaluate(const ParamVector& params, std::span<const std::size_t> layer_dims, const Dataset& test) {
  return evaluate(MlpModel({layer_dims.begin(), layer_dims.end()}, params), test);
}

// ---------------------------------------------------------------------------
// Round loops

namespace {

struct Aggregated {
  ParamVector params;
  std::vector<double> weights;
  bool rescaled = false;
};

Aggregated aggregate(std::span<const ParamVector> models, std::span<const std::size_t> selected,
                     const FrequencyTracker& tracker, AggregationRule rule, const ExperimentConfig& cfg) {
  Aggregated out;
  if (rule == AggregationRule::fedfreq && selected.size() > 1) {
    try {
      auto w = fedfreq_weights(tracker, selected, cfg.F, cfg.K);
      out.weights = std::move(w.weights);
      out.rescaled = w.rescaled;
    } catch (const DegenerateSelection&) {
      out.weights.clear();
    }
  }
  if (out.weights.empty()) {
    // FedAvg, or FedFreq with one client (weight 1).
    out.weights.assign(models.size(), 1.0 / static_cast<double>(models.size()));
  }
  out.params = weighted_sum(models, out.weights);
  return out;
}

class RoundClock {
 public:
  explicit RoundClock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  std::int64_t elapsed_ms() const {
    if (!enabled_) return 0;
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

void check_data(const ExperimentConfig& cfg, const FederatedData& data) {
  validate(cfg);
  if (data.clients.size() != cfg.K) {
    throw ConfigError("K", "data holds " + std::to_string(data.clients.size()) + " clients");
  }
}

ServerState initial_state(const ExperimentConfig& cfg, const FederatedData& data) {
  const MlpModel init = MlpModel::initialize(data.layer_dims, derive_rng(cfg.seed, RngStream::init)());
  return {init.params(), init.params(), init.params(), FrequencyTracker(cfg.K), 0};
}

std::vector<std::size_t> begin_round(const ExperimentConfig& cfg, ServerState& state, std::size_t t) {
  auto rng = derive_rng(cfg.seed, RngStream::sampling, t);
  auto selected = sample_clients(cfg.K, cfg.F, rng);
  state.tracker = record_selection(std::move(state.tracker), selected);
  return selected;
}

}  // namespace

RunResult run_labels_at_client(const ExperimentConfig& cfg, const FederatedData& data) {
  check_data(cfg, data);
  const TrainingSettings s = TrainingSettings::from(cfg);
  const MixWeights w = cfg.mix_weights();
  RunResult result;
  result.layer_dims = data.layer_dims;
  ServerState state = initial_state(cfg, data);
  const MlpModel arch(data.layer_dims, state.omega);

  for (std::size_t t = 0; t < cfg.T; ++t) {
    RoundClock clock(cfg.record_timing);
    const auto selected = begin_round(cfg, state, t);
    const MlpModel omega = arch.with_params(state.omega);
    std::vector<ParamVector> psis;
    std::vector<ParamVector> sigmas;
    Mean unsup;
    Mean sup;
    for (std::size_t k : selected) {
      auto rng = derive_rng(cfg.seed, RngStream::client, t, k);
      auto r = client_update_lac(data.clients[k], omega, s, data.augmenter, t, rng);
      psis.push_back(std::move(r.psi));
      sigmas.push_back(std::move(r.sigma));
      unsup.add(r.unsup_loss);
      sup.add(r.sup_loss);
    }
    Aggregated psi = aggregate(psis, selected, state.tracker, cfg.aggregation, cfg);
    Aggregated sigma = aggregate(sigmas, selected, state.tracker, cfg.aggregation, cfg);
    result.fedfreq_rescaled |= psi.rescaled;
    state.omega = mix(psi.params, sigma.params, state.omega, w);
    state.psi = std::move(psi.params);
    state.sigma = std::move(sigma.params);
    state.round = t + 1;

    result.records.push_back({t, evaluate(arch.with_params(state.omega), data.test), sup.value(),
                              unsup.value(), lambda_t(s.hp, t), selected, psi.weights,
                              clock.elapsed_ms()});
  }
  result.final_state = std::move(state);
  return result;
}

RunResult run_labels_at_server(const ExperimentConfig& cfg, const FederatedData& data) {
  check_data(cfg, data);
  const TrainingSettings s = TrainingSettings::from(cfg);
  const MixWeights w = cfg.mix_weights();
  RunResult result;
  result.layer_dims = data.layer_dims;
  ServerState state = initial_state(cfg, data);
  const MlpModel arch(data.layer_dims, state.omega);

  for (std::size_t t = 0; t < cfg.T; ++t) {
    RoundClock clock(cfg.record_timing);
    const MlpModel omega = arch.with_params(state.omega);
    auto server_rng = derive_rng(cfg.seed, RngStream::server, t);
    ServerUpdateResult server = server_update_las(omega, data.server_labeled, s, server_rng);

    const auto selected = begin_round(cfg, state, t);
    std::vector<ParamVector> psis;
    Mean unsup;
    for (std::size_t k : selected) {
      auto rng = derive_rng(cfg.seed, RngStream::client, t, k);
      auto r = client_update_las(data.clients[k], omega, server.sigma, s, data.augmenter, t, rng);
      psis.push_back(std::move(r.psi));
      unsup.add(r.unsup_loss);
    }
    Aggregated psi = aggregate(psis, selected, state.tracker, cfg.aggregation, cfg);
    result.fedfreq_rescaled |= psi.rescaled;
    state.omega = mix(psi.params, server.sigma, state.omega, w);
    state.psi = std::move(psi.params);
    state.sigma = std::move(server.sigma);
    state.round = t + 1;

    result.records.push_back({t, evaluate(arch.with_params(state.omega), data.test), server.sup_loss,
                              unsup.value(), lambda_t(s.hp, t), selected, psi.weights,
                              clock.elapsed_ms()});
  }
  result.final_state = std::move(state);
  return result;
}

// ---------------------------------------------------------------------------
// Baselines

namespace {

// Single model trained with lambda_s * CE on every sample of the client,
// ground truth included.
ParamVector supervised_client_update(const ClientState& client, const MlpModel& start,
                                     const TrainingSettings& s, std::mt19937_64& rng, Mean& sup) {
  Matrix x = client.unlabeled.features;
  std::vector<int> y = client.unlabeled_truth;
  if (client.labeled.size() > 0) {
    Matrix joined(client.labeled.size() + x.rows(), x.cols());
    std::ranges::copy(client.labeled.features.data(), joined.data().begin());
    std::ranges::copy(x.data(), joined.data().begin() + static_cast<std::ptrdiff_t>(client.labeled.features.data().size()));
    x = std::move(joined);
    y.insert(y.begin(), client.labeled.labels->begin(), client.labeled.labels->end());
  }
  MlpModel model = start;
  for (std::size_t e = 0; e < s.epochs_labeled; ++e) {
    for (const auto& batch : make_batches(x.rows(), s.batch_labeled, rng)) {
      auto r = sup_loss(model, x.gather_rows(batch), gather_labels(y, batch), s.hp);
      sup.add(r.value);
      model = sgd_step(model, r.grad, s.eta);
    }
  }
  return model.params();
}

// Labels-at-client single-model baseline: CE(labeled) + KL(unlabeled, aug).
// Steps pair batch i of each side, cycling the shorter list.
ParamVector ssl_client_update_lac(const ClientState& client, const MlpModel& start,
                                  const TrainingSettings& s, const Augmenter& augmenter,
                                  std::size_t t, std::mt19937_64& rng, Mean& sup, Mean& unsup) {
  if (client.labeled.size() == 0) {
    throw ConfigError("n_labeled", "client " + std::to_string(client.id) + " has no labeled samples");
  }
  const Matrix pool = client.pool(t);
  const Matrix& x = client.labeled.features;
  const auto& y = *client.labeled.labels;
  MlpModel model = start;
  for (std::size_t e = 0; e < s.epochs_unlabeled; ++e) {
    const auto ub = make_batches(pool.rows(), s.batch_unlabeled, rng);
    const auto sb = make_batches(x.rows(), s.batch_labeled, rng);
    const std::size_t steps = std::max(ub.size(), sb.size());
    for (std::size_t i = 0; i < steps; ++i) {
      const auto& lb = sb[i % sb.size()];
      Matrix u;
      Matrix aug;
      if (!ub.empty()) {
        u = pool.gather_rows(ub[i % ub.size()]);
        aug = Matrix(u.rows(), u.cols());
        for (std::size_t r = 0; r < u.rows(); ++r) std::ranges::copy(augmenter.random(u.row(r), rng), aug.row(r).begin());
      } else {
        u = Matrix(0, x.cols());
        aug = u;
      }
      auto r = baseline_client_loss_lac(model, x.gather_rows(lb), gather_labels(y, lb), u, aug);
      sup.add(r.pseudo_term);
      unsup.add(r.consistency_term);
      model = sgd_step(model, r.grad, s.eta);
    }
  }
  return model.params();
}

// Labels-at-server single-model baseline: argmax pseudo-labels on the whole
// pool (single copy), then CE(pseudo) + KL(unlabeled, aug).
ParamVector ssl_client_update_las(const ClientState& client, const MlpModel& start,
                                  const TrainingSettings& s, const Augmenter& augmenter,
                                  std::size_t t, std::mt19937_64& rng, Mean& unsup) {
  const Matrix pool = client.pool(t);
  const Matrix pseudo = pseudo_labels(start, pool, 1, augmenter, rng);
  MlpModel model = start;
  for (std::size_t e = 0; e < s.epochs_unlabeled; ++e) {
    for (const auto& batch : make_batches(pool.rows(), s.batch_unlabeled, rng)) {
      const Matrix u = pool.gather_rows(batch);
      Matrix aug(u.rows(), u.cols());
      for (std::size_t r = 0; r < u.rows(); ++r) std::ranges::copy(augmenter.random(u.row(r), rng), aug.row(r).begin());
      auto r = baseline_client_loss_las(model, u, pseudo.gather_rows(batch), aug);
      unsup.add(r.value);
      model = sgd_step(model, r.grad, s.eta);
    }
  }
  return model.params();
}

// Server-side CE steps for the single-model baseline.
ParamVector ssl_server_update(const MlpModel& start, const Dataset& labeled, const TrainingSettings& s,
                              std::mt19937_64& rng, Mean& sup) {
  MlpModel model = start;
  for (std::size_t e = 0; e < s.epochs_labeled; ++e) {
    for (const auto& batch : make_batches(labeled.size(), s.batch_labeled, rng)) {
      auto r = server_loss(model, labeled.features.gather_rows(batch), gather_labels(*labeled.labels, batch));
      sup.add(r.value);
      model = sgd_step(model, r.grad, s.eta);
    }
  }
  return model.params();
}

ParamVector add(const ParamVector& a, const ParamVector& b) { return linear_combine({{1.0, &a}, {1.0, &b}}); }

// Additive decomposition omega = psi + sigma. Both parts learn through the
// composed model; the pseudo-label weight is fixed at 1 and the proximal
// term pulls psi toward sigma (anchor 2*sigma on the composed parameters).
struct Decomposed {
  ParamVector psi;
  ParamVector sigma;
};

ParamVector unsup_step_decomposed(const MlpModel& arch, const ParamVector& psi, const ParamVector& sigma,
                                  const Matrix& inputs, const Matrix& targets, const Matrix& a1,
                                  const Matrix& a2, const TrainingSettings& s, Mean& unsup) {
  const ParamVector anchor = linear_combine({{2.0, &sigma}});
  auto r = unsup_loss_weighted(arch.with_params(add(psi, sigma)), anchor, inputs, targets, a1, a2, s.hp, 1.0);
  unsup.add(r.value);
  return sgd_step(arch.with_params(psi), r.grad, s.eta).params();
}

ParamVector sup_step_decomposed(const MlpModel& arch, const ParamVector& psi, const ParamVector& sigma,
                                const Matrix& x, std::span<const int> y, const TrainingSettings& s, Mean& sup) {
  auto r = sup_loss(arch.with_params(add(psi, sigma)), x, y, s.hp);
  sup.add(r.value);
  return sgd_step(arch.with_params(sigma), r.grad, s.eta).params();
}

Decomposed decomposed_client_update(const ClientState& client, const MlpModel& arch, Decomposed start,
                                    bool train_sigma, const TrainingSettings& s, const Augmenter& augmenter,
                                    std::size_t t, std::mt19937_64& rng, Mean& sup, Mean& unsup) {
  if (train_sigma && client.labeled.size() == 0) {
    throw ConfigError("n_labeled", "client " + std::to_string(client.id) + " has no labeled samples");
  }
  const PseudoLabeled unl =
      pseudo_label_pool(arch.with_params(add(start.psi, start.sigma)), client.pool(t), s, augmenter, rng);
  Decomposed cur = std::move(start);
  const std::size_t epochs = train_sigma ? std::max(s.epochs_unlabeled, s.epochs_labeled) : s.epochs_unlabeled;
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto ub = e < s.epochs_unlabeled ? make_batches(unl.inputs.rows(), s.batch_unlabeled, rng)
                                           : std::vector<std::vector<std::size_t>>{};
    const auto sb = train_sigma && e < s.epochs_labeled
                        ? make_batches(client.labeled.size(), s.batch_labeled, rng)
                        : std::vector<std::vector<std::size_t>>{};
    for (std::size_t i = 0; i < std::max(ub.size(), sb.size()); ++i) {
      std::optional<ParamVector> next_psi;
      std::optional<ParamVector> next_sigma;
      if (i < ub.size()) {
        const Matrix inputs = unl.inputs.gather_rows(ub[i]);
        const Matrix a1 = augmenter.first_rows(inputs, rng);
        const Matrix a2 = augmenter.second_rows(inputs, rng);
        next_psi = unsup_step_decomposed(arch, cur.psi, cur.sigma, inputs, unl.targets.gather_rows(ub[i]), a1,
                                         a2, s, unsup);
      }
      if (i < sb.size()) {
        next_sigma = sup_step_decomposed(arch, cur.psi, cur.sigma, client.labeled.features.gather_rows(sb[i]),
                                         gather_labels(*client.labeled.labels, sb[i]), s, sup);
      }
      if (next_psi) cur.psi = std::move(*next_psi);
      if (next_sigma) cur.sigma = std::move(*next_sigma);
    }
  }
  return cur;
}

}  // namespace

RunResult run_baseline(const ExperimentConfig& cfg, const FederatedData& data, BaselineKind kind) {
  check_data(cfg, data);
  const TrainingSettings s = TrainingSettings::from(cfg);
  const bool at_server = cfg.scenario == Scenario::labels_at_server;
  RunResult result;
  result.layer_dims = data.layer_dims;
  ServerState state = initial_state(cfg, data);
  const MlpModel arch(data.layer_dims, state.omega);
  if (kind == BaselineKind::naive_decomposition) {
    state.sigma = state.omega;
    state.psi = ParamVector(state.omega.shapes());
  }

  for (std::size_t t = 0; t < cfg.T; ++t) {
    RoundClock clock(cfg.record_timing);
    Mean sup;
    Mean unsup;
    double lambda = 0.0;
    std::vector<std::size_t> selected;
    std::vector<double> weights;

    switch (kind) {
      case BaselineKind::sl_fedavg: {
        selected = begin_round(cfg, state, t);
        const MlpModel omega = arch.with_params(state.omega);
        std::vector<ParamVector> models;
        for (std::size_t k : selected) {
          auto rng = derive_rng(cfg.seed, RngStream::client, t, k);
          models.push_back(supervised_client_update(data.clients[k], omega, s, rng, sup));
        }
        Aggregated agg = aggregate(models, selected, state.tracker, AggregationRule::fedavg, cfg);
        state.omega = std::move(agg.params);
        weights = std::move(agg.weights);
        break;
      }
      case BaselineKind::ssl_fedavg: {
        MlpModel start = arch.with_params(state.omega);
        if (at_server) {
          auto server_rng = derive_rng(cfg.seed, RngStream::server, t);
          start = arch.with_params(ssl_server_update(start, data.server_labeled, s, server_rng, sup));
        }
        selected = begin_round(cfg, state, t);
        std::vector<ParamVector> models;
        for (std::size_t k : selected) {
          auto rng = derive_rng(cfg.seed, RngStream::client, t, k);
          models.push_back(at_server
                               ? ssl_client_update_las(data.clients[k], start, s, data.augmenter, t, rng, unsup)
                               : ssl_client_update_lac(data.clients[k], start, s, data.augmenter, t, rng, sup, unsup));
        }
        Aggregated agg = aggregate(models, selected, state.tracker, AggregationRule::fedavg, cfg);
        state.omega = std::move(agg.params);
        weights = std::move(agg.weights);
        break;
      }
      case BaselineKind::naive_decomposition: {
        lambda = 1.0;
        Decomposed start{state.psi, state.sigma};
        if (at_server) {
          auto server_rng = derive_rng(cfg.seed, RngStream::server, t);
          for (std::size_t e = 0; e < s.epochs_labeled; ++e) {
            for (const auto& batch : make_batches(data.server_labeled.size(), s.batch_labeled, server_rng)) {
              start.sigma = sup_step_decomposed(arch, start.psi, start.sigma,
                                                data.server_labeled.features.gather_rows(batch),
                                                gather_labels(*data.server_labeled.labels, batch), s, sup);
            }
          }
        }
        selected = begin_round(cfg, state, t);
        std::vector<ParamVector> psis;
        std::vector<ParamVector> sigmas;
        for (std::size_t k : selected) {
          auto rng = derive_rng(cfg.seed, RngStream::client, t, k);
          Decomposed r = decomposed_client_update(data.clients[k], arch, start, !at_server, s, data.augmenter,
                                                  t, rng, sup, unsup);
          psis.push_back(std::move(r.psi));
          sigmas.push_back(std::move(r.sigma));
        }
        Aggregated psi = aggregate(psis, selected, state.tracker, AggregationRule::fedavg, cfg);
        state.psi = std::move(psi.params);
        state.sigma = at_server ? std::move(start.sigma)
                                : aggregate(sigmas, selected, state.tracker, AggregationRule::fedavg, cfg).params;
        state.omega = add(state.psi, state.sigma);
        weights = std::move(psi.weights);
        break;
      }
    }
    state.round = t + 1;
    result.records.push_back({t, evaluate(arch.with_params(state.omega), data.test), sup.value(), unsup.value(),
                              lambda, selected, weights, clock.elapsed_ms()});
  }
  result.final_state = std::move(state);
  return result;
}

RunResult run_experiment(const ExperimentConfig& cfg, const FederatedData& data) {
  switch (cfg.method) {
    case Method::fedmix:
      return cfg.scenario == Scenario::labels_at_client ? run_labels_at_client(cfg, data)
                                                        : run_labels_at_server(cfg, data);
    case Method::sl_fedavg:
      return run_baseline(cfg, data, BaselineKind::sl_fedavg);
    case Method::ssl_fedavg:
      return run_baseline(cfg, data, BaselineKind::ssl_fedavg);
    case Method::naive_decomposition:
      return run_baseline(cfg, data, BaselineKind::naive_decomposition);
  }
  throw ConfigError("method", "unknown method");
}

RunResult run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, prepare_data(cfg)); }

}  // namespace fedmix
