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

// Acceptance checks, one line per criterion. Exit status is nonzero when any
// criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "fedmix/cli.hpp"
#include "fedmix/orchestrator.hpp"
#include "fedmix/simd/kernels.hpp"
#include "support.hpp"

using namespace fedmix;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > budget_s) {
    v.pass = false;
    v.detail += " (over the " + std::to_string(static_cast<int>(budget_s)) + " s budget)";
  }
  std::printf("[%s] %2d %-28s %s [%.2f s]\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs);
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

SslHyperparams table_hp() {
  SslHyperparams hp;
  hp.participation = 0.05;
  hp.num_clients = 100;
  hp.batch_size = 100;
  hp.local_epochs = 1;
  return hp;
}

// ---------------------------------------------------------------------------

Verdict gradients() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto dims = testing::random_dims(rng);
    const MlpModel model = testing::random_model(dims, rng);
    const std::size_t d = dims.front(), c = dims.back();
    const ParamVector sigma = testing::random_params_like(model.params(), rng);
    const Matrix x = testing::random_matrix(4, d, rng);
    const auto y = testing::random_labels(4, c, rng);
    const Matrix u = testing::random_matrix(5, d, rng);
    const Matrix a1 = testing::random_matrix(5, d, rng);
    const Matrix a2 = testing::random_matrix(5, d, rng);
    const Matrix pseudo = testing::random_one_hot(5, c, rng);
    SslHyperparams hp = table_hp();
    hp.consistency = i % 2 == 0 ? ConsistencyKind::squared : ConsistencyKind::kl;
    const std::size_t t = 1 + rng() % 100;

    const std::vector<std::function<ObjectiveValue(const MlpModel&)>> losses{
        [&](const MlpModel& m) { return unsup_loss(m, sigma, u, pseudo, a1, a2, hp, t); },
        [&](const MlpModel& m) { return sup_loss(m, x, y, hp); },
        [&](const MlpModel& m) { return baseline_client_loss_lac(m, x, y, u, a1); },
        [&](const MlpModel& m) { return baseline_client_loss_las(m, u, pseudo, a1); },
        [&](const MlpModel& m) { return server_loss(m, x, y); },
    };
    for (const auto& loss : losses) {
      const auto value = [&](const MlpModel& m) { return loss(m).value; };
      worst = std::max(worst, testing::fd_relative_error(model, value, loss(model).grad));
    }
  }
  return {worst < 1e-4, "worst relative error " + fmt("%.3g", worst) + " over 50 models x 5 losses"};
}

Verdict schedule() {
  const SslHyperparams hp = table_hp();
  const bool zero = lambda_t(hp, 0) == 0.0;
  // F*K*t = 2*B*E at t = 40.
  const double half = lambda_t(hp, 40);
  bool increasing = true;
  for (std::size_t t = 1; t <= 600; ++t) increasing = increasing && lambda_t(hp, t) > lambda_t(hp, t - 1);
  const bool ok = zero && std::abs(half - 0.5) <= 1e-12 && increasing;
  return {ok, "lambda_0=" + fmt("%g", lambda_t(hp, 0)) + " lambda_40=" + fmt("%.17g", half) +
                  (increasing ? " strictly increasing" : " NOT increasing")};
}

Verdict fedfreq_algebra() {
  std::mt19937_64 rng(303);
  double worst_sum = 0.0, worst_avg = 0.0;
  bool nonneg = true;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + rng() % 199;
    const std::size_t m = 2 + rng() % (k - 1);
    FrequencyTracker tracker(k);
    for (auto& q : tracker.counts) q = rng() % 100;
    std::vector<std::size_t> ids(k);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(m);
    std::ranges::sort(ids);
    tracker = record_selection(tracker, ids);
    const double f = static_cast<double>(m) / static_cast<double>(k);
    const auto w = fedfreq_weights(tracker, ids, f, k);
    nonneg = nonneg && std::ranges::all_of(w.weights, [](double v) { return v >= 0.0; });
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(w.weights.begin(), w.weights.end(), 0.0) - 1.0));

    // Uniform counts against FedAvg on random models.
    FrequencyTracker flat(k);
    std::fill(flat.counts.begin(), flat.counts.end(), 1 + rng() % 9);
    std::vector<ParamVector> models;
    const ParamVector like({LayerShape{2, 3}});
    for (std::size_t j = 0; j < m; ++j) models.push_back(testing::random_params_like(like, rng, 5.0));
    const ParamVector a = fedfreq(models, flat, ids, f, k);
    const ParamVector b = fedavg(models);
    for (std::size_t j = 0; j < a.size(); ++j) worst_avg = std::max(worst_avg, std::abs(a[j] - b[j]));
  }
  const bool ok = nonneg && worst_sum <= 1e-9 && worst_avg <= 1e-12;
  return {ok, std::string(nonneg ? "nonnegative" : "NEGATIVE weight") + ", max |sum-1| " + fmt("%.3g", worst_sum) +
                  ", max |fedfreq-fedavg| " + fmt("%.3g", worst_avg)};
}

Verdict mixing() {
  std::mt19937_64 rng(404);
  const MixWeights w{0.5, 0.3, 0.2};
  const ParamVector like({LayerShape{3, 4}, LayerShape{1, 4}});
  double worst_fixed = 0.0, worst_excess = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ParamVector p = testing::random_params_like(like, rng, 10.0);
    const ParamVector same = mix(p, p, p, w);
    for (std::size_t j = 0; j < p.size(); ++j) worst_fixed = std::max(worst_fixed, std::abs(same[j] - p[j]));
    const ParamVector s = testing::random_params_like(like, rng, 10.0);
    const ParamVector o = testing::random_params_like(like, rng, 10.0);
    const ParamVector r = mix(p, s, o, w);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double lo = std::min({p[j], s[j], o[j]}), hi = std::max({p[j], s[j], o[j]});
      worst_excess = std::max({worst_excess, lo - r[j], r[j] - hi});
    }
  }
  const bool ok = worst_fixed <= 1e-12 && worst_excess <= 0.0;
  return {ok, "max fixed-point error " + fmt("%.3g", worst_fixed) + ", max envelope excess " +
                  fmt("%.3g", worst_excess)};
}

Verdict dirichlet() {
  const Dataset ds = gen_synthetic({10, 8, 10000, 0.1, 505});
  const auto histogram = [&](const std::vector<std::size_t>& shard) {
    std::vector<double> h(10, 0.0);
    for (auto i : shard) h[static_cast<std::size_t>((*ds.labels)[i])] += 1.0;
    for (double& v : h) v /= static_cast<double>(shard.size());
    return h;
  };
  const std::vector<double> global = histogram([&] {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }());

  const PartitionPlan flat = partition_dirichlet(ds, 10, 1e6, 42);
  validate_plan(flat, ds.size());
  double worst_tv = 0.0;
  for (const auto& shard : flat.assignments) {
    const auto h = histogram(shard);
    double tv = 0.0;
    for (std::size_t c = 0; c < 10; ++c) tv += 0.5 * std::abs(h[c] - global[c]);
    worst_tv = std::max(worst_tv, tv);
  }
  const PartitionPlan skew = partition_dirichlet(ds, 10, 0.1, 42);
  validate_plan(skew, ds.size());
  double modal = 0.0;
  for (const auto& shard : skew.assignments) {
    if (shard.empty()) continue;
    const auto h = histogram(shard);
    modal = std::max(modal, *std::ranges::max_element(h));
  }
  return {worst_tv < 0.05 && modal > 0.5,
          "mu=1e6 worst TV " + fmt("%.4f", worst_tv) + ", mu=0.1 max modal share " + fmt("%.3f", modal)};
}

double final_accuracy(const ExperimentConfig& cfg, const FederatedData& data) {
  return run_experiment(cfg, data).records.back().test_accuracy;
}

Verdict directional_server() {
  ExperimentConfig cfg = default_config(Scenario::labels_at_server);
  cfg.K = 10;
  cfg.F = 0.5;
  cfg.T = 100;
  cfg.B_u = 32;
  cfg.B_s = 32;
  cfg.eta = 1e-2;
  cfg.n_labeled = 200;
  cfg.syn_classes = 4;
  cfg.syn_dims = 16;
  cfg.syn_train = 4200;  // 200 kept at the server, 4000 spread over clients
  cfg.syn_test = 2000;
  cfg.syn_spread = 0.45;
  cfg.seed = 0;
  const FederatedData data = prepare_data(cfg);
  const double fedmix = final_accuracy(cfg, data);
  cfg.method = Method::ssl_fedavg;
  const double ssl = final_accuracy(cfg, data);
  return {fedmix >= 0.85 && fedmix - ssl >= 0.05,
          "FedMix-FedFreq " + fmt("%.4f", fedmix) + " vs SSL-FedAvg " + fmt("%.4f", ssl)};
}

Verdict directional_client() {
  ExperimentConfig cfg = default_config(Scenario::labels_at_client);
  cfg.K = 10;
  cfg.F = 0.5;
  cfg.T = 100;
  cfg.syn_classes = 4;
  cfg.syn_dims = 16;
  cfg.syn_train = 4000;
  cfg.syn_test = 2000;
  cfg.syn_spread = 0.45;
  cfg.seed = 0;
  const FederatedData data = prepare_data(cfg);
  const double freq = final_accuracy(cfg, data);
  cfg.aggregation = AggregationRule::fedavg;
  const double avg = final_accuracy(cfg, data);
  cfg.method = Method::ssl_fedavg;
  const double ssl = final_accuracy(cfg, data);
  return {freq >= avg - 0.01 && freq > ssl && avg > ssl,
          "FedMix-FedFreq " + fmt("%.4f", freq) + ", FedMix-FedAvg " + fmt("%.4f", avg) + ", SSL-FedAvg " +
              fmt("%.4f", ssl)};
}

Verdict selection_contract() {
  std::mt19937_64 rng(808);
  const MlpModel model = testing::random_model({6, 8, 5}, rng);
  const Matrix pool = testing::random_matrix(1000, 6, rng, -1.0, 2.0);
  const Matrix probs = forward(model, pool);
  std::vector<double> h(pool.rows());
  for (std::size_t i = 0; i < pool.rows(); ++i) h[i] = entropy(probs.row(i));

  const auto split = [&](const std::vector<std::size_t>& chosen) {
    std::vector<bool> in(pool.rows(), false);
    for (auto i : chosen) in[i] = true;
    double sel_min = INFINITY, sel_max = -INFINITY, rest_min = INFINITY, rest_max = -INFINITY;
    for (std::size_t i = 0; i < pool.rows(); ++i) {
      if (in[i]) {
        sel_min = std::min(sel_min, h[i]);
        sel_max = std::max(sel_max, h[i]);
      } else {
        rest_min = std::min(rest_min, h[i]);
        rest_max = std::max(rest_max, h[i]);
      }
    }
    return std::array<double, 4>{sel_min, sel_max, rest_min, rest_max};
  };
  const auto unc = select(model, pool, {SelectionKind::uncertainty, 100}, rng);
  const auto low = select(model, pool, {SelectionKind::min_entropy, 100}, rng);
  const auto all = select(model, pool, {SelectionKind::random, 1000}, rng);
  const auto u = split(unc);
  const auto l = split(low);
  std::vector<std::size_t> every(1000);
  std::iota(every.begin(), every.end(), 0);
  const bool ok = unc.size() == 100 && low.size() == 100 && u[0] >= u[3] && l[1] <= l[2] && all == every;
  return {ok, "uncertainty min " + fmt("%.4f", u[0]) + " >= rest max " + fmt("%.4f", u[3]) + "; min_entropy max " +
                  fmt("%.4f", l[1]) + " <= rest min " + fmt("%.4f", l[2]) + "; random full pool " +
                  (all == every ? "ok" : "WRONG")};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("fedmix_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  ExperimentConfig cfg = default_config(Scenario::labels_at_client);
  cfg.K = 10;
  cfg.F = 0.3;
  cfg.T = 20;
  cfg.syn_train = 2000;
  cfg.syn_test = 500;
  cfg.seed = 17;
  cli::cmd_train(cfg, root / "a");
  cli::cmd_train(cfg, root / "b");
  const bool same = slurp(root / "a/metrics.csv") == slurp(root / "b/metrics.csv");

  bool equivalent = true;
  for (auto scenario : {Scenario::labels_at_client, Scenario::labels_at_server}) {
    ExperimentConfig full = cfg;
    full.scenario = scenario;
    full.n_labeled = scenario == Scenario::labels_at_client ? 50 : 200;
    full.F = 1.0;
    full.aggregation = AggregationRule::fedavg;
    cli::cmd_train(full, root / "avg");
    full.aggregation = AggregationRule::fedfreq;
    cli::cmd_train(full, root / "freq");
    equivalent = equivalent && slurp(root / "avg/metrics.csv") == slurp(root / "freq/metrics.csv") &&
                 slurp(root / "avg/model.bin") == slurp(root / "freq/model.bin");
  }
  fs::remove_all(root);
  return {same && equivalent, std::string("repeat run ") + (same ? "byte-identical" : "DIFFERS") +
                                  "; F=1 fedavg vs fedfreq " + (equivalent ? "identical" : "DIFFER")};
}

// Plain sequential semi-supervised training on one dataset, written without
// the federated loop: both models restart from the mixed model each round.
ParamVector sequential_oracle(const ExperimentConfig& cfg, const ClientState& c, const FederatedData& data) {
  const TrainingSettings s = TrainingSettings::from(cfg);
  MlpModel omega = MlpModel::initialize(data.layer_dims, derive_rng(cfg.seed, RngStream::init)());
  const Matrix& pool = c.unlabeled.features;
  const Matrix& x = c.labeled.features;
  const std::vector<int>& y = *c.labeled.labels;
  for (std::size_t t = 0; t < cfg.T; ++t) {
    auto rng = derive_rng(cfg.seed, RngStream::client, t, 0);
    MlpModel psi = omega;
    MlpModel sigma = omega;
    const auto chosen = select(psi, pool, {cfg.selection, std::min(cfg.n, pool.rows())}, rng);
    const Matrix u = pool.gather_rows(chosen);
    const Matrix targets = pseudo_labels(psi, u, cfg.A, data.augmenter, rng);
    for (std::size_t e = 0; e < std::max(cfg.E_u, cfg.E_s); ++e) {
      std::vector<std::vector<std::size_t>> ub, sb;
      if (e < cfg.E_u) ub = make_batches(u.rows(), cfg.B_u, rng);
      if (e < cfg.E_s) sb = make_batches(x.rows(), cfg.B_s, rng);
      for (std::size_t i = 0; i < std::max(ub.size(), sb.size()); ++i) {
        MlpModel next_psi = psi;
        if (i < ub.size()) {
          const Matrix in = u.gather_rows(ub[i]);
          const Matrix a1 = data.augmenter.first_rows(in, rng);
          const Matrix a2 = data.augmenter.second_rows(in, rng);
          next_psi = sgd_step(psi, unsup_loss(psi, sigma.params(), in, targets.gather_rows(ub[i]), a1, a2, s.hp, t).grad,
                              cfg.eta);
        }
        if (i < sb.size()) {
          std::vector<int> yb;
          for (auto j : sb[i]) yb.push_back(y[j]);
          sigma = sgd_step(sigma, sup_loss(sigma, x.gather_rows(sb[i]), yb, s.hp).grad, cfg.eta);
        }
        psi = next_psi;
      }
    }
    ParamVector next(omega.params().shapes());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = cfg.alpha * psi.params()[i] + cfg.beta * sigma.params()[i];
    omega = omega.with_params(std::move(next));
  }
  return omega.params();
}

Verdict single_client() {
  ExperimentConfig cfg = default_config(Scenario::labels_at_client);
  cfg.K = 1;
  cfg.F = 1.0;
  cfg.T = 8;
  cfg.alpha = 0.6;
  cfg.beta = 0.4;
  cfg.gamma = 0.0;
  cfg.n = 60;
  cfg.B_u = 16;
  cfg.B_s = 8;
  cfg.E_s = 2;
  cfg.n_labeled = 40;
  cfg.syn_train = 300;
  cfg.syn_test = 200;
  cfg.hidden = {12};
  cfg.seed = 9;
  const FederatedData data = prepare_data(cfg);
  const RunResult run = run_experiment(cfg, data);
  const ParamVector oracle = sequential_oracle(cfg, data.clients[0], data);
  double worst = 0.0;
  for (std::size_t i = 0; i < oracle.size(); ++i) worst = std::max(worst, std::abs(oracle[i] - run.final_state.omega[i]));
  return {worst <= 1e-10, "max |federated - sequential| " + fmt("%.3g", worst) + " over " +
                              std::to_string(oracle.size()) + " parameters"};
}

}  // namespace

int main() {
  std::printf("kernel backend: %s\n", std::string(simd::active().name).c_str());
  criterion(1, "gradient correctness", 30, gradients);
  criterion(2, "lambda schedule", 5, schedule);
  criterion(3, "fedfreq algebra", 5, fedfreq_algebra);
  criterion(4, "mixing algebra", 5, mixing);
  criterion(5, "dirichlet partitioner", 10, dirichlet);
  criterion(6, "labels-at-server direction", 120, directional_server);
  criterion(7, "labels-at-client direction", 120, directional_client);
  criterion(8, "selection contract", 5, selection_contract);
  criterion(9, "determinism", 120, determinism);
  criterion(10, "single-client collapse", 30, single_client);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
