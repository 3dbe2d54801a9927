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

#include "fedmix/aggregation.hpp"

#include <cmath>
#include <string>

#include "fedmix/error.hpp"

namespace fedmix {

FrequencyTracker record_selection(FrequencyTracker tracker, std::span<const std::size_t> selected) {
  for (std::size_t k : selected) {
    if (k >= tracker.counts.size()) {
      throw InvalidInput("record_selection: client " + std::to_string(k) + " out of range");
    }
    ++tracker.counts[k];
  }
  return tracker;
}

void validate(const MixWeights& w) {
  if (w.alpha < 0.0 || w.beta < 0.0 || w.gamma < 0.0) throw InvalidInput("mix weights must be >= 0");
  if (std::abs(w.alpha + w.beta + w.gamma - 1.0) > 1e-12) {
    throw InvalidInput("mix weights must sum to 1");
  }
}

ParamVector weighted_sum(std::span<const ParamVector> models, std::span<const double> weights) {
  if (models.empty()) throw InvalidInput("aggregation: no models");
  if (models.size() != weights.size()) throw InvalidInput("aggregation: weight count mismatch");
  std::vector<WeightedParams> terms;
  terms.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) terms.push_back({weights[i], &models[i]});
  return linear_combine(terms);
}

ParamVector fedavg(std::span<const ParamVector> models) {
  if (models.empty()) throw InvalidInput("fedavg: no models");
  const std::vector<double> weights(models.size(), 1.0 / static_cast<double>(models.size()));
  return weighted_sum(models, weights);
}

FedFreqWeights fedfreq_weights(const FrequencyTracker& tracker, std::span<const std::size_t> selected,
                               double participation, std::size_t num_clients) {
  if (selected.empty()) throw InvalidInput("fedfreq: empty selection");
  const double fk = participation * static_cast<double>(num_clients);
  if (selected.size() == 1 || fk <= 1.0) {
    throw DegenerateSelection("fedfreq: weights undefined for " + std::to_string(selected.size()) +
                              " selected client(s) with F*K = " + std::to_string(fk));
  }
  std::vector<bool> seen(tracker.num_clients(), false);
  std::uint64_t total = 0;
  for (std::size_t k : selected) {
    if (k >= tracker.num_clients()) throw InvalidInput("fedfreq: client " + std::to_string(k) + " out of range");
    if (seen[k]) throw InvalidInput("fedfreq: client " + std::to_string(k) + " selected twice");
    seen[k] = true;
    if (tracker.counts[k] == 0) {
      throw InvalidInput("fedfreq: client " + std::to_string(k) + " selected but has count 0");
    }
    total += tracker.counts[k];
  }

  // (1 - q_k/Q) / (|S| - 1) == (Q - q_k) / ((|S| - 1) * Q): one correctly
  // rounded division of exact integers. Equals the F*K - 1 form whenever
  // |S| == F*K and renormalizes otherwise.
  FedFreqWeights out;
  out.rescaled = std::abs(static_cast<double>(selected.size()) - fk) > 1e-9;
  const double denom = static_cast<double>(selected.size() - 1) * static_cast<double>(total);
  out.weights.reserve(selected.size());
  for (std::size_t k : selected) {
    out.weights.push_back(static_cast<double>(total - tracker.counts[k]) / denom);
  }
  return out;
}

ParamVector fedfreq(std::span<const ParamVector> models, const FrequencyTracker& tracker,
                    std::span<const std::size_t> selected, double participation,
                    std::size_t num_clients) {
  if (models.size() != selected.size()) throw InvalidInput("fedfreq: models and selection differ in size");
  const auto w = fedfreq_weights(tracker, selected, participation, num_clients);
  return weighted_sum(models, w.weights);
}

ParamVector mix(const ParamVector& psi, const ParamVector& sigma, const ParamVector& omega_prev,
                const MixWeights& w) {
  validate(w);
  return linear_combine({{w.alpha, &psi}, {w.beta, &sigma}, {w.gamma, &omega_prev}});
}

}  // namespace fedmix
