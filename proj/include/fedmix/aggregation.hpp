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

// Server-side combination rules: FedAvg, frequency-weighted FedFreq, and the
// three-way mix of unsupervised, supervised and previous global models.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedmix/nn.hpp"

namespace fedmix {

/// Participation counts q_k: rounds in which client k has been selected,
/// including the current one once record_selection has run.
struct FrequencyTracker {
  std::vector<std::uint64_t> counts;

  FrequencyTracker() = default;
  explicit FrequencyTracker(std::size_t num_clients) : counts(num_clients, 0) {}
  std::size_t num_clients() const noexcept { return counts.size(); }
  friend bool operator==(const FrequencyTracker&, const FrequencyTracker&) = default;
};

/// Returns the tracker with q_k incremented once per selected k.
FrequencyTracker record_selection(FrequencyTracker tracker, std::span<const std::size_t> selected);

struct MixWeights {
  double alpha = 0.5;  // unsupervised model
  double beta = 0.3;   // supervised model
  double gamma = 0.2;  // previous global model
};

/// Throws InvalidInput unless all weights are >= 0 and sum to 1 within 1e-12.
void validate(const MixWeights& w);

/// Unweighted elementwise mean.
ParamVector fedavg(std::span<const ParamVector> models);

struct FedFreqWeights {
  std::vector<double> weights;  // aligned with the selection
  bool rescaled = false;        // |selected| != F*K, weights renormalized to sum 1
};

/// w_k = (1 - p_k) / (F*K - 1) with p_k = q_k / sum_{selected} q. When
/// |selected| differs from F*K the weights are rescaled to sum to 1. Throws
/// DegenerateSelection for a single selected client or F*K <= 1.
FedFreqWeights fedfreq_weights(const FrequencyTracker& tracker, std::span<const std::size_t> selected,
                               double participation, std::size_t num_clients);

/// sum_k w_k * models[k] with fedfreq_weights; models align with `selected`.
ParamVector fedfreq(std::span<const ParamVector> models, const FrequencyTracker& tracker,
                    std::span<const std::size_t> selected, double participation,
                    std::size_t num_clients);

/// sum_k weights[k] * models[k].
ParamVector weighted_sum(std::span<const ParamVector> models, std::span<const double> weights);

/// alpha * psi + beta * sigma + gamma * omega_prev
ParamVector mix(const ParamVector& psi, const ParamVector& sigma, const ParamVector& omega_prev,
                const MixWeights& w);

}  // namespace fedmix
