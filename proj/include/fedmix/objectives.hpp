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

// Scalar objectives of the two-model semi-supervised scheme and of the
// single-model baselines. Every loss is a batch mean and comes back with its
// gradient w.r.t. the model it is evaluated on.

#include <cstddef>

#include "fedmix/matrix.hpp"
#include "fedmix/nn.hpp"

namespace fedmix {

enum class ConsistencyKind { kl, squared };

struct SslHyperparams {
  double lambda_s = 10.0;
  double lambda_l2 = 15.0;
  double participation = 0.05;  // F
  std::size_t num_clients = 100;  // K
  std::size_t batch_size = 100;  // B (unlabeled mini-batch)
  std::size_t local_epochs = 1;  // E
  ConsistencyKind consistency = ConsistencyKind::squared;
};

/// Round-dependent pseudo-label weight (2/pi) * atan(F*K*t / (2*B*E)).
double lambda_t(const SslHyperparams& hp, std::size_t t);

/// A loss value split into its weighted parts, with the gradient.
struct ObjectiveValue {
  double value = 0.0;
  double pseudo_term = 0.0;
  double consistency_term = 0.0;
  double proximal_term = 0.0;
  ParamVector grad;
};

/// Unsupervised model loss on a batch of unlabeled inputs:
///   lambda_t * CE(pseudo, f(u)) + (1 - lambda_t) * consistency(f(aug1), f(aug2))
///   + lambda_L2 * mean_i (psi_i - sigma_i)^2
/// `consistency` is the squared probability distance by default, or
/// KL(f(aug1) || f(aug2)) when hp.consistency == kl.
ObjectiveValue unsup_loss(const MlpModel& psi, const ParamVector& sigma, const Matrix& inputs,
                          const Matrix& pseudo, const Matrix& aug1, const Matrix& aug2,
                          const SslHyperparams& hp, std::size_t t);

/// Same as above with the pseudo-label weight given directly instead of
/// derived from the round.
ObjectiveValue unsup_loss_weighted(const MlpModel& psi, const ParamVector& sigma,
                                   const Matrix& inputs, const Matrix& pseudo, const Matrix& aug1,
                                   const Matrix& aug2, const SslHyperparams& hp,
                                   double pseudo_weight);

/// lambda_s * CE(y, f(x)) on a labeled batch.
ObjectiveValue sup_loss(const MlpModel& sigma, const Matrix& inputs, std::span<const int> labels,
                        const SslHyperparams& hp);

/// Labels-at-client baseline: CE(y, f(x)) + KL(f(u) || f(aug)).
ObjectiveValue baseline_client_loss_lac(const MlpModel& theta, const Matrix& labeled_inputs,
                                        std::span<const int> labels,
                                        const Matrix& unlabeled_inputs, const Matrix& aug);

/// Labels-at-server baseline: CE(pseudo, f(u)) + KL(f(u) || f(aug)).
ObjectiveValue baseline_client_loss_las(const MlpModel& theta, const Matrix& unlabeled_inputs,
                                        const Matrix& pseudo, const Matrix& aug);

/// Server-side CE(y, f(x)), unit weight.
ObjectiveValue server_loss(const MlpModel& theta, const Matrix& inputs,
                           std::span<const int> labels);

}  // namespace fedmix
