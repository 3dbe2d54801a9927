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

#include "fedmix/objectives.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fedmix/error.hpp"

namespace fedmix {

namespace {

Matrix labels_to_targets(const MlpModel& model, const Matrix& inputs, std::span<const int> labels,
                         const char* who) {
  if (labels.size() != inputs.rows()) {
    throw InvalidInput(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(inputs.rows()) + " rows");
  }
  return one_hot(labels, model.num_classes());
}

void require_rows(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidInput(std::string(who) + ": batch shapes differ");
  }
}

}  // namespace

double lambda_t(const SslHyperparams& hp, std::size_t t) {
  const double num = hp.participation * static_cast<double>(hp.num_clients) * static_cast<double>(t);
  const double den = 2.0 * static_cast<double>(hp.batch_size) * static_cast<double>(hp.local_epochs);
  return 2.0 / std::numbers::pi * std::atan(num / den);
}

ObjectiveValue unsup_loss_weighted(const MlpModel& psi, const ParamVector& sigma,
                                   const Matrix& inputs, const Matrix& pseudo, const Matrix& aug1,
                                   const Matrix& aug2, const SslHyperparams& hp,
                                   double pseudo_weight) {
  if (pseudo.rows() != inputs.rows() || pseudo.cols() != psi.num_classes()) {
    throw InvalidInput("unsup_loss: pseudo-label matrix does not match the batch");
  }
  require_rows(inputs, aug1, "unsup_loss");
  require_rows(inputs, aug2, "unsup_loss");
  if (!sigma.same_layout(psi.params())) throw InvalidInput("unsup_loss: sigma layout mismatch");

  LossSpec spec;
  spec.terms.emplace_back(CrossEntropyTerm{pseudo_weight, inputs, pseudo});
  if (hp.consistency == ConsistencyKind::squared) {
    spec.terms.emplace_back(SqDistanceTerm{1.0 - pseudo_weight, aug1, aug2});
  } else {
    spec.terms.emplace_back(KlTerm{1.0 - pseudo_weight, aug1, aug2});
  }
  // Mean over parameters, not the sum.
  spec.terms.emplace_back(ProximalTerm{hp.lambda_l2 / static_cast<double>(sigma.size()), sigma});

  LossEval eval = evaluate_loss(psi, spec);
  return {eval.value, eval.term_values[0], eval.term_values[1], eval.term_values[2],
          std::move(eval.grad)};
}

ObjectiveValue unsup_loss(const MlpModel& psi, const ParamVector& sigma, const Matrix& inputs,
                          const Matrix& pseudo, const Matrix& aug1, const Matrix& aug2,
                          const SslHyperparams& hp, std::size_t t) {
  return unsup_loss_weighted(psi, sigma, inputs, pseudo, aug1, aug2, hp, lambda_t(hp, t));
}

ObjectiveValue sup_loss(const MlpModel& sigma, const Matrix& inputs, std::span<const int> labels,
                        const SslHyperparams& hp) {
  LossSpec spec;
  spec.terms.emplace_back(
      CrossEntropyTerm{hp.lambda_s, inputs, labels_to_targets(sigma, inputs, labels, "sup_loss")});
  LossEval eval = evaluate_loss(sigma, spec);
  return {eval.value, eval.value, 0.0, 0.0, std::move(eval.grad)};
}

ObjectiveValue baseline_client_loss_lac(const MlpModel& theta, const Matrix& labeled_inputs,
                                        std::span<const int> labels,
                                        const Matrix& unlabeled_inputs, const Matrix& aug) {
  require_rows(unlabeled_inputs, aug, "baseline_client_loss_lac");
  LossSpec spec;
  spec.terms.emplace_back(CrossEntropyTerm{
      1.0, labeled_inputs,
      labels_to_targets(theta, labeled_inputs, labels, "baseline_client_loss_lac")});
  spec.terms.emplace_back(KlTerm{1.0, unlabeled_inputs, aug});
  LossEval eval = evaluate_loss(theta, spec);
  return {eval.value, eval.term_values[0], eval.term_values[1], 0.0, std::move(eval.grad)};
}

ObjectiveValue baseline_client_loss_las(const MlpModel& theta, const Matrix& unlabeled_inputs,
                                        const Matrix& pseudo, const Matrix& aug) {
  require_rows(unlabeled_inputs, aug, "baseline_client_loss_las");
  if (pseudo.rows() != unlabeled_inputs.rows() || pseudo.cols() != theta.num_classes()) {
    throw InvalidInput("baseline_client_loss_las: pseudo-label matrix does not match the batch");
  }
  LossSpec spec;
  spec.terms.emplace_back(CrossEntropyTerm{1.0, unlabeled_inputs, pseudo});
  spec.terms.emplace_back(KlTerm{1.0, unlabeled_inputs, aug});
  LossEval eval = evaluate_loss(theta, spec);
  return {eval.value, eval.term_values[0], eval.term_values[1], 0.0, std::move(eval.grad)};
}

ObjectiveValue server_loss(const MlpModel& theta, const Matrix& inputs,
                           std::span<const int> labels) {
  LossSpec spec;
  spec.terms.emplace_back(
      CrossEntropyTerm{1.0, inputs, labels_to_targets(theta, inputs, labels, "server_loss")});
  LossEval eval = evaluate_loss(theta, spec);
  return {eval.value, eval.value, 0.0, 0.0, std::move(eval.grad)};
}

}  // namespace fedmix
