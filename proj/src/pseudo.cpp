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

#include "fedmix/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedmix/error.hpp"

namespace fedmix {

double entropy(std::span<const double> prob_row) {
  double sum = 0.0;
  for (double p : prob_row) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("entropy: entry outside [0, 1]");
    sum += p;
  }
  if (prob_row.empty() || std::abs(sum - 1.0) > 1e-6) {
    throw InvalidInput("entropy: row sums to " + std::to_string(sum) + ", not 1");
  }
  double h = 0.0;
  for (double p : prob_row) {
    if (p > 0.0) h -= p * std::log(std::max(p, kProbFloor));
  }
  return h;
}

std::vector<double> one_hot_argmax_of_sum(const Matrix& prob_rows) {
  std::vector<double> total(prob_rows.cols(), 0.0);
  for (std::size_t i = 0; i < prob_rows.rows(); ++i) {
    const auto row = prob_rows.row(i);
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += row[j];
  }
  std::vector<double> out(total.size(), 0.0);
  if (!out.empty()) out[argmax(total)] = 1.0;
  return out;
}

Matrix augmented_copies(std::span<const double> u, std::size_t copies, const Augmenter& augmenter,
                        std::mt19937_64& rng) {
  if (copies == 0) throw InvalidInput("pseudo_label: need at least one augmented copy");
  Matrix out(copies, u.size());
  std::ranges::copy(u, out.row(0).begin());
  for (std::size_t a = 1; a < copies; ++a) std::ranges::copy(augmenter.random(u, rng), out.row(a).begin());
  return out;
}

std::vector<double> pseudo_label(const MlpModel& psi, std::span<const double> u, std::size_t copies,
                                 const Augmenter& augmenter, std::mt19937_64& rng) {
  return one_hot_argmax_of_sum(forward(psi, augmented_copies(u, copies, augmenter, rng)));
}

Matrix pseudo_labels(const MlpModel& psi, const Matrix& inputs, std::size_t copies,
                     const Augmenter& augmenter, std::mt19937_64& rng) {
  Matrix out(inputs.rows(), psi.num_classes());
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    std::ranges::copy(pseudo_label(psi, inputs.row(i), copies, augmenter, rng), out.row(i).begin());
  }
  return out;
}

std::vector<std::size_t> select_by_entropy(std::span<const double> entropies, SelectionKind kind,
                                           std::size_t n, std::mt19937_64& rng) {
  if (n > entropies.size()) {
    throw InvalidInput("select: n = " + std::to_string(n) + " exceeds pool of " +
                       std::to_string(entropies.size()));
  }
  std::vector<std::size_t> order(entropies.size());
  std::iota(order.begin(), order.end(), 0);
  switch (kind) {
    case SelectionKind::uncertainty:
      std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return entropies[a] > entropies[b]; });
      break;
    case SelectionKind::min_entropy:
      std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return entropies[a] < entropies[b]; });
      break;
    case SelectionKind::random:
      std::shuffle(order.begin(), order.end(), rng);
      break;
  }
  order.resize(n);
  std::ranges::sort(order);
  return order;
}

std::vector<std::size_t> select(const MlpModel& psi, const Matrix& pool,
                                const SelectionStrategy& strategy, std::mt19937_64& rng) {
  if (strategy.n > pool.rows()) {
    throw InvalidInput("select: n = " + std::to_string(strategy.n) + " exceeds pool of " +
                       std::to_string(pool.rows()));
  }
  std::vector<double> h(pool.rows(), 0.0);
  if (strategy.kind != SelectionKind::random) {
    const Matrix probs = forward(psi, pool);
    for (std::size_t i = 0; i < pool.rows(); ++i) h[i] = entropy(probs.row(i));
  }
  return select_by_entropy(h, strategy.kind, strategy.n, rng);
}

}  // namespace fedmix
