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

// Pseudo-labels by summing predictions over augmented copies, and the
// entropy-based choice of which unlabeled samples receive them.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "fedmix/data.hpp"
#include "fedmix/matrix.hpp"
#include "fedmix/nn.hpp"

namespace fedmix {

/// -sum p * ln(max(p, floor)). Throws InvalidInput unless the row is a
/// distribution (entries in [0, 1], sum within 1e-6 of 1).
double entropy(std::span<const double> prob_row);

/// One-hot at the argmax of the summed rows (ties to the lowest class).
std::vector<double> one_hot_argmax_of_sum(const Matrix& prob_rows);

/// Copies of `u` fed to the pseudo-labeler: the identity followed by
/// `copies - 1` draws from `augmenter.random`, consuming `rng` in that order.
Matrix augmented_copies(std::span<const double> u, std::size_t copies, const Augmenter& augmenter,
                        std::mt19937_64& rng);

/// Sum f(pi_i(u)) over the copies and one-hot the argmax.
std::vector<double> pseudo_label(const MlpModel& psi, std::span<const double> u, std::size_t copies,
                                 const Augmenter& augmenter, std::mt19937_64& rng);

/// Row-wise pseudo_label over a batch, rows processed in order.
Matrix pseudo_labels(const MlpModel& psi, const Matrix& inputs, std::size_t copies,
                     const Augmenter& augmenter, std::mt19937_64& rng);

enum class SelectionKind { uncertainty, min_entropy, random };

struct SelectionStrategy {
  SelectionKind kind = SelectionKind::uncertainty;
  std::size_t n = 100;
};

/// Indices into `pool` (ascending). uncertainty keeps the n largest
/// entropies, min_entropy the n smallest, random a uniform draw without
/// replacement. Entropy ties favour the lower index.
std::vector<std::size_t> select(const MlpModel& psi, const Matrix& pool,
                                const SelectionStrategy& strategy, std::mt19937_64& rng);

/// Selection on precomputed entropies; `select` delegates here.
std::vector<std::size_t> select_by_entropy(std::span<const double> entropies, SelectionKind kind,
                                           std::size_t n, std::mt19937_64& rng);

}  // namespace fedmix
