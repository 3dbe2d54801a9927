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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fedmix/data.hpp"
#include "fedmix/error.hpp"

namespace fedmix {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.gather_rows(indices);
  if (labels) {
    std::vector<int> y(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) y[i] = (*labels)[indices[i]];
    out.labels = std::move(y);
  }
  out.num_classes = num_classes;
  out.image = image;
  return out;
}

Dataset Dataset::without_labels() const {
  Dataset out = *this;
  out.labels.reset();
  return out;
}

std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights) {
  std::vector<std::size_t> counts(weights.size(), 0);
  if (weights.empty()) return counts;
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw InvalidInput("largest_remainder: weights must have a positive sum");
  std::vector<double> frac(weights.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double exact = static_cast<double>(total) * weights[k] / sum;
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    frac[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  // Float error can push the floor sum one past total; trim from the smallest
  // fractions first.
  while (assigned > total) {
    std::size_t victim = weights.size();
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (counts[k] > 0 && (victim == weights.size() || frac[k] < frac[victim])) victim = k;
    }
    --counts[victim];
    frac[victim] += 1.0;
    --assigned;
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size(), ++assigned) {
    ++counts[order[i]];
  }
  return counts;
}

LabeledSplit split_labeled_unlabeled(const Dataset& ds, std::size_t n_labeled, std::uint64_t seed) {
  if (!ds.labels) throw InvalidInput("split_labeled_unlabeled: dataset has no labels");
  if (n_labeled > ds.size()) {
    throw InvalidInput("split_labeled_unlabeled: n_labeled " + std::to_string(n_labeled) +
                       " exceeds dataset size " + std::to_string(ds.size()));
  }
  const auto& y = *ds.labels;
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < y.size(); ++i) by_class.at(static_cast<std::size_t>(y[i])).push_back(i);

  std::vector<double> freq(by_class.size());
  for (std::size_t c = 0; c < by_class.size(); ++c) freq[c] = static_cast<double>(by_class[c].size());
  const std::vector<std::size_t> quota =
      ds.size() == 0 ? std::vector<std::size_t>(by_class.size(), 0) : largest_remainder(n_labeled, freq);

  std::mt19937_64 rng(seed);
  std::vector<bool> chosen(ds.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto pool = by_class[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < quota[c]; ++i) chosen[pool[i]] = true;
  }

  LabeledSplit out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (chosen[i] ? out.labeled_indices : out.unlabeled_indices).push_back(i);
  }
  out.labeled = ds.subset(out.labeled_indices);
  out.unlabeled = ds.subset(out.unlabeled_indices).without_labels();
  return out;
}

StreamingShard split_streaming(std::span<const std::size_t> shard, std::uint64_t seed) {
  if (shard.size() < kStreamingParts) {
    throw InvalidInput("split_streaming: shard of " + std::to_string(shard.size()) +
                       " samples cannot feed " + std::to_string(kStreamingParts) + " parts");
  }
  std::vector<std::size_t> order(shard.begin(), shard.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  StreamingShard out;
  out.parts.resize(kStreamingParts);
  const std::size_t base = order.size() / kStreamingParts;
  const std::size_t extra = order.size() % kStreamingParts;
  std::size_t pos = 0;
  for (std::size_t p = 0; p < kStreamingParts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out.parts[p].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

}  // namespace fedmix
