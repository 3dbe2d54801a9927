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
#include <random>

#include "fedmix/data.hpp"
#include "fedmix/error.hpp"

namespace fedmix {

namespace {
constexpr double kLow = 0.2;
constexpr double kHigh = 0.8;
}  // namespace

Matrix synthetic_centroids(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw InvalidInput("gen_synthetic: need at least 2 classes");
  Matrix centroids(spec.classes, spec.dims, kLow);
  if (spec.dims >= spec.classes) {
    // Coordinate j belongs to class j mod c.
    for (std::size_t c = 0; c < spec.classes; ++c) {
      for (std::size_t j = c; j < spec.dims; j += spec.classes) centroids(c, j) = kHigh;
    }
  } else {
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(kLow, kHigh);
    for (double& v : centroids.data()) v = u(rng);
  }
  return centroids;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.samples < spec.classes) throw InvalidInput("gen_synthetic: fewer samples than classes");
  const Matrix centroids = synthetic_centroids(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset ds;
  ds.features = Matrix(spec.samples, spec.dims);
  std::vector<int> labels(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t c = i % spec.classes;
    labels[i] = static_cast<int>(c);
    auto row = ds.features.row(i);
    for (std::size_t j = 0; j < spec.dims; ++j) {
      const double v = spec.spread == 0.0 ? centroids(c, j) : centroids(c, j) + spec.spread * noise(rng);
      row[j] = std::clamp(v, 0.0, 1.0);
    }
  }
  ds.labels = std::move(labels);
  ds.num_classes = spec.classes;
  return ds;
}

}  // namespace fedmix
