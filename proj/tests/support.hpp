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

// Hand-rolled generators and a finite-difference checker shared by the unit
// tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fedmix/matrix.hpp"
#include "fedmix/nn.hpp"

namespace fedmix::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = 0.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(classes) - 1);
  std::vector<int> y(n);
  for (int& v : y) v = d(rng);
  return y;
}

inline Matrix random_one_hot(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
  return one_hot(random_labels(n, classes, rng), classes);
}

// Rows drawn uniformly from the simplex.
inline Matrix random_prob_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (double& v : m.row(r)) total += (v = e(rng));
    for (double& v : m.row(r)) v /= total;
  }
  return m;
}

// 1 to 2 hidden layers of width 2..6, inputs 2..5, classes 2..4.
inline std::vector<std::size_t> random_dims(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> in(2, 5), hid(2, 6), cls(2, 4), depth(1, 2);
  std::vector<std::size_t> dims{in(rng)};
  for (std::size_t i = depth(rng); i > 0; --i) dims.push_back(hid(rng));
  dims.push_back(cls(rng));
  return dims;
}

// Larger weights than the default initializer so softmax outputs move away
// from uniform and every term has a nontrivial gradient.
inline MlpModel random_model(const std::vector<std::size_t>& dims, std::mt19937_64& rng, double scale = 1.5) {
  ParamVector p(mlp_shape_spec(dims));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : p.values()) v = u(rng);
  return MlpModel(dims, std::move(p));
}

inline ParamVector random_params_like(const ParamVector& like, std::mt19937_64& rng, double scale = 1.0) {
  ParamVector p(like.shapes());
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : p.values()) v = u(rng);
  return p;
}

// Central differences of `f` around `model`, compared with `analytic` as
// ||a - n|| / max(||a||, ||n||).
inline double fd_relative_error(const MlpModel& model, const std::function<double(const MlpModel&)>& f,
                                const ParamVector& analytic, double step = 1e-5) {
  ParamVector p = model.params();
  std::vector<double> numeric(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + step;
    const double up = f(model.with_params(p));
    p[i] = orig - step;
    const double down = f(model.with_params(p));
    p[i] = orig;
    numeric[i] = (up - down) / (2.0 * step);
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
  return std::sqrt(diff) / denom;
}

}  // namespace fedmix::testing
