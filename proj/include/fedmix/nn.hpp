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

// Minimal dense classifier: ReLU hidden layers, softmax output, exact
// gradients for composite losses, plain SGD.

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "fedmix/matrix.hpp"

namespace fedmix {

/// Probability floor applied before every log or division.
inline constexpr double kProbFloor = 1e-12;

struct LayerShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const noexcept { return rows * cols; }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Flat parameter vector plus the (rows, cols) of each block it packs.
class ParamVector {
 public:
  ParamVector() = default;
  /// Zero-filled.
  explicit ParamVector(std::vector<LayerShape> shapes);
  ParamVector(std::vector<LayerShape> shapes, std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<LayerShape>& shapes() const noexcept { return shapes_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool same_layout(const ParamVector& other) const { return shapes_ == other.shapes_; }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<LayerShape> shapes_;
  std::vector<double> values_;
};

/// Block layout for an MLP with the given layer widths: for each layer l the
/// weight (dims[l+1] x dims[l]) followed by the bias (1 x dims[l+1]).
std::vector<LayerShape> mlp_shape_spec(std::span<const std::size_t> layer_dims);

class MlpModel {
 public:
  MlpModel(std::vector<std::size_t> layer_dims, ParamVector params);

  /// All weights and biases zero.
  static MlpModel zeros(std::vector<std::size_t> layer_dims);
  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MlpModel initialize(std::vector<std::size_t> layer_dims, std::uint64_t seed);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  const ParamVector& params() const noexcept { return params_; }
  std::size_t input_dim() const noexcept { return dims_.front(); }
  std::size_t num_classes() const noexcept { return dims_.back(); }
  std::size_t num_layers() const noexcept { return dims_.size() - 1; }

  /// Same architecture, different parameters.
  MlpModel with_params(ParamVector params) const;

  // Views into layer l; weight rows are output units.
  std::span<const double> weight(std::size_t l) const;
  std::span<const double> bias(std::size_t l) const;

 private:
  std::vector<std::size_t> dims_;
  ParamVector params_;
};

/// Row-wise class probabilities for an n x input_dim matrix.
Matrix forward(const MlpModel& model, const Matrix& inputs);

/// Row-wise softmax, max-shifted.
Matrix softmax_rows(const Matrix& logits);

/// Mean over rows of -sum_c target * ln(max(prob, floor)).
double cross_entropy(const Matrix& probs, const Matrix& targets);
/// Mean over rows of sum_c p * ln(max(p, floor) / max(q, floor)).
double kl_divergence(const Matrix& p, const Matrix& q);
/// Mean over rows of ||p_row - q_row||^2.
double sq_prob_distance(const Matrix& p, const Matrix& q);

// Composite losses. Each term is a scalar function of the model; the loss is
// their sum.

/// weight * cross_entropy(forward(inputs), targets)
struct CrossEntropyTerm {
  double weight = 1.0;
  Matrix inputs;
  Matrix targets;
};

/// weight * kl_divergence(forward(inputs), forward(perturbed))
struct KlTerm {
  double weight = 1.0;
  Matrix inputs;
  Matrix perturbed;
};

/// weight * sq_prob_distance(forward(first), forward(second))
struct SqDistanceTerm {
  double weight = 1.0;
  Matrix first;
  Matrix second;
};

/// weight * sum_i (theta_i - anchor_i)^2
struct ProximalTerm {
  double weight = 1.0;
  ParamVector anchor;
};

using LossTerm = std::variant<CrossEntropyTerm, KlTerm, SqDistanceTerm, ProximalTerm>;

struct LossSpec {
  std::vector<LossTerm> terms;
};

struct LossEval {
  double value = 0.0;
  std::vector<double> term_values;  // weighted, in spec order
  ParamVector grad;
};

/// Loss value and its exact gradient w.r.t. every parameter.
LossEval evaluate_loss(const MlpModel& model, const LossSpec& spec);
/// Loss value only; no backward pass.
double loss_value(const MlpModel& model, const LossSpec& spec);
ParamVector gradient(const MlpModel& model, const LossSpec& spec);

/// params - eta * grad
MlpModel sgd_step(const MlpModel& model, const ParamVector& grad, double eta);

/// sum_i coef_i * v_i, accumulated left to right.
struct WeightedParams {
  double coefficient;
  const ParamVector* params;
};
ParamVector linear_combine(std::span<const WeightedParams> terms);
ParamVector linear_combine(std::initializer_list<WeightedParams> terms);

}  // namespace fedmix
