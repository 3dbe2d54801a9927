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

#include "fedmix/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fedmix/error.hpp"
#include "fedmix/simd/kernels.hpp"

namespace fedmix {

namespace {

std::size_t total_size(const std::vector<LayerShape>& shapes) {
  std::size_t n = 0;
  for (const auto& s : shapes) n += s.size();
  return n;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidInput(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()));
  }
}

double clamp_prob(double p) { return std::max(p, kProbFloor); }

// Activations kept for the backward pass. layer_inputs[l] feeds layer l;
// pre_activations[l] is that layer's affine output.
struct Trace {
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre_activations;
  Matrix probs;
};

Trace forward_trace(const MlpModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_dim()) {
    throw InvalidInput("forward: input has " + std::to_string(inputs.cols()) +
                       " columns, model expects " + std::to_string(model.input_dim()));
  }
  const auto& k = simd::active();
  const auto& dims = model.layer_dims();
  Trace trace;
  trace.layer_inputs.reserve(model.num_layers());
  trace.pre_activations.reserve(model.num_layers());
  Matrix current = inputs;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    const auto w = model.weight(l);
    const auto b = model.bias(l);
    Matrix z(current.rows(), out);
    for (std::size_t i = 0; i < current.rows(); ++i) {
      const double* x = current.row(i).data();
      for (std::size_t o = 0; o < out; ++o) z(i, o) = b[o] + k.dot(x, w.data() + o * in, in);
    }
    trace.layer_inputs.push_back(std::move(current));
    if (l + 1 < model.num_layers()) {
      current = z;
      for (double& v : current.data()) v = std::max(v, 0.0);
    } else {
      trace.probs = softmax_rows(z);
    }
    trace.pre_activations.push_back(std::move(z));
  }
  return trace;
}

// Accumulates d(loss)/d(params) given d(loss)/d(probs) for one traced batch.
void backward(const MlpModel& model, const Trace& trace, const Matrix& dprobs, ParamVector& grad) {
  const auto& k = simd::active();
  const auto& dims = model.layer_dims();
  const Matrix& probs = trace.probs;
  const std::size_t n = probs.rows();
  const std::size_t c = probs.cols();

  // Softmax Jacobian-vector product: dz_j = p_j * (g_j - sum_c g_c p_c).
  Matrix delta(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const double inner = k.dot(dprobs.row(i).data(), probs.row(i).data(), c);
    for (std::size_t j = 0; j < c; ++j) delta(i, j) = probs(i, j) * (dprobs(i, j) - inner);
  }

  // Parameter offsets of each layer's weight block.
  std::vector<std::size_t> offsets(model.num_layers());
  std::size_t off = 0;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    offsets[l] = off;
    off += dims[l] * dims[l + 1] + dims[l + 1];
  }

  auto g = grad.values();
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    const Matrix& a = trace.layer_inputs[l];
    double* gw = g.data() + offsets[l];
    double* gb = gw + in * out;
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = a.row(i).data();
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta(i, o);
        if (d == 0.0) continue;
        k.axpy(gw + o * in, d, x, in);
        gb[o] += d;
      }
    }
    if (l == 0) break;
    const auto w = model.weight(l);
    const Matrix& z_prev = trace.pre_activations[l - 1];
    Matrix next(n, in);
    for (std::size_t i = 0; i < n; ++i) {
      double* dst = next.row(i).data();
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta(i, o);
        if (d != 0.0) k.axpy(dst, d, w.data() + o * in, in);
      }
      for (std::size_t j = 0; j < in; ++j) {
        if (!(z_prev(i, j) > 0.0)) dst[j] = 0.0;
      }
    }
    delta = std::move(next);
  }
}

}  // namespace

ParamVector::ParamVector(std::vector<LayerShape> shapes)
    : shapes_(std::move(shapes)), values_(total_size(shapes_), 0.0) {}

ParamVector::ParamVector(std::vector<LayerShape> shapes, std::vector<double> values)
    : shapes_(std::move(shapes)), values_(std::move(values)) {
  if (values_.size() != total_size(shapes_)) {
    throw InvalidInput("ParamVector: " + std::to_string(values_.size()) +
                       " values but shape spec holds " + std::to_string(total_size(shapes_)));
  }
}

std::vector<LayerShape> mlp_shape_spec(std::span<const std::size_t> layer_dims) {
  std::vector<LayerShape> shapes;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    shapes.push_back({layer_dims[l + 1], layer_dims[l]});
    shapes.push_back({1, layer_dims[l + 1]});
  }
  return shapes;
}

MlpModel::MlpModel(std::vector<std::size_t> layer_dims, ParamVector params)
    : dims_(std::move(layer_dims)), params_(std::move(params)) {
  if (dims_.size() < 2) throw InvalidInput("MlpModel: need at least input and output widths");
  if (std::ranges::any_of(dims_, [](std::size_t d) { return d == 0; })) {
    throw InvalidInput("MlpModel: layer widths must be positive");
  }
  if (params_.shapes() != mlp_shape_spec(dims_)) {
    throw InvalidInput("MlpModel: parameter shape spec does not match layer widths");
  }
}

MlpModel MlpModel::zeros(std::vector<std::size_t> layer_dims) {
  auto shapes = mlp_shape_spec(layer_dims);
  return MlpModel(std::move(layer_dims), ParamVector(std::move(shapes)));
}

MlpModel MlpModel::initialize(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  MlpModel model = zeros(std::move(layer_dims));
  std::mt19937_64 rng(seed);
  auto values = model.params_.values();
  std::size_t off = 0;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(model.dims_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t count = model.dims_[l] * model.dims_[l + 1] + model.dims_[l + 1];
    for (std::size_t i = 0; i < count; ++i) values[off + i] = dist(rng);
    off += count;
  }
  return model;
}

MlpModel MlpModel::with_params(ParamVector params) const { return MlpModel(dims_, std::move(params)); }

std::span<const double> MlpModel::weight(std::size_t l) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < l; ++i) off += dims_[i] * dims_[i + 1] + dims_[i + 1];
  return params_.values().subspan(off, dims_[l] * dims_[l + 1]);
}

std::span<const double> MlpModel::bias(std::size_t l) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < l; ++i) off += dims_[i] * dims_[i + 1] + dims_[i + 1];
  return params_.values().subspan(off + dims_[l] * dims_[l + 1], dims_[l + 1]);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto in = logits.row(i);
    auto dst = out.row(i);
    const double peak = *std::ranges::max_element(in);
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      dst[j] = std::exp(in[j] - peak);
      total += dst[j];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

Matrix forward(const MlpModel& model, const Matrix& inputs) {
  return forward_trace(model, inputs).probs;
}

double cross_entropy(const Matrix& probs, const Matrix& targets) {
  require_same_shape(probs, targets, "cross_entropy");
  if (probs.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    for (std::size_t j = 0; j < probs.cols(); ++j) {
      const double t = targets(i, j);
      if (t != 0.0) total -= t * std::log(clamp_prob(probs(i, j)));
    }
  }
  return total / static_cast<double>(probs.rows());
}

double kl_divergence(const Matrix& p, const Matrix& q) {
  require_same_shape(p, q, "kl_divergence");
  if (p.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      const double pv = p(i, j);
      if (pv != 0.0) total += pv * (std::log(clamp_prob(pv)) - std::log(clamp_prob(q(i, j))));
    }
  }
  return total / static_cast<double>(p.rows());
}

double sq_prob_distance(const Matrix& p, const Matrix& q) {
  require_same_shape(p, q, "sq_prob_distance");
  if (p.rows() == 0) return 0.0;
  return simd::active().sq_diff_sum(p.data().data(), q.data().data(), p.data().size()) /
         static_cast<double>(p.rows());
}

namespace {

struct TermVisitor {
  const MlpModel& model;
  ParamVector* grad;  // null when only the value is wanted

  double operator()(const CrossEntropyTerm& term) const {
    const Trace trace = forward_trace(model, term.inputs);
    const double value = term.weight * cross_entropy(trace.probs, term.targets);
    if (grad != nullptr && term.weight != 0.0 && trace.probs.rows() > 0) {
      const Matrix& p = trace.probs;
      const double scale = term.weight / static_cast<double>(p.rows());
      Matrix dp(p.rows(), p.cols());
      for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
          if (p(i, j) >= kProbFloor) dp(i, j) = -scale * term.targets(i, j) / p(i, j);
        }
      }
      backward(model, trace, dp, *grad);
    }
    return value;
  }

  double operator()(const KlTerm& term) const {
    const Trace tp = forward_trace(model, term.inputs);
    const Trace tq = forward_trace(model, term.perturbed);
    const double value = term.weight * kl_divergence(tp.probs, tq.probs);
    if (grad != nullptr && term.weight != 0.0 && tp.probs.rows() > 0) {
      const Matrix& p = tp.probs;
      const Matrix& q = tq.probs;
      const double scale = term.weight / static_cast<double>(p.rows());
      Matrix dp(p.rows(), p.cols());
      Matrix dq(p.rows(), p.cols());
      for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
          const double pv = p(i, j);
          const double qv = q(i, j);
          const double log_ratio = std::log(clamp_prob(pv)) - std::log(clamp_prob(qv));
          dp(i, j) = scale * (log_ratio + (pv >= kProbFloor ? 1.0 : 0.0));
          if (qv >= kProbFloor) dq(i, j) = -scale * pv / qv;
        }
      }
      backward(model, tp, dp, *grad);
      backward(model, tq, dq, *grad);
    }
    return value;
  }

  double operator()(const SqDistanceTerm& term) const {
    const Trace ta = forward_trace(model, term.first);
    const Trace tb = forward_trace(model, term.second);
    const double value = term.weight * sq_prob_distance(ta.probs, tb.probs);
    if (grad != nullptr && term.weight != 0.0 && ta.probs.rows() > 0) {
      const double scale = 2.0 * term.weight / static_cast<double>(ta.probs.rows());
      Matrix da(ta.probs.rows(), ta.probs.cols());
      Matrix db(ta.probs.rows(), ta.probs.cols());
      for (std::size_t i = 0; i < da.data().size(); ++i) {
        const double diff = ta.probs.data()[i] - tb.probs.data()[i];
        da.data()[i] = scale * diff;
        db.data()[i] = -scale * diff;
      }
      backward(model, ta, da, *grad);
      backward(model, tb, db, *grad);
    }
    return value;
  }

  double operator()(const ProximalTerm& term) const {
    const auto& params = model.params();
    if (!params.same_layout(term.anchor)) throw InvalidInput("proximal term: anchor layout mismatch");
    const auto& k = simd::active();
    const double value =
        term.weight * k.sq_diff_sum(params.values().data(), term.anchor.values().data(), params.size());
    if (grad != nullptr && term.weight != 0.0) {
      auto g = grad->values();
      const auto theta = params.values();
      const auto anchor = term.anchor.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * term.weight * (theta[i] - anchor[i]);
    }
    return value;
  }
};

}  // namespace

LossEval evaluate_loss(const MlpModel& model, const LossSpec& spec) {
  LossEval out;
  out.grad = ParamVector(model.params().shapes());
  TermVisitor visitor{model, &out.grad};
  for (const auto& term : spec.terms) {
    const double v = std::visit(visitor, term);
    out.term_values.push_back(v);
    out.value += v;
  }
  return out;
}

double loss_value(const MlpModel& model, const LossSpec& spec) {
  TermVisitor visitor{model, nullptr};
  double total = 0.0;
  for (const auto& term : spec.terms) total += std::visit(visitor, term);
  return total;
}

ParamVector gradient(const MlpModel& model, const LossSpec& spec) {
  return evaluate_loss(model, spec).grad;
}

MlpModel sgd_step(const MlpModel& model, const ParamVector& grad, double eta) {
  if (!model.params().same_layout(grad)) throw InvalidInput("sgd_step: gradient layout mismatch");
  ParamVector next = model.params();
  simd::active().axpy(next.values().data(), -eta, grad.values().data(), next.size());
  return model.with_params(std::move(next));
}

ParamVector linear_combine(std::span<const WeightedParams> terms) {
  if (terms.empty()) throw InvalidInput("linear_combine: no terms");
  const auto& k = simd::active();
  const ParamVector& first = *terms.front().params;
  ParamVector out(first.shapes());
  k.scale(out.values().data(), terms.front().coefficient, first.values().data(), out.size());
  for (const auto& term : terms.subspan(1)) {
    if (!term.params->same_layout(first)) throw InvalidInput("linear_combine: layout mismatch");
    k.axpy(out.values().data(), term.coefficient, term.params->values().data(), out.size());
  }
  return out;
}

ParamVector linear_combine(std::initializer_list<WeightedParams> terms) {
  return linear_combine(std::span<const WeightedParams>(terms.begin(), terms.size()));
}

}  // namespace fedmix
