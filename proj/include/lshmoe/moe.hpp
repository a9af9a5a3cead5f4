// Copyright 2026 The LSH-MoE Simulator Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lshmoe/core.hpp"

namespace lshmoe {

enum class Activation { ReLU, GeLU, Identity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::GeLU: return "gelu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "gelu") return Activation::GeLU;
  if (s == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

inline double activate(Activation a, double v) {
  switch (a) {
    case Activation::ReLU: return v > 0.0 ? v : 0.0;
    case Activation::GeLU: return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
    case Activation::Identity: return v;
  }
  return v;
}

/// Linear top-k router: scores = weights * x.
struct GateConfig {
  Matrix weights;  // N x d
  std::size_t k = 1;

  std::size_t num_experts() const { return weights.rows(); }
  std::size_t dim() const { return weights.cols(); }
};

/// Two-layer FFN expert mapping R^d -> R^d.
struct Expert {
  Matrix w1;  // d_ffn x d
  Vector b1;
  Matrix w2;  // d x d_ffn
  Vector b2;
  Activation activation = Activation::ReLU;

  std::size_t dim() const { return w1.cols(); }
  std::size_t ffn_dim() const { return w1.rows(); }

  void validate() const {
    if (w1.rows() == 0 || w1.cols() == 0) throw std::invalid_argument("Expert: empty W1");
    if (b1.size() != w1.rows()) throw std::invalid_argument("Expert: b1 length != d_ffn");
    if (w2.cols() != w1.rows()) throw std::invalid_argument("Expert: W2 width != d_ffn");
    if (b2.size() != w2.rows()) throw std::invalid_argument("Expert: b2 length != W2 rows");
  }

  /// Whether the output lives in the input space, which residual
  /// compensation needs.
  bool is_square() const { return w2.rows() == w1.cols(); }

  /// Multiply-adds of one forward pass, as flops.
  double flops() const {
    return 2.0 * static_cast<double>(w1.rows() * w1.cols() + w2.rows() * w2.cols());
  }
};

struct MoeLayer {
  GateConfig gate;
  std::vector<Expert> experts;

  std::size_t dim() const { return gate.dim(); }

  void validate() const {
    if (experts.size() != gate.num_experts()) {
      throw std::invalid_argument("MoeLayer: gate scores " + std::to_string(gate.num_experts()) +
                                  " experts but layer has " + std::to_string(experts.size()));
    }
    if (gate.k < 1 || gate.k > gate.num_experts()) {
      throw std::invalid_argument("MoeLayer: k=" + std::to_string(gate.k) + " outside [1, " +
                                  std::to_string(gate.num_experts()) + "]");
    }
    for (const Expert& e : experts) {
      e.validate();
      if (e.dim() != dim() || e.w2.rows() != dim()) {
        throw std::invalid_argument("MoeLayer: expert shape does not match gate dim " +
                                    std::to_string(dim()));
      }
    }
  }
};

/// The k highest-scoring experts (0-based), ascending. Equal scores prefer the
/// lower index.
inline std::vector<std::size_t> gate_topk(const GateConfig& gate, std::span<const double> x) {
  const std::size_t n = gate.num_experts();
  if (gate.k < 1 || gate.k > n) {
    throw std::invalid_argument("gate_topk: k=" + std::to_string(gate.k) + " outside [1, " +
                                std::to_string(n) + "]");
  }
  const Vector scores = matvec(gate.weights, x);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(gate.k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  order.resize(gate.k);
  std::sort(order.begin(), order.end());
  return order;
}

/// W2 act(W1 x + b1) + b2
inline Vector expert_forward(const Expert& e, std::span<const double> x) {
  if (x.size() != e.dim()) {
    throw std::invalid_argument("expert_forward: token length " + std::to_string(x.size()) +
                                ", expert input dim " + std::to_string(e.dim()));
  }
  Vector hidden = matvec(e.w1, x);
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] = activate(e.activation, hidden[i] + e.b1[i]);
  Vector out = matvec(e.w2, hidden);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += e.b2[i];
  return out;
}

/// Single-machine reference forward: each output row is the unweighted sum of
/// the gated experts' outputs, accumulated in ascending expert order.
inline TokenMatrix moe_forward_dense(const MoeLayer& layer, const TokenMatrix& x) {
  if (x.rows() == 0) throw std::invalid_argument("moe_forward_dense: empty token matrix");
  layer.validate();
  if (x.cols() != layer.dim()) {
    throw std::invalid_argument("moe_forward_dense: token width " + std::to_string(x.cols()) +
                                " != layer dim " + std::to_string(layer.dim()));
  }
  TokenMatrix y(x.rows(), layer.dim());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto dst = y.row(t);
    for (std::size_t e : gate_topk(layer.gate, x.row(t))) {
      const Vector out = expert_forward(layer.experts[e], x.row(t));
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += out[j];
    }
  }
  return y;
}

// Layer builders.

inline Expert make_random_expert(std::size_t d, std::size_t d_ffn, Activation act, Rng& rng) {
  Expert e;
  e.w1 = gaussian_matrix(d_ffn, d, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  e.b1.resize(d_ffn);
  for (double& v : e.b1) v = 0.1 * rng.normal();
  e.w2 = gaussian_matrix(d, d_ffn, rng, 1.0 / std::sqrt(static_cast<double>(d_ffn)));
  e.b2.resize(d);
  for (double& v : e.b2) v = 0.1 * rng.normal();
  e.activation = act;
  return e;
}

inline Expert make_identity_expert(std::size_t d) {
  return Expert{Matrix::identity(d), Vector(d, 0.0), Matrix::identity(d), Vector(d, 0.0),
                Activation::Identity};
}

/// E(x) = W x + b.
inline Expert make_affine_expert(Matrix w, Vector b) {
  const std::size_t d = w.cols();
  return Expert{std::move(w), std::move(b), Matrix::identity(d), Vector(d, 0.0),
                Activation::Identity};
}

inline GateConfig make_random_gate(std::size_t n_experts, std::size_t d, std::size_t k, Rng& rng) {
  return GateConfig{gaussian_matrix(n_experts, d, rng), k};
}

}  // namespace lshmoe
