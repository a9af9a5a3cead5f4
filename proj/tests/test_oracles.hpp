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

// Reference computations used only by tests. They avoid the library's fast
// paths: keys are compared pairwise, experts are evaluated entry by entry.

#include <cmath>
#include <cstddef>
#include <vector>

#include "lshmoe/core.hpp"
#include "lshmoe/lsh.hpp"
#include "lshmoe/moe.hpp"

namespace lshmoe::oracle {

/// Groups of token indices with equal keys, via O(n^2) pairwise comparison.
/// Groups are ordered by their smallest member.
inline std::vector<std::vector<std::size_t>> group_by_equal_keys(const std::vector<BucketKey>& keys) {
  const std::size_t n = keys.size();
  std::vector<long> owner(n, -1);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] >= 0) continue;
    owner[i] = static_cast<long>(groups.size());
    groups.push_back({i});
    for (std::size_t j = i + 1; j < n; ++j) {
      if (owner[j] < 0 && keys[j] == keys[i]) {
        owner[j] = owner[i];
        groups.back().push_back(j);
      }
    }
  }
  return groups;
}

/// Keys computed one hash function at a time from freshly built rotations.
inline std::vector<BucketKey> brute_force_keys(const TokenMatrix& x, const HashFamilyConfig& cfg) {
  std::vector<BucketKey> keys(x.rows());
  for (std::size_t j = 0; j < cfg.q; ++j) {
    if (cfg.family == HashFamily::CrossPolytope) {
      const Matrix r = random_orthogonal(cfg.dim, Rng(cfg.seed, j));
      for (std::size_t t = 0; t < x.rows(); ++t) {
        // argmax_i |(Rx)_i| with explicit loops.
        double best = -1.0;
        int idx = 0;
        for (std::size_t i = 0; i < cfg.dim; ++i) {
          double v = 0.0;
          for (std::size_t c = 0; c < cfg.dim; ++c) v += r(i, c) * x(t, c);
          if (std::abs(v) > best) {
            best = std::abs(v);
            idx = v < 0 ? -static_cast<int>(i + 1) : static_cast<int>(i + 1);
          }
        }
        keys[t].push_back(idx);
      }
    } else {
      Rng rng(cfg.seed, j);
      Vector normal(cfg.dim);
      double n = 0.0;
      while (n < 1e-12) {
        for (double& v : normal) v = rng.normal();
        n = norm2(normal);
      }
      for (std::size_t t = 0; t < x.rows(); ++t) {
        double s = 0.0;
        for (std::size_t c = 0; c < cfg.dim; ++c) s += normal[c] / n * x(t, c);
        keys[t].push_back(s >= 0.0 ? 1 : 0);
      }
    }
  }
  return keys;
}

/// Two-layer expert evaluated with plain index loops.
inline Vector expert(const Expert& e, const Vector& x) {
  const std::size_t d = e.w1.cols(), f = e.w1.rows();
  Vector h(f);
  for (std::size_t i = 0; i < f; ++i) {
    double acc = e.b1[i];
    for (std::size_t j = 0; j < d; ++j) acc += e.w1(i, j) * x[j];
    switch (e.activation) {
      case Activation::ReLU: h[i] = std::max(0.0, acc); break;
      case Activation::GeLU: h[i] = 0.5 * acc * (1.0 + std::erf(acc / std::sqrt(2.0))); break;
      case Activation::Identity: h[i] = acc; break;
    }
  }
  Vector y(e.w2.rows());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double acc = e.b2[i];
    for (std::size_t j = 0; j < f; ++j) acc += e.w2(i, j) * h[j];
    y[i] = acc;
  }
  return y;
}

/// Top-k by repeated selection of the best remaining score.
inline std::vector<std::size_t> topk(const GateConfig& g, const Vector& x) {
  const std::size_t n = g.weights.rows();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < x.size(); ++j) score[i] += g.weights(i, j) * x[j];
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < g.k; ++r) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i] && (best == n || score[i] > score[best])) best = i;
    taken[best] = true;
    out.push_back(best);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lshmoe::oracle
