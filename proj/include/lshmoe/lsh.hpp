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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lshmoe/core.hpp"

namespace lshmoe {

enum class HashFamily { CrossPolytope, SphericalPlane };

inline std::string_view to_string(HashFamily f) {
  return f == HashFamily::CrossPolytope ? "cp" : "sp";
}

inline HashFamily parse_hash_family(std::string_view s) {
  if (s == "cp" || s == "cross_polytope" || s == "CrossPolytope") return HashFamily::CrossPolytope;
  if (s == "sp" || s == "spherical_plane" || s == "SphericalPlane") return HashFamily::SphericalPlane;
  throw std::invalid_argument("unknown hash family '" + std::string(s) + "'");
}

struct HashFamilyConfig {
  HashFamily family = HashFamily::CrossPolytope;
  /// Number of hash functions concatenated into one bucket key.
  std::size_t q = 1;
  std::size_t dim = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (q < 1) throw std::invalid_argument("HashFamilyConfig: q must be >= 1");
    if (dim < 1) throw std::invalid_argument("HashFamilyConfig: dim must be >= 1");
  }
};

/// One signed 1-based axis index per cross-polytope function, or one bit per
/// hyperplane function.
using BucketKey = std::vector<std::int32_t>;

struct BucketKeyHash {
  std::size_t operator()(const BucketKey& key) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::int32_t v : key) {
      h ^= static_cast<std::uint32_t>(v);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Cross-polytope hash: index of the largest |(Rx)_i|, 1-based, carrying the
/// sign of that component. Ties go to the smallest index; a zero winner is
/// positive.
inline std::int32_t cp_hash(const Matrix& rotation, std::span<const double> x) {
  if (rotation.cols() != x.size() || rotation.rows() == 0) {
    throw std::invalid_argument("cp_hash: rotation is " + std::to_string(rotation.rows()) + "x" +
                                std::to_string(rotation.cols()) + ", token has length " +
                                std::to_string(x.size()));
  }
  std::size_t best = 0;
  double best_abs = -1.0;
  double best_val = 0.0;
  for (std::size_t i = 0; i < rotation.rows(); ++i) {
    const double v = dot(rotation.row(i), x);
    if (std::abs(v) > best_abs) {
      best = i;
      best_abs = std::abs(v);
      best_val = v;
    }
  }
  const auto idx = static_cast<std::int32_t>(best + 1);
  return best_val < 0.0 ? -idx : idx;
}

/// Hyperplane sign hash: bit b is 1 iff normals.row(b) . x >= 0.
inline BucketKey sp_hash(const Matrix& normals, std::span<const double> x) {
  if (normals.cols() != x.size()) {
    throw std::invalid_argument("sp_hash: normals have width " + std::to_string(normals.cols()) +
                                ", token has length " + std::to_string(x.size()));
  }
  BucketKey bits(normals.rows());
  for (std::size_t b = 0; b < normals.rows(); ++b) bits[b] = dot(normals.row(b), x) >= 0.0 ? 1 : 0;
  return bits;
}

/// Materialised hash functions for one HashFamilyConfig. Function j is drawn
/// from stream j of cfg.seed, so the first q functions of a (q+1)-function
/// hasher are exactly the functions of the q-function hasher.
class LshHasher {
 public:
  explicit LshHasher(const HashFamilyConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.family == HashFamily::CrossPolytope) {
      rotations_.reserve(cfg_.q);
      for (std::size_t j = 0; j < cfg_.q; ++j) {
        rotations_.push_back(random_orthogonal(cfg_.dim, Rng(cfg_.seed, j)));
      }
    } else {
      normals_ = Matrix(cfg_.q, cfg_.dim);
      for (std::size_t j = 0; j < cfg_.q; ++j) {
        Rng rng(cfg_.seed, j);
        auto row = normals_.row(j);
        double n = 0.0;
        while (n < 1e-12) {
          for (double& v : row) v = rng.normal();
          n = norm2(row);
        }
        for (double& v : row) v /= n;
      }
    }
  }

  const HashFamilyConfig& config() const { return cfg_; }

  BucketKey key(std::span<const double> x) const {
    if (x.size() != cfg_.dim) {
      throw std::invalid_argument("bucket_key: token length " + std::to_string(x.size()) +
                                  " does not match hash dim " + std::to_string(cfg_.dim));
    }
    if (cfg_.family == HashFamily::SphericalPlane) return sp_hash(normals_, x);
    BucketKey key(cfg_.q);
    for (std::size_t j = 0; j < cfg_.q; ++j) key[j] = cp_hash(rotations_[j], x);
    return key;
  }

  /// Multiply-adds spent hashing one token, counted as 2 flops each.
  double flops_per_token() const {
    const double d = static_cast<double>(cfg_.dim);
    const double q = static_cast<double>(cfg_.q);
    return cfg_.family == HashFamily::CrossPolytope ? q * d * (2.0 * d) : q * (2.0 * d);
  }

 private:
  HashFamilyConfig cfg_;
  std::vector<Matrix> rotations_;
  Matrix normals_;
};

inline BucketKey bucket_key(const HashFamilyConfig& cfg, std::span<const double> x) {
  return LshHasher(cfg).key(x);
}

/// Partition of a token group into LSH buckets. Buckets are numbered in order
/// of first appearance.
struct Clustering {
  std::vector<std::size_t> assignment;
  Matrix centroids;
  Matrix residuals;
  std::vector<std::size_t> bucket_sizes;
  std::vector<BucketKey> keys;

  std::size_t num_buckets() const { return bucket_sizes.size(); }
  std::size_t num_tokens() const { return assignment.size(); }
};

/// Groups tokens by equal composite key, then takes centroid = bucket mean
/// and residual = token - centroid.
inline Clustering cluster(const TokenMatrix& tokens, const LshHasher& hasher) {
  if (tokens.rows() == 0) throw std::invalid_argument("cluster: empty token group");
  if (tokens.cols() != hasher.config().dim) {
    throw std::invalid_argument("cluster: token width " + std::to_string(tokens.cols()) +
                                " does not match hash dim " +
                                std::to_string(hasher.config().dim));
  }
  const std::size_t n = tokens.rows();
  const std::size_t d = tokens.cols();

  Clustering c;
  c.assignment.resize(n);
  std::unordered_map<BucketKey, std::size_t, BucketKeyHash> index;
  for (std::size_t t = 0; t < n; ++t) {
    BucketKey key = hasher.key(tokens.row(t));
    auto [it, inserted] = index.try_emplace(key, c.keys.size());
    if (inserted) {
      c.keys.push_back(std::move(key));
      c.bucket_sizes.push_back(0);
    }
    c.assignment[t] = it->second;
    ++c.bucket_sizes[it->second];
  }

  // Mean taken as an offset from each bucket's first token, which keeps a
  // bucket of identical tokens exact.
  std::vector<std::size_t> first(c.num_buckets(), n);
  for (std::size_t t = n; t-- > 0;) first[c.assignment[t]] = t;
  Matrix offsets(c.num_buckets(), d);
  for (std::size_t t = 0; t < n; ++t) {
    auto acc = offsets.row(c.assignment[t]);
    const auto x = tokens.row(t);
    const auto x0 = tokens.row(first[c.assignment[t]]);
    for (std::size_t j = 0; j < d; ++j) acc[j] += x[j] - x0[j];
  }
  c.centroids = Matrix(c.num_buckets(), d);
  for (std::size_t b = 0; b < c.num_buckets(); ++b) {
    const double size = static_cast<double>(c.bucket_sizes[b]);
    const auto x0 = tokens.row(first[b]);
    auto ctr = c.centroids.row(b);
    for (std::size_t j = 0; j < d; ++j) ctr[j] = x0[j] + offsets(b, j) / size;
  }

  c.residuals = Matrix(n, d);
  for (std::size_t t = 0; t < n; ++t) {
    const auto x = tokens.row(t);
    const auto ctr = c.centroids.row(c.assignment[t]);
    auto r = c.residuals.row(t);
    for (std::size_t j = 0; j < d; ++j) r[j] = x[j] - ctr[j];
  }
  return c;
}

inline Clustering cluster(const TokenMatrix& tokens, const HashFamilyConfig& cfg) {
  if (tokens.rows() == 0) throw std::invalid_argument("cluster: empty token group");
  return cluster(tokens, LshHasher(cfg));
}

/// Buckets per token; 1.0 means no compression.
inline double compression_ratio(const Clustering& c) {
  if (c.num_tokens() == 0) throw std::invalid_argument("compression_ratio: empty clustering");
  return static_cast<double>(c.num_buckets()) / static_cast<double>(c.num_tokens());
}

/// Residual compensation: token t gets outputs(bucket(t)) + residual(t).
/// Outputs must live in the token space (square experts).
inline TokenMatrix reconstruct(const Matrix& centroid_outputs, const Clustering& c) {
  if (centroid_outputs.rows() != c.num_buckets()) {
    throw std::invalid_argument("reconstruct: got " + std::to_string(centroid_outputs.rows()) +
                                " centroid outputs for " + std::to_string(c.num_buckets()) +
                                " buckets");
  }
  if (centroid_outputs.cols() != c.residuals.cols()) {
    throw std::invalid_argument("reconstruct: output dim " +
                                std::to_string(centroid_outputs.cols()) +
                                " differs from token dim " + std::to_string(c.residuals.cols()));
  }
  const std::size_t d = c.residuals.cols();
  TokenMatrix y(c.num_tokens(), d);
  for (std::size_t t = 0; t < c.num_tokens(); ++t) {
    const auto out = centroid_outputs.row(c.assignment[t]);
    const auto r = c.residuals.row(t);
    auto dst = y.row(t);
    for (std::size_t j = 0; j < d; ++j) dst[j] = out[j] + r[j];
  }
  return y;
}

}  // namespace lshmoe
