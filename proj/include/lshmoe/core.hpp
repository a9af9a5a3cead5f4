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
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lshmoe {

/// Raised when a computed result breaks an invariant the library guarantees.
/// Distinct from std::invalid_argument, which signals bad caller input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Vector = std::vector<double>;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Mixes a master seed and a sub-stream label into an independent seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
  return detail::splitmix64(detail::splitmix64(seed) ^
                            detail::splitmix64(stream_id + 0x632be59bd9b4e019ULL));
}

/// Seeded random stream. std::mt19937_64 output is fixed by the standard;
/// uniform and normal draws are built on top of it here rather than with the
/// std distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), engine_(derive_seed(seed, stream_id)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) {
        throw std::invalid_argument("Matrix::from_rows: ragged rows");
      }
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  /// Appends a row; the first appended row fixes the column count of an
  /// empty matrix.
  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) {
      throw std::invalid_argument("Matrix::append_row: width mismatch");
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A group of n tokens, one d-dimensional activation per row.
using TokenMatrix = Matrix;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// y = M x
inline Vector matvec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) {
    throw std::invalid_argument("matvec: expected length " + std::to_string(m.cols()) +
                                ", got " + std::to_string(x.size()));
  }
  Vector y(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x);
  return y;
}

/// Largest absolute entrywise difference; shapes must agree.
inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) worst = std::max(worst, std::abs(da[i] - db[i]));
  return worst;
}

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = stddev * rng.normal();
  return m;
}

/// dim x dim orthogonal matrix from modified Gram-Schmidt over the rows of a
/// standard Gaussian matrix. A numerically dependent row (norm collapse) is
/// redrawn from the same stream, so the result stays deterministic.
inline Matrix random_orthogonal(std::size_t dim, Rng rng) {
  if (dim == 0) throw std::invalid_argument("random_orthogonal: dim must be >= 1");
  Matrix q = gaussian_matrix(dim, dim, rng);
  for (std::size_t i = 0; i < dim; ++i) {
    auto ri = q.row(i);
    for (;;) {
      // Two passes keep ||Q^T Q - I|| near machine precision for large dim.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < i; ++j) {
          const auto rj = q.row(j);
          const double proj = dot(rj, ri);
          for (std::size_t c = 0; c < dim; ++c) ri[c] -= proj * rj[c];
        }
      }
      const double n = norm2(ri);
      if (n > 1e-8) {
        for (double& v : ri) v /= n;
        break;
      }
      for (double& v : ri) v = rng.normal();
    }
  }
  return q;
}

struct TokenGenSpec {
  std::size_t n_tokens = 0;
  std::size_t dim = 0;
  std::size_t n_components = 1;
  /// Within-component standard deviation.
  double spread = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 1) throw std::invalid_argument("TokenGenSpec: dim must be >= 1");
    if (n_components < 1) throw std::invalid_argument("TokenGenSpec: n_components must be >= 1");
    if (!(spread >= 0.0) || !std::isfinite(spread)) {
      throw std::invalid_argument("TokenGenSpec: spread must be finite and >= 0");
    }
  }
};

/// Gaussian-mixture surrogate for clustered activations: component centres
/// uniform on the unit sphere, token i drawn from component i mod
/// n_components with isotropic noise of stddev `spread`.
inline TokenMatrix gen_tokens(const TokenGenSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, 0);
  Matrix centres(spec.n_components, spec.dim);
  for (std::size_t c = 0; c < spec.n_components; ++c) {
    auto row = centres.row(c);
    double n = 0.0;
    while (n < 1e-12) {
      for (double& v : row) v = rng.normal();
      n = norm2(row);
    }
    for (double& v : row) v /= n;
  }
  TokenMatrix tokens(spec.n_tokens, spec.dim);
  for (std::size_t i = 0; i < spec.n_tokens; ++i) {
    const auto centre = centres.row(i % spec.n_components);
    auto row = tokens.row(i);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      row[j] = spec.spread > 0.0 ? centre[j] + spec.spread * rng.normal() : centre[j];
    }
  }
  return tokens;
}

}  // namespace lshmoe
