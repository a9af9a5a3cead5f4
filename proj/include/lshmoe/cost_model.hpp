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

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lshmoe {

/// Inputs of the analytical step model. Bandwidths are in elements per
/// second; callers holding bytes/s divide by the wire element size first.
struct CostParams {
  double n = 0;  // tokens per GPU
  double k = 0;  // experts activated per token
  double h = 0;  // hidden size
  double l = 0;  // layers
  double w = 1;  // servers
  double intra_elems_per_s = 0;
  double inter_elems_per_s = 0;
  /// Effective compute rate, i.e. peak x utilization.
  double flops = 0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("CostParams: ") + name + " must be > 0");
      }
    };
    positive(n, "n");
    if (!(k >= 0.0) || !std::isfinite(k)) throw std::invalid_argument("CostParams: k must be >= 0");
    positive(h, "h");
    positive(l, "l");
    if (!(w >= 1.0) || !std::isfinite(w)) throw std::invalid_argument("CostParams: w must be >= 1");
    positive(intra_elems_per_s, "intra bandwidth");
    positive(inter_elems_per_s, "inter bandwidth");
    positive(flops, "flops");
  }

  /// Tokens exchanged between any two servers, m = n k / w.
  double tokens_per_peer() const { return n * k / w; }
};

/// All-to-all time of a full training step (two exchanges forward, two
/// backward, per layer). The approximate form drops the intra-machine term.
inline double t_all_to_all(const CostParams& p, bool exact) {
  p.validate();
  const double m = p.tokens_per_peer();
  const double inter = m * p.h * (p.w - 1.0) / p.inter_elems_per_s;
  if (!exact) return 4.0 * p.l * inter;
  return 4.0 * p.l * (m * p.h / p.intra_elems_per_s + inter);
}

/// Parameters touched per token: 4 (1 + 2k) l h^2.
inline double activated_params(const CostParams& p) {
  return 4.0 * (1.0 + 2.0 * p.k) * p.l * p.h * p.h;
}

/// 6 x tokens x activated params / flops = 24 (1 + 2k) n l h^2 / flops.
inline double t_compute(const CostParams& p) {
  p.validate();
  return 6.0 * p.n * activated_params(p) / p.flops;
}

/// T_all2all / T_compute in closed form:
/// flops / (6 B_inter) * k / (1 + 2k) * (w - 1) / (w h).
inline double ratio(const CostParams& p) {
  p.validate();
  return (p.flops / (6.0 * p.inter_elems_per_s)) * (p.k / (1.0 + 2.0 * p.k)) *
         ((p.w - 1.0) / (p.w * p.h));
}

/// Fraction of step time spent in all-to-all for a given comm/compute ratio.
inline double a2a_share(double comm_to_compute) {
  return comm_to_compute / (1.0 + comm_to_compute);
}

struct SpeedupParams {
  /// Share s of step time spent in all-to-all.
  double a2a_share = 0.0;
  /// Transmitted rows per routed token, r.
  double compression_ratio = 1.0;
  /// Clustering and reassembly cost, as a fraction of the original all-to-all time.
  double overhead_share = 0.0;

  void validate() const {
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument(std::string("SpeedupParams: ") + name + " must be in [0, 1]");
      }
    };
    unit(a2a_share, "a2a_share");
    unit(compression_ratio, "compression_ratio");
    unit(overhead_share, "overhead_share");
    if (!(a2a_share < 1.0)) throw std::invalid_argument("SpeedupParams: a2a_share must be < 1");
  }
};

/// Amdahl-style step speedup with no compute/communication overlap:
/// 1 / ((1 - s) + s (r + overhead)).
inline double predict_speedup(const SpeedupParams& sp) {
  sp.validate();
  const double denom =
      (1.0 - sp.a2a_share) + sp.a2a_share * (sp.compression_ratio + sp.overhead_share);
  if (!(denom > 0.0)) throw std::invalid_argument("predict_speedup: non-positive step time");
  return 1.0 / denom;
}

enum class SweepAxis { W, H, L, K };

inline SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "w") return SweepAxis::W;
  if (s == "h") return SweepAxis::H;
  if (s == "l") return SweepAxis::L;
  if (s == "k") return SweepAxis::K;
  throw std::invalid_argument("unknown sweep axis '" + std::string(s) + "' (expected w, h, l or k)");
}

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::W: return "w";
    case SweepAxis::H: return "h";
    case SweepAxis::L: return "l";
    case SweepAxis::K: return "k";
  }
  return "?";
}

inline CostParams with_axis(CostParams p, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::W: p.w = value; break;
    case SweepAxis::H: p.h = value; break;
    case SweepAxis::L: p.l = value; break;
    case SweepAxis::K: p.k = value; break;
  }
  return p;
}

struct SweepRow {
  double value = 0;
  double ratio = 0;
  double share = 0;
};

/// One row per value, in the order given.
inline std::vector<SweepRow> sweep(const CostParams& p, SweepAxis axis,
                                   const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("sweep: no values for axis " +
                                                  std::string(to_string(axis)));
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (double v : values) {
    const double r = ratio(with_axis(p, axis, v));
    rows.push_back({v, r, a2a_share(r)});
  }
  return rows;
}

}  // namespace lshmoe
