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
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "lshmoe/core.hpp"
#include "lshmoe/lsh.hpp"
#include "lshmoe/moe.hpp"

namespace lshmoe {

/// w workers, each hosting a contiguous block of experts: worker i owns
/// experts [i*e, (i+1)*e).
struct ClusterTopology {
  std::size_t workers = 1;
  std::size_t experts_per_worker = 1;
  double intra_bytes_per_s = 1.5e11;
  double inter_bytes_per_s = 1.25e10;
  std::size_t wire_bytes_per_element = 2;

  std::size_t num_experts() const { return workers * experts_per_worker; }
  std::size_t worker_of_expert(std::size_t e) const { return e / experts_per_worker; }

  /// Tokens are split over workers in contiguous, balanced blocks.
  std::size_t worker_of_token(std::size_t t, std::size_t n_tokens) const {
    return t * workers / n_tokens;
  }

  void validate() const {
    if (workers < 1) throw std::invalid_argument("ClusterTopology: workers must be >= 1");
    if (experts_per_worker < 1) {
      throw std::invalid_argument("ClusterTopology: experts_per_worker must be >= 1");
    }
    if (!(intra_bytes_per_s > 0.0) || !(inter_bytes_per_s > 0.0)) {
      throw std::invalid_argument("ClusterTopology: bandwidths must be > 0");
    }
    if (wire_bytes_per_element < 1) {
      throw std::invalid_argument("ClusterTopology: wire_bytes_per_element must be >= 1");
    }
  }

  void validate_for(const MoeLayer& layer) const {
    validate();
    if (num_experts() != layer.experts.size()) {
      throw std::invalid_argument("ClusterTopology: " + std::to_string(workers) + " workers x " +
                                  std::to_string(experts_per_worker) + " experts != " +
                                  std::to_string(layer.experts.size()) + " layer experts");
    }
  }
};

/// Traffic of one all-to-all exchange.
struct CommRecord {
  /// send_counts[src][dst]: rows moved from src to dst.
  std::vector<std::vector<std::size_t>> send_counts;
  std::uint64_t bytes_intra = 0;
  std::uint64_t bytes_inter = 0;
  double modeled_time_s = 0.0;

  std::uint64_t total_bytes() const { return bytes_intra + bytes_inter; }

  std::size_t total_rows() const {
    std::size_t s = 0;
    for (const auto& r : send_counts)
      for (std::size_t c : r) s += c;
    return s;
  }
};

/// A run of consecutive payload rows that belong to one expert.
struct Segment {
  std::size_t expert = 0;
  std::size_t rows = 0;
};

struct SendBuffer {
  std::size_t src = 0;
  std::size_t dst = 0;
  Matrix payload;
  std::vector<Segment> segments;
};

struct AllToAllResult {
  /// received[dst]: buffers addressed to dst, ordered by src; buffers of one
  /// (src, dst) pair keep their submission order.
  std::vector<std::vector<SendBuffer>> received;
  CommRecord record;
};

/// In-memory all-to-all with byte accounting: diagonal traffic is charged to
/// the intra-machine link, everything else to the inter-machine link.
inline AllToAllResult all_to_all(std::vector<SendBuffer> buffers, const ClusterTopology& topo) {
  topo.validate();
  const std::size_t w = topo.workers;
  AllToAllResult res;
  res.received.resize(w);
  res.record.send_counts.assign(w, std::vector<std::size_t>(w, 0));
  std::size_t width = 0;
  for (const SendBuffer& b : buffers) {
    if (b.src >= w || b.dst >= w) {
      throw std::invalid_argument("all_to_all: buffer " + std::to_string(b.src) + "->" +
                                  std::to_string(b.dst) + " outside " + std::to_string(w) +
                                  " workers");
    }
    if (b.payload.rows() > 0) {
      if (width != 0 && b.payload.cols() != width) {
        throw std::invalid_argument("all_to_all: buffers disagree on row width");
      }
      width = b.payload.cols();
    }
  }
  std::stable_sort(buffers.begin(), buffers.end(), [](const SendBuffer& a, const SendBuffer& b) {
    return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
  });
  for (SendBuffer& b : buffers) {
    const std::uint64_t bytes = static_cast<std::uint64_t>(b.payload.rows()) *
                                b.payload.cols() * topo.wire_bytes_per_element;
    res.record.send_counts[b.src][b.dst] += b.payload.rows();
    (b.src == b.dst ? res.record.bytes_intra : res.record.bytes_inter) += bytes;
    res.received[b.dst].push_back(std::move(b));
  }
  res.record.modeled_time_s = static_cast<double>(res.record.bytes_intra) / topo.intra_bytes_per_s +
                              static_cast<double>(res.record.bytes_inter) / topo.inter_bytes_per_s;
  return res;
}

/// Where one of a token's k routes landed: the expert and the row of X_e.
struct RouteSlot {
  std::size_t expert = 0;
  std::size_t position = 0;
};

struct Dispatch {
  /// routes[t]: the k experts of token t, ascending.
  std::vector<std::vector<std::size_t>> routes;
  /// expert_tokens[e]: token indices routed to e (X_e), in token order.
  std::vector<std::vector<std::size_t>> expert_tokens;
  /// reverse[t][slot]: inverse of expert_tokens, one entry per route.
  std::vector<std::vector<RouteSlot>> reverse;

  std::size_t routed() const {
    std::size_t s = 0;
    for (const auto& g : expert_tokens) s += g.size();
    return s;
  }
};

inline Dispatch dispatch(const TokenMatrix& x, const MoeLayer& layer, const ClusterTopology& topo) {
  if (x.rows() == 0) throw std::invalid_argument("dispatch: empty token matrix");
  layer.validate();
  topo.validate_for(layer);
  if (x.cols() != layer.dim()) {
    throw std::invalid_argument("dispatch: token width " + std::to_string(x.cols()) +
                                " != layer dim " + std::to_string(layer.dim()));
  }
  Dispatch d;
  d.routes.resize(x.rows());
  d.reverse.resize(x.rows());
  d.expert_tokens.resize(layer.experts.size());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    d.routes[t] = gate_topk(layer.gate, x.row(t));
    for (std::size_t e : d.routes[t]) {
      d.reverse[t].push_back({e, d.expert_tokens[e].size()});
      d.expert_tokens[e].push_back(t);
    }
  }
  return d;
}

/// Runs fn(i) for i in [0, count) on up to `threads` threads. Each index must
/// write only its own outputs; the first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t tid = 0; tid < threads; ++tid) {
    pool.emplace_back([&, tid] {
      try {
        for (std::size_t i = tid; i < count; i += threads) fn(i);
      } catch (...) {
        errors[tid] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ExecOptions {
  /// Parallelism hint. Results are identical for every value.
  std::size_t threads = 1;
};

struct StepMetrics {
  CommRecord dispatch;
  CommRecord combine;
  /// Rows sent over routed token-expert pairs; 1 on the uncompressed path.
  double compression_ratio = 1.0;
  double lsh_overhead_flops = 0.0;
  /// Expert forward flops over all processed rows.
  double expert_flops = 0.0;
  std::size_t routed_tokens = 0;
  TokenMatrix output;
};

namespace detail {

/// Tokens of one source worker routed to one expert, plus what crosses the wire
/// for them.
struct Group {
  std::size_t src = 0;
  std::size_t expert = 0;
  std::vector<std::size_t> tokens;
  std::optional<Clustering> clustering;
  Matrix payload;
  Matrix outputs;
};

inline StepMetrics run_step(const TokenMatrix& x, const MoeLayer& layer,
                            const ClusterTopology& topo, const LshHasher* hasher,
                            const ExecOptions& opts) {
  const Dispatch route = dispatch(x, layer, topo);
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const std::size_t w = topo.workers;
  const std::size_t n_experts = layer.experts.size();

  // Groups ordered by (src, expert); X_e is in token order and token blocks are
  // contiguous per worker, so each group is a contiguous slice of X_e.
  std::vector<Group> groups(w * n_experts);
  std::vector<std::size_t> slice_start(w * n_experts, 0);
  for (std::size_t e = 0; e < n_experts; ++e) {
    const auto& xe = route.expert_tokens[e];
    for (std::size_t pos = 0; pos < xe.size(); ++pos) {
      const std::size_t s = topo.worker_of_token(xe[pos], n);
      Group& g = groups[s * n_experts + e];
      if (g.tokens.empty()) slice_start[s * n_experts + e] = pos;
      g.tokens.push_back(xe[pos]);
    }
  }
  for (std::size_t s = 0; s < w; ++s)
    for (std::size_t e = 0; e < n_experts; ++e) {
      groups[s * n_experts + e].src = s;
      groups[s * n_experts + e].expert = e;
    }

  // Source side: build what each group transmits.
  parallel_for(groups.size(), opts.threads, [&](std::size_t gi) {
    Group& g = groups[gi];
    if (g.tokens.empty()) {
      g.payload = Matrix(0, d);
      return;
    }
    Matrix rows(g.tokens.size(), d);
    for (std::size_t i = 0; i < g.tokens.size(); ++i) {
      const auto src = x.row(g.tokens[i]);
      std::copy(src.begin(), src.end(), rows.row(i).begin());
    }
    if (hasher != nullptr) {
      g.clustering = cluster(rows, *hasher);
      g.payload = g.clustering->centroids;
    } else {
      g.payload = std::move(rows);
    }
  });

  auto pack = [&](bool forward) {
    std::vector<SendBuffer> buffers;
    for (std::size_t s = 0; s < w; ++s) {
      for (std::size_t dst = 0; dst < w; ++dst) {
        SendBuffer b;
        b.src = forward ? s : dst;
        b.dst = forward ? dst : s;
        b.payload = Matrix(0, d);
        for (std::size_t e = dst * topo.experts_per_worker;
             e < (dst + 1) * topo.experts_per_worker; ++e) {
          const Group& g = groups[s * n_experts + e];
          const Matrix& m = forward ? g.payload : g.outputs;
          for (std::size_t r = 0; r < m.rows(); ++r) b.payload.append_row(m.row(r));
          b.segments.push_back({e, m.rows()});
        }
        buffers.push_back(std::move(b));
      }
    }
    return buffers;
  };

  AllToAllResult sent = all_to_all(pack(true), topo);

  // Expert side: each received segment is processed by its expert.
  struct Work {
    const SendBuffer* buffer;
    std::size_t offset;
    Segment seg;
  };
  std::vector<Work> work;
  for (const auto& inbox : sent.received)
    for (const SendBuffer& b : inbox) {
      std::size_t off = 0;
      for (const Segment& seg : b.segments) {
        if (topo.worker_of_expert(seg.expert) != b.dst) {
          throw InvariantError("all_to_all delivered expert " + std::to_string(seg.expert) +
                               " rows to worker " + std::to_string(b.dst));
        }
        work.push_back({&b, off, seg});
        off += seg.rows;
      }
    }
  parallel_for(work.size(), opts.threads, [&](std::size_t wi) {
    const Work& job = work[wi];
    Group& g = groups[job.buffer->src * n_experts + job.seg.expert];
    g.outputs = Matrix(job.seg.rows, d);
    const Expert& expert = layer.experts[job.seg.expert];
    for (std::size_t r = 0; r < job.seg.rows; ++r) {
      const Vector out = expert_forward(expert, job.buffer->payload.row(job.offset + r));
      std::copy(out.begin(), out.end(), g.outputs.row(r).begin());
    }
  });

  AllToAllResult returned = all_to_all(pack(false), topo);
  std::vector<Matrix> received_outputs(groups.size());
  for (const auto& inbox : returned.received)
    for (const SendBuffer& b : inbox) {
      std::size_t off = 0;
      for (const Segment& seg : b.segments) {
        Matrix& out = received_outputs[b.dst * n_experts + seg.expert];
        out = Matrix(seg.rows, d);
        for (std::size_t r = 0; r < seg.rows; ++r) {
          const auto row = b.payload.row(off + r);
          std::copy(row.begin(), row.end(), out.row(r).begin());
        }
        off += seg.rows;
      }
    }

  // Source side: per-token results, then residual compensation when clustered.
  std::vector<Matrix> token_outputs(groups.size());
  parallel_for(groups.size(), opts.threads, [&](std::size_t gi) {
    Group& g = groups[gi];
    if (g.tokens.empty()) return;
    if (received_outputs[gi].rows() != g.payload.rows()) {
      throw InvariantError("group received " + std::to_string(received_outputs[gi].rows()) +
                           " outputs for " + std::to_string(g.payload.rows()) + " sent rows");
    }
    token_outputs[gi] = g.clustering ? reconstruct(received_outputs[gi], *g.clustering)
                                     : std::move(received_outputs[gi]);
  });

  StepMetrics m;
  m.output = TokenMatrix(n, d);
  parallel_for(n, opts.threads, [&](std::size_t t) {
    const std::size_t s = topo.worker_of_token(t, n);
    auto dst = m.output.row(t);
    for (const RouteSlot& slot : route.reverse[t]) {
      const std::size_t gi = s * n_experts + slot.expert;
      const auto contrib = token_outputs[gi].row(slot.position - slice_start[gi]);
      for (std::size_t j = 0; j < d; ++j) dst[j] += contrib[j];
    }
  });

  m.dispatch = std::move(sent.record);
  m.combine = std::move(returned.record);
  m.routed_tokens = route.routed();
  const std::size_t transmitted = m.dispatch.total_rows();
  m.compression_ratio =
      static_cast<double>(transmitted) / static_cast<double>(m.routed_tokens);
  for (const Group& g : groups) m.expert_flops += layer.experts[g.expert].flops() * g.payload.rows();
  if (hasher != nullptr) {
    m.lsh_overhead_flops = hasher->flops_per_token() * static_cast<double>(m.routed_tokens);
  }
  if (m.dispatch.total_rows() != m.combine.total_rows()) {
    throw InvariantError("dispatch and combine moved different row counts");
  }
  return m;
}

}  // namespace detail

/// Uncompressed expert-parallel step: dispatch, all-to-all, expert compute,
/// all-to-all back, sum of the k contributions per token.
inline StepMetrics step_baseline(const TokenMatrix& x, const MoeLayer& layer,
                                 const ClusterTopology& topo, const ExecOptions& opts = {}) {
  return detail::run_step(x, layer, topo, nullptr, opts);
}

/// LSH-compressed step. Every (source worker, expert) group is clustered
/// locally, only centroids travel, and each token's result is the expert
/// output of its centroid plus its residual.
inline StepMetrics step_lsh(const TokenMatrix& x, const MoeLayer& layer,
                            const ClusterTopology& topo, const HashFamilyConfig& cfg,
                            const ExecOptions& opts = {}) {
  for (std::size_t e = 0; e < layer.experts.size(); ++e) {
    if (!layer.experts[e].is_square()) {
      throw std::invalid_argument("step_lsh: expert " + std::to_string(e) +
                                  " does not map back into token space");
    }
  }
  if (cfg.dim != x.cols()) {
    throw std::invalid_argument("step_lsh: hash dim " + std::to_string(cfg.dim) +
                                " != token width " + std::to_string(x.cols()));
  }
  const LshHasher hasher(cfg);
  return detail::run_step(x, layer, topo, &hasher, opts);
}

}  // namespace lshmoe
