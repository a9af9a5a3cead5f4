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

// Experiment configuration, orchestration and report rendering behind the
// lshmoe command line tool.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lshmoe/core.hpp"
#include "lshmoe/cost_model.hpp"
#include "lshmoe/expert_parallel.hpp"
#include "lshmoe/lsh.hpp"
#include "lshmoe/moe.hpp"

namespace lshmoe {

inline constexpr int kConfigSchemaVersion = 1;

/// Fixed sub-stream labels under the master seed.
namespace streams {
inline constexpr std::uint64_t kTokens = 1;
inline constexpr std::uint64_t kGate = 2;
inline constexpr std::uint64_t kExperts = 3;
inline constexpr std::uint64_t kLsh = 4;
}  // namespace streams

/// Invalid configuration, located at a line of the source document (0 when
/// no line applies).
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& source, int line, const std::string& msg)
      : std::invalid_argument(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class ExpertKind { Random, Identity, Affine };

inline std::string_view to_string(ExpertKind k) {
  switch (k) {
    case ExpertKind::Random: return "random";
    case ExpertKind::Identity: return "identity";
    case ExpertKind::Affine: return "affine";
  }
  return "?";
}

struct ModelShape {
  std::size_t n_experts = 8;
  std::size_t k = 2;
  std::size_t d = 64;
  std::size_t d_ffn = 128;
  Activation activation = Activation::ReLU;
  ExpertKind experts = ExpertKind::Random;
};

struct TokenSection {
  std::size_t n_tokens = 4096;
  std::size_t n_components = 20;
  double spread = 0.05;
};

struct LshSection {
  HashFamily family = HashFamily::CrossPolytope;
  std::size_t q = 6;
};

struct ComputeSection {
  double peak_flops = 125e12;
  double utilization = 0.5;
  double effective_flops() const { return peak_flops * utilization; }
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<TokenSection> tokens;
  std::optional<ModelShape> model;
  std::optional<ClusterTopology> topology;
  std::optional<LshSection> lsh;
  ComputeSection compute;
  /// Already converted to elements/s.
  std::optional<CostParams> cost_model;
  std::optional<std::string> output;

  TokenGenSpec token_spec() const {
    return TokenGenSpec{tokens->n_tokens, model->d, tokens->n_components, tokens->spread,
                        derive_seed(seed, streams::kTokens)};
  }

  HashFamilyConfig hash_config(HashFamily family, std::size_t q) const {
    return HashFamilyConfig{family, q, model->d, derive_seed(seed, streams::kLsh)};
  }
};

namespace detail {

/// Line of the last key of `path`, searching each key after the previous one.
inline int locate_line(std::string_view text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const std::string& key : path) {
    const std::size_t found = text.find("\"" + key + "\"", pos);
    if (found == std::string_view::npos) break;
    pos = found;
  }
  int line = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

class SectionReader {
 public:
  SectionReader(const nlohmann::json& obj, std::vector<std::string> path, std::string_view text,
                const std::string& source)
      : obj_(obj), path_(std::move(path)), text_(text), source_(source) {
    if (!obj_.is_object()) fail({}, "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::vector<std::string> p = path_;
    if (!key.empty()) p.push_back(key);
    std::string where;
    for (const auto& s : p) where += "/" + s;
    throw ConfigError(source_, locate_line(text_, p), (where.empty() ? "" : where + ": ") + msg);
  }

  void reject_unknown(std::initializer_list<std::string_view> known) const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      bool ok = false;
      for (auto k : known) ok = ok || it.key() == k;
      if (!ok) fail(it.key(), "unknown key");
    }
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const nlohmann::json& raw(const std::string& key) const { return obj_.at(key); }

  std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback = {},
                      std::uint64_t min = 1) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail(key, "missing required key");
    }
    const auto& v = obj_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(key, "expected a non-negative integer");
    }
    const auto u = v.get<std::uint64_t>();
    if (u < min) fail(key, "must be >= " + std::to_string(min));
    return u;
  }

  double real(const std::string& key, std::optional<double> fallback = {}) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail(key, "missing required key");
    }
    const auto& v = obj_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "expected a finite number");
    return d;
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = {}) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail(key, "missing required key");
    }
    const auto& v = obj_.at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  SectionReader section(const std::string& key) const {
    auto p = path_;
    p.push_back(key);
    return SectionReader(obj_.at(key), p, text_, source_);
  }

 private:
  const nlohmann::json& obj_;
  std::vector<std::string> path_;
  std::string_view text_;
  const std::string& source_;
};

}  // namespace detail

/// Parses and validates a JSON experiment document. Unknown keys are errors.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "config") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError(source, line, std::string("malformed JSON: ") + e.what());
  }
  detail::SectionReader top(doc, {}, text, source);
  top.reject_unknown({"schema_version", "seed", "tokens", "model", "topology", "lsh", "compute",
                      "cost_model", "output"});
  const auto version = top.count("schema_version");
  if (version != static_cast<std::uint64_t>(kConfigSchemaVersion)) {
    top.fail("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                   std::to_string(kConfigSchemaVersion) + ")");
  }

  ExperimentConfig cfg;
  cfg.seed = top.count("seed", 0, 0);
  if (top.has("output")) cfg.output = top.text("output");

  if (top.has("model")) {
    auto s = top.section("model");
    s.reject_unknown({"n_experts", "k", "d", "d_ffn", "activation", "experts"});
    ModelShape m;
    m.n_experts = s.count("n_experts");
    m.k = s.count("k");
    m.d = s.count("d");
    m.d_ffn = s.count("d_ffn", m.d);
    if (m.k > m.n_experts) s.fail("k", "k=" + std::to_string(m.k) + " exceeds n_experts");
    try {
      m.activation = parse_activation(s.text("activation", "relu"));
    } catch (const std::invalid_argument& e) {
      s.fail("activation", e.what());
    }
    const std::string kind = s.text("experts", "random");
    if (kind == "random") m.experts = ExpertKind::Random;
    else if (kind == "identity") m.experts = ExpertKind::Identity;
    else if (kind == "affine") m.experts = ExpertKind::Affine;
    else s.fail("experts", "unknown expert kind '" + kind + "' (random, identity, affine)");
    cfg.model = m;
  }

  if (top.has("tokens")) {
    auto s = top.section("tokens");
    s.reject_unknown({"n_tokens", "n_components", "spread", "dim"});
    TokenSection t;
    t.n_tokens = s.count("n_tokens");
    t.n_components = s.count("n_components", 1);
    t.spread = s.real("spread", 0.0);
    if (t.spread < 0.0) s.fail("spread", "must be >= 0");
    if (s.has("dim")) {
      const auto dim = s.count("dim");
      if (!cfg.model || dim != cfg.model->d) {
        s.fail("dim", "token dim " + std::to_string(dim) + " does not match model d");
      }
    }
    cfg.tokens = t;
  }

  if (top.has("topology")) {
    auto s = top.section("topology");
    s.reject_unknown({"workers", "intra_bandwidth_bytes_per_s", "inter_bandwidth_bytes_per_s",
                      "wire_bytes_per_element"});
    ClusterTopology topo;
    topo.workers = s.count("workers");
    topo.intra_bytes_per_s = s.real("intra_bandwidth_bytes_per_s", topo.intra_bytes_per_s);
    topo.inter_bytes_per_s = s.real("inter_bandwidth_bytes_per_s", topo.inter_bytes_per_s);
    topo.wire_bytes_per_element = s.count("wire_bytes_per_element", 2);
    if (!(topo.intra_bytes_per_s > 0)) s.fail("intra_bandwidth_bytes_per_s", "must be > 0");
    if (!(topo.inter_bytes_per_s > 0)) s.fail("inter_bandwidth_bytes_per_s", "must be > 0");
    if (cfg.model) {
      if (cfg.model->n_experts % topo.workers != 0) {
        s.fail("workers", std::to_string(cfg.model->n_experts) + " experts cannot be split over " +
                              std::to_string(topo.workers) + " workers");
      }
      topo.experts_per_worker = cfg.model->n_experts / topo.workers;
    }
    cfg.topology = topo;
  }

  if (top.has("lsh")) {
    auto s = top.section("lsh");
    s.reject_unknown({"family", "q"});
    LshSection l;
    try {
      l.family = parse_hash_family(s.text("family", "cp"));
    } catch (const std::invalid_argument& e) {
      s.fail("family", e.what());
    }
    l.q = s.count("q");
    cfg.lsh = l;
  }

  if (top.has("compute")) {
    auto s = top.section("compute");
    s.reject_unknown({"peak_flops", "utilization"});
    cfg.compute.peak_flops = s.real("peak_flops", cfg.compute.peak_flops);
    cfg.compute.utilization = s.real("utilization", cfg.compute.utilization);
    if (!(cfg.compute.peak_flops > 0)) s.fail("peak_flops", "must be > 0");
    if (!(cfg.compute.utilization > 0 && cfg.compute.utilization <= 1)) {
      s.fail("utilization", "must be in (0, 1]");
    }
  }

  if (top.has("cost_model")) {
    auto s = top.section("cost_model");
    s.reject_unknown({"n", "k", "h", "l", "w", "intra_bandwidth_bytes_per_s",
                      "inter_bandwidth_bytes_per_s", "wire_bytes_per_element", "peak_flops",
                      "utilization"});
    CostParams p;
    p.n = s.real("n");
    p.k = s.real("k");
    p.h = s.real("h");
    p.l = s.real("l");
    p.w = s.real("w");
    const double wire = static_cast<double>(s.count("wire_bytes_per_element", 2));
    p.intra_elems_per_s = s.real("intra_bandwidth_bytes_per_s", 1.5e11) / wire;
    p.inter_elems_per_s = s.real("inter_bandwidth_bytes_per_s", 1.25e10) / wire;
    const double peak = s.real("peak_flops", cfg.compute.peak_flops);
    const double util = s.real("utilization", cfg.compute.utilization);
    if (!(util > 0 && util <= 1)) s.fail("utilization", "must be in (0, 1]");
    p.flops = peak * util;
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      s.fail("", e.what());
    }
    cfg.cost_model = p;
  }
  return cfg;
}

/// Gate and experts drawn from the config's gate and expert sub-streams.
inline MoeLayer build_layer(const ExperimentConfig& cfg) {
  const ModelShape& m = *cfg.model;
  Rng gate_rng(cfg.seed, streams::kGate);
  Rng expert_rng(cfg.seed, streams::kExperts);
  MoeLayer layer;
  layer.gate = make_random_gate(m.n_experts, m.d, m.k, gate_rng);
  layer.experts.reserve(m.n_experts);
  for (std::size_t e = 0; e < m.n_experts; ++e) {
    switch (m.experts) {
      case ExpertKind::Random:
        layer.experts.push_back(make_random_expert(m.d, m.d_ffn, m.activation, expert_rng));
        break;
      case ExpertKind::Identity:
        layer.experts.push_back(make_identity_expert(m.d));
        break;
      case ExpertKind::Affine: {
        Matrix w = gaussian_matrix(m.d, m.d, expert_rng, 1.0 / std::sqrt(static_cast<double>(m.d)));
        Vector b(m.d);
        for (double& v : b) v = 0.1 * expert_rng.normal();
        layer.experts.push_back(make_affine_expert(std::move(w), std::move(b)));
        break;
      }
    }
  }
  return layer;
}

struct ReportRow {
  std::string mode;    // "baseline" or "lsh"
  std::string family;  // empty for baseline
  std::size_t q = 0;
  double compression_ratio = 1.0;
  double mean_l2_error_vs_baseline = 0.0;
  std::uint64_t dispatch_bytes = 0;
  std::uint64_t return_bytes = 0;
  double modeled_step_time_s = 0.0;
  double predicted_speedup = 1.0;
};

struct Report {
  std::vector<ReportRow> rows;
};

inline double mean_l2_error(const TokenMatrix& a, const TokenMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("mean_l2_error: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < a.rows(); ++t) {
    double sq = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double diff = a(t, j) - b(t, j);
      sq += diff * diff;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(a.rows());
}

/// Step time of one forward layer: both exchanges plus expert and hashing
/// compute at the configured effective rate.
inline double modeled_step_time(const StepMetrics& m, const ComputeSection& compute) {
  return m.dispatch.modeled_time_s + m.combine.modeled_time_s +
         (m.expert_flops + m.lsh_overhead_flops) / compute.effective_flops();
}

namespace detail {

inline void require_sim_sections(const ExperimentConfig& cfg) {
  if (!cfg.model) throw ConfigError("config", 0, "missing section 'model'");
  if (!cfg.tokens) throw ConfigError("config", 0, "missing section 'tokens'");
  if (!cfg.topology) throw ConfigError("config", 0, "missing section 'topology'");
}

struct SimContext {
  TokenMatrix tokens;
  MoeLayer layer;
  StepMetrics baseline;
  ReportRow baseline_row;
};

inline SimContext prepare(const ExperimentConfig& cfg, const ExecOptions& opts) {
  require_sim_sections(cfg);
  SimContext ctx;
  ctx.tokens = gen_tokens(cfg.token_spec());
  ctx.layer = build_layer(cfg);
  ctx.baseline = step_baseline(ctx.tokens, ctx.layer, *cfg.topology, opts);
  if (ctx.baseline.compression_ratio != 1.0 || ctx.baseline.lsh_overhead_flops != 0.0) {
    throw InvariantError("baseline step reported compression");
  }
  ReportRow& row = ctx.baseline_row;
  row.mode = "baseline";
  row.dispatch_bytes = ctx.baseline.dispatch.total_bytes();
  row.return_bytes = ctx.baseline.combine.total_bytes();
  row.modeled_step_time_s = modeled_step_time(ctx.baseline, cfg.compute);
  return ctx;
}

inline ReportRow lsh_row(const ExperimentConfig& cfg, const SimContext& ctx, HashFamily family,
                         std::size_t q, const ExecOptions& opts) {
  const StepMetrics m =
      step_lsh(ctx.tokens, ctx.layer, *cfg.topology, cfg.hash_config(family, q), opts);
  ReportRow row;
  row.mode = "lsh";
  row.family = std::string(to_string(family));
  row.q = q;
  row.compression_ratio = m.compression_ratio;
  row.mean_l2_error_vs_baseline = mean_l2_error(m.output, ctx.baseline.output);
  row.dispatch_bytes = m.dispatch.total_bytes();
  row.return_bytes = m.combine.total_bytes();
  row.modeled_step_time_s = modeled_step_time(m, cfg.compute);

  // Transmitted bytes follow the centroid count exactly; any gap is a bug.
  const double expected = m.compression_ratio * static_cast<double>(ctx.baseline_row.dispatch_bytes);
  const double slack = static_cast<double>(cfg.model->d * cfg.topology->wire_bytes_per_element);
  if (std::abs(static_cast<double>(row.dispatch_bytes) - expected) > slack) {
    throw InvariantError("lsh dispatch bytes disagree with compression ratio");
  }
  if (!std::isfinite(row.mean_l2_error_vs_baseline)) {
    throw InvariantError("non-finite lsh output");
  }

  const double base_comm = ctx.baseline.dispatch.modeled_time_s + ctx.baseline.combine.modeled_time_s;
  SpeedupParams sp;
  sp.a2a_share = base_comm / ctx.baseline_row.modeled_step_time_s;
  sp.compression_ratio = m.compression_ratio;
  sp.overhead_share = (m.lsh_overhead_flops / cfg.compute.effective_flops()) / base_comm;
  if (sp.overhead_share > 1.0) {
    throw std::invalid_argument("hashing cost (" + std::to_string(sp.overhead_share) +
                                "x) exceeds the all-to-all time it is meant to save");
  }
  row.predicted_speedup = predict_speedup(sp);
  return row;
}

}  // namespace detail

/// Baseline row, then one lsh row when the config has an lsh section.
inline Report run_experiment(const ExperimentConfig& cfg, const ExecOptions& opts = {}) {
  const detail::SimContext ctx = detail::prepare(cfg, opts);
  Report report;
  report.rows.push_back(ctx.baseline_row);
  if (cfg.lsh) report.rows.push_back(detail::lsh_row(cfg, ctx, cfg.lsh->family, cfg.lsh->q, opts));
  return report;
}

/// One lsh row per (family, q), families outermost, in the order given.
inline Report sweep_hashes(const ExperimentConfig& cfg, const std::vector<std::size_t>& q_values,
                           const std::vector<HashFamily>& families, const ExecOptions& opts = {}) {
  if (q_values.empty()) throw std::invalid_argument("sweep_hashes: no q values");
  if (families.empty()) throw std::invalid_argument("sweep_hashes: no hash families");
  for (std::size_t q : q_values)
    if (q < 1) throw std::invalid_argument("sweep_hashes: q must be >= 1");
  const detail::SimContext ctx = detail::prepare(cfg, opts);
  Report report;
  for (HashFamily f : families) {
    std::optional<ReportRow> prev;
    for (std::size_t q : q_values) {
      ReportRow row = detail::lsh_row(cfg, ctx, f, q, opts);
      // Keys nest by prefix, so more functions can only split buckets.
      if (prev && q > prev->q && row.compression_ratio < prev->compression_ratio) {
        throw InvariantError("compression ratio decreased from q=" + std::to_string(prev->q) +
                             " to q=" + std::to_string(q));
      }
      prev = row;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

struct CostRow {
  std::string axis;  // "base" for the configured point
  std::optional<double> value;
  double ratio = 0;
  double share = 0;
  double t_all_to_all_exact_s = 0;
  double t_all_to_all_approx_s = 0;
  double t_compute_s = 0;
};

struct CostReport {
  std::vector<CostRow> rows;
};

struct SweepSpec {
  SweepAxis axis;
  std::vector<double> values;
};

/// Parses "w=2,4,8,16".
inline SweepSpec parse_sweep_spec(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw std::invalid_argument("sweep '" + std::string(text) + "': expected axis=v1,v2,...");
  }
  SweepSpec spec{parse_sweep_axis(text.substr(0, eq)), {}};
  std::string rest(text.substr(eq + 1));
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw std::invalid_argument("sweep '" + std::string(text) + "': bad value '" + item + "'");
    }
    spec.values.push_back(v);
  }
  if (spec.values.empty()) {
    throw std::invalid_argument("sweep '" + std::string(text) + "': no values");
  }
  return spec;
}

inline CostRow cost_row(const CostParams& p, std::string axis, std::optional<double> value) {
  CostRow row;
  row.axis = std::move(axis);
  row.value = value;
  row.ratio = ratio(p);
  row.share = a2a_share(row.ratio);
  row.t_all_to_all_exact_s = t_all_to_all(p, true);
  row.t_all_to_all_approx_s = t_all_to_all(p, false);
  row.t_compute_s = t_compute(p);
  return row;
}

inline CostReport cost_report(const CostParams& p, const std::vector<SweepSpec>& sweeps) {
  CostReport report;
  report.rows.push_back(cost_row(p, "base", std::nullopt));
  for (const SweepSpec& s : sweeps) {
    const auto rows = sweep(p, s.axis, s.values);  // validates the value list
    for (const SweepRow& r : rows) {
      report.rows.push_back(cost_row(with_axis(p, s.axis, r.value), std::string(to_string(s.axis)), r.value));
    }
  }
  return report;
}

// Rendering. Reals use 12 significant digits so reports diff cleanly.

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string to_csv(const Report& r) {
  std::string out =
      "mode,family,q,compression_ratio,mean_l2_error_vs_baseline,dispatch_bytes,return_bytes,"
      "modeled_step_time_s,predicted_speedup\n";
  for (const ReportRow& row : r.rows) {
    out += row.mode + "," + row.family + "," + std::to_string(row.q) + "," +
           format_real(row.compression_ratio) + "," + format_real(row.mean_l2_error_vs_baseline) +
           "," + std::to_string(row.dispatch_bytes) + "," + std::to_string(row.return_bytes) + "," +
           format_real(row.modeled_step_time_s) + "," + format_real(row.predicted_speedup) + "\n";
  }
  return out;
}

inline std::string to_json(const Report& r) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const ReportRow& row : r.rows) {
    rows.push_back({{"mode", row.mode},
                    {"family", row.family},
                    {"q", row.q},
                    {"compression_ratio", row.compression_ratio},
                    {"mean_l2_error_vs_baseline", row.mean_l2_error_vs_baseline},
                    {"dispatch_bytes", row.dispatch_bytes},
                    {"return_bytes", row.return_bytes},
                    {"modeled_step_time_s", row.modeled_step_time_s},
                    {"predicted_speedup", row.predicted_speedup}});
  }
  return nlohmann::ordered_json{{"rows", rows}}.dump(2) + "\n";
}

inline std::string to_csv(const CostReport& r) {
  std::string out = "axis,value,ratio,share,t_all_to_all_exact_s,t_all_to_all_approx_s,t_compute_s\n";
  for (const CostRow& row : r.rows) {
    out += row.axis + "," + (row.value ? format_real(*row.value) : "") + "," +
           format_real(row.ratio) + "," + format_real(row.share) + "," +
           format_real(row.t_all_to_all_exact_s) + "," + format_real(row.t_all_to_all_approx_s) +
           "," + format_real(row.t_compute_s) + "\n";
  }
  return out;
}

inline std::string to_json(const CostReport& r) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const CostRow& row : r.rows) {
    nlohmann::ordered_json j{{"axis", row.axis}};
    j["value"] = row.value ? nlohmann::ordered_json(*row.value) : nlohmann::ordered_json(nullptr);
    j["ratio"] = row.ratio;
    j["share"] = row.share;
    j["t_all_to_all_exact_s"] = row.t_all_to_all_exact_s;
    j["t_all_to_all_approx_s"] = row.t_all_to_all_approx_s;
    j["t_compute_s"] = row.t_compute_s;
    rows.push_back(std::move(j));
  }
  return nlohmann::ordered_json{{"rows", rows}}.dump(2) + "\n";
}

}  // namespace lshmoe
