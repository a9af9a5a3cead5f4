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

#include <gtest/gtest.h>

#include <string>

#include "lshmoe/experiment.hpp"
#include "test_oracles.hpp"

namespace lshmoe {
namespace {

std::string sim_config(const std::string& extra_model = "", const std::string& lsh = "",
                       std::size_t n_tokens = 1024, double spread = 0.05, std::uint64_t seed = 7) {
  return R"({
  "schema_version": 1,
  "seed": )" + std::to_string(seed) + R"(,
  "model": {"n_experts": 8, "k": 2, "d": 32, "d_ffn": 64)" + extra_model + R"(},
  "tokens": {"n_tokens": )" + std::to_string(n_tokens) + R"(, "n_components": 20, "spread": )" +
         format_real(spread) + R"(},
  "topology": {"workers": 2, "inter_bandwidth_bytes_per_s": 12.5e9}
  )" + (lsh.empty() ? "" : ",\n  \"lsh\": " + lsh) + "\n}\n";
}

int error_line(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

TEST(ParseConfigTest, ValidDocument) {
  const ExperimentConfig cfg = parse_config(sim_config("", R"({"family": "sp", "q": 12})"));
  EXPECT_EQ(cfg.seed, 7u);
  ASSERT_TRUE(cfg.model && cfg.tokens && cfg.topology && cfg.lsh);
  EXPECT_EQ(cfg.model->d, 32u);
  EXPECT_EQ(cfg.topology->experts_per_worker, 4u);
  EXPECT_EQ(cfg.lsh->family, HashFamily::SphericalPlane);
  EXPECT_EQ(cfg.lsh->q, 12u);
  EXPECT_FALSE(cfg.cost_model);
}

TEST(ParseConfigTest, UnknownKeyReportsItsLine) {
  const std::string text = "{\n  \"schema_version\": 1,\n  \"model\": {\"n_experts\": 2, \"k\": 1, \"d\": 4,\n    \"colour\": 3}\n}\n";
  EXPECT_EQ(error_line(text), 4);
  EXPECT_THROW(parse_config(text), ConfigError);
}

TEST(ParseConfigTest, MalformedJsonReportsLine) {
  EXPECT_EQ(error_line("{\n  \"schema_version\": 1,\n  \"seed\": ,\n}\n"), 3);
}

TEST(ParseConfigTest, SchemaVersionRequired) {
  EXPECT_EQ(error_line("{\"seed\": 1}"), 1);
  EXPECT_EQ(error_line("{\n\"schema_version\": 2\n}"), 2);
}

TEST(ParseConfigTest, ValidationErrors) {
  // k > n_experts
  EXPECT_GT(error_line(R"({"schema_version": 1, "model": {"n_experts": 2, "k": 3, "d": 4}})"), 0);
  // experts do not split over workers
  EXPECT_GT(error_line(R"({"schema_version": 1, "model": {"n_experts": 6, "k": 1, "d": 4},
                           "topology": {"workers": 4}})"), 0);
  // token dim inconsistent with model
  EXPECT_GT(error_line(R"({"schema_version": 1, "model": {"n_experts": 2, "k": 1, "d": 4},
                           "tokens": {"n_tokens": 8, "dim": 5}})"), 0);
  EXPECT_GT(error_line(R"({"schema_version": 1, "lsh": {"family": "md5", "q": 2}})"), 0);
  EXPECT_GT(error_line(R"({"schema_version": 1, "lsh": {"q": -2}})"), 0);
  EXPECT_GT(error_line(R"({"schema_version": 1, "cost_model": {"n": 1, "k": 2, "h": 0, "l": 1, "w": 2}})"), 0);
}

TEST(ParseConfigTest, CostModelConvertsBandwidthToElements) {
  const auto cfg = parse_config(R"({"schema_version": 1, "cost_model":
      {"n": 4096, "k": 2, "h": 768, "l": 12, "w": 2, "inter_bandwidth_bytes_per_s": 12.5e9,
       "wire_bytes_per_element": 2, "peak_flops": 125e12, "utilization": 0.5}})");
  ASSERT_TRUE(cfg.cost_model);
  EXPECT_EQ(cfg.cost_model->inter_elems_per_s, 6.25e9);
  EXPECT_EQ(cfg.cost_model->flops, 62.5e12);
}

TEST(RunExperimentTest, BaselineOnly) {
  const Report r = run_experiment(parse_config(sim_config()));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].mode, "baseline");
  EXPECT_EQ(r.rows[0].compression_ratio, 1.0);
  EXPECT_EQ(r.rows[0].mean_l2_error_vs_baseline, 0.0);
  EXPECT_EQ(r.rows[0].predicted_speedup, 1.0);
  EXPECT_EQ(r.rows[0].dispatch_bytes, 1024u * 2 * 32 * 2);
}

TEST(RunExperimentTest, IdentityExpertsHaveNoError) {
  const Report r = run_experiment(
      parse_config(sim_config(R"(, "experts": "identity")", R"({"family": "cp", "q": 4})")));
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_LE(r.rows[1].mean_l2_error_vs_baseline, 1e-12);
  EXPECT_LT(r.rows[1].compression_ratio, 1.0);
}

// Centroid count from pairwise key grouping of every (worker, expert) group.
std::size_t oracle_centroids(const ExperimentConfig& cfg, HashFamily family, std::size_t q) {
  const TokenMatrix x = gen_tokens(cfg.token_spec());
  const MoeLayer layer = build_layer(cfg);
  const ClusterTopology& topo = *cfg.topology;
  std::size_t total = 0;
  for (std::size_t s = 0; s < topo.workers; ++s) {
    for (std::size_t e = 0; e < layer.experts.size(); ++e) {
      TokenMatrix group;
      for (std::size_t t = 0; t < x.rows(); ++t) {
        if (topo.worker_of_token(t, x.rows()) != s) continue;
        const Vector token(x.row(t).begin(), x.row(t).end());
        const auto experts = oracle::topk(layer.gate, token);
        if (std::find(experts.begin(), experts.end(), e) != experts.end()) group.append_row(x.row(t));
      }
      if (group.rows() == 0) continue;
      total += oracle::group_by_equal_keys(oracle::brute_force_keys(group, cfg.hash_config(family, q))).size();
    }
  }
  return total;
}

TEST(RunExperimentTest, MixtureCompressionMatchesOracle) {
  const ExperimentConfig cfg = parse_config(sim_config("", R"({"family": "cp", "q": 6})", 2048));
  const Report r = run_experiment(cfg);
  const double n_routed = 2048.0 * 2;
  const double ratio = r.rows[1].compression_ratio;
  EXPECT_LT(ratio, 1.0);
  EXPECT_GT(ratio, 20.0 / n_routed);
  EXPECT_EQ(ratio, oracle_centroids(cfg, HashFamily::CrossPolytope, 6) / n_routed);
  EXPECT_GT(r.rows[1].mean_l2_error_vs_baseline, 0.0);
  EXPECT_GT(r.rows[1].predicted_speedup, 1.0);
}

TEST(RunExperimentTest, MissingSectionIsConfigError) {
  EXPECT_THROW(run_experiment(parse_config(R"({"schema_version": 1})")), ConfigError);
}

TEST(SweepHashesTest, SingleQBothFamilies) {
  const Report r = sweep_hashes(parse_config(sim_config()), {4},
                                {HashFamily::CrossPolytope, HashFamily::SphericalPlane});
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].q, 4u);
  EXPECT_EQ(r.rows[1].q, 4u);
  EXPECT_EQ(r.rows[0].family, "cp");
  EXPECT_EQ(r.rows[1].family, "sp");
}

TEST(SweepHashesTest, MonotoneAcrossQ) {
  const Report r = sweep_hashes(parse_config(sim_config()), {2, 4, 6, 8, 10},
                                {HashFamily::CrossPolytope});
  ASSERT_EQ(r.rows.size(), 5u);
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    EXPECT_GE(r.rows[i].compression_ratio, r.rows[i - 1].compression_ratio);
    EXPECT_LE(r.rows[i].mean_l2_error_vs_baseline, r.rows[i - 1].mean_l2_error_vs_baseline);
  }
}

// At matched compression, cross-polytope buckets should lose less accuracy
// than hyperplane buckets on the clustered mixture. Majority over 5 seeds.
TEST(SweepHashesTest, CrossPolytopeBeatsHyperplaneAtMatchedCompression) {
  int cp_wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ExperimentConfig cfg = parse_config(sim_config("", "", 1024, 0.05, seed));
    const Report cp = sweep_hashes(cfg, {1}, {HashFamily::CrossPolytope});
    std::vector<std::size_t> sp_qs;
    for (std::size_t q = 1; q <= 24; ++q) sp_qs.push_back(q);
    const Report sp = sweep_hashes(cfg, sp_qs, {HashFamily::SphericalPlane});
    const ReportRow* best = &sp.rows.front();
    for (const ReportRow& row : sp.rows) {
      if (std::abs(row.compression_ratio - cp.rows[0].compression_ratio) <
          std::abs(best->compression_ratio - cp.rows[0].compression_ratio)) {
        best = &row;
      }
    }
    cp_wins += cp.rows[0].mean_l2_error_vs_baseline <= best->mean_l2_error_vs_baseline;
  }
  EXPECT_GE(cp_wins, 3);
}

TEST(SweepHashesTest, EmptyListsRejected) {
  const auto cfg = parse_config(sim_config());
  EXPECT_THROW(sweep_hashes(cfg, {}, {HashFamily::CrossPolytope}), std::invalid_argument);
  EXPECT_THROW(sweep_hashes(cfg, {2}, {}), std::invalid_argument);
}

TEST(ReportTest, CsvIsStableAcrossRunsAndThreads) {
  const auto cfg = parse_config(sim_config("", R"({"family": "cp", "q": 3})"));
  const std::string a = to_csv(run_experiment(cfg, {1}));
  EXPECT_EQ(a, to_csv(run_experiment(cfg, {1})));
  EXPECT_EQ(a, to_csv(run_experiment(cfg, {4})));
  EXPECT_EQ(a.substr(0, a.find('\n')),
            "mode,family,q,compression_ratio,mean_l2_error_vs_baseline,dispatch_bytes,return_bytes,"
            "modeled_step_time_s,predicted_speedup");
}

TEST(ReportTest, JsonCarriesAllColumns) {
  const auto cfg = parse_config(sim_config("", R"({"family": "sp", "q": 8})"));
  const auto j = nlohmann::json::parse(to_json(run_experiment(cfg)));
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][1]["family"], "sp");
  EXPECT_EQ(j["rows"][1]["q"], 8);
  EXPECT_TRUE(j["rows"][0].contains("predicted_speedup"));
}

CostParams gpt_params() {
  CostParams p;
  p.n = 4096;
  p.k = 2;
  p.h = 768;
  p.l = 12;
  p.w = 2;
  p.intra_elems_per_s = 75e9;
  p.inter_elems_per_s = 6.25e9;
  p.flops = 62.5e12;
  return p;
}

TEST(CostReportTest, BaseRowAnchor) {
  const CostReport r = cost_report(gpt_params(), {});
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].axis, "base");
  EXPECT_NEAR(r.rows[0].share, 0.303, 5e-4);
  EXPECT_NEAR(r.rows[0].t_all_to_all_approx_s / r.rows[0].t_compute_s, r.rows[0].ratio, 1e-15);
}

TEST(CostReportTest, Sweeps) {
  const CostReport r = cost_report(gpt_params(), {parse_sweep_spec("l=6,12,24"), parse_sweep_spec("w=4,8")});
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.rows[1].share, r.rows[2].share);
  EXPECT_EQ(r.rows[2].share, r.rows[3].share);
  EXPECT_NEAR(r.rows[5].ratio / r.rows[4].ratio, 7.0 / 6.0, 1e-15);
  const std::string csv = to_csv(r);
  EXPECT_NE(csv.find("\nw,8,"), std::string::npos);
  EXPECT_NE(csv.find("\nbase,,"), std::string::npos);
}

TEST(CostReportTest, BadSweepSpecs) {
  EXPECT_THROW(parse_sweep_spec("n=1,2"), std::invalid_argument);
  EXPECT_THROW(parse_sweep_spec("w"), std::invalid_argument);
  EXPECT_THROW(parse_sweep_spec("w=2,x"), std::invalid_argument);
  EXPECT_THROW(parse_sweep_spec("w="), std::invalid_argument);
}

}  // namespace
}  // namespace lshmoe
