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

// Command line driver: simulate, sweep-hashes, cost-model.
//
// Exit codes: 0 success, 2 configuration or validation error, 1 internal
// invariant violation.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lshmoe/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lshmoe::ConfigError(path, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t thread_hint() {
  const char* env = std::getenv("LSHMOE_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) {
    throw std::invalid_argument(std::string("LSHMOE_THREADS='") + env +
                                "' is not a positive integer");
  }
  return v;
}

template <typename T>
std::vector<T> split_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if constexpr (std::is_same_v<T, lshmoe::HashFamily>) {
      out.push_back(lshmoe::parse_hash_family(item));
    } else {
      std::size_t used = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != item.size()) {
        throw std::invalid_argument(what + ": bad value '" + item + "'");
      }
      out.push_back(static_cast<T>(v));
    }
  }
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

struct CommonOptions {
  std::string config_path;
  std::string out;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("config", o.config_path, "Experiment config (JSON)")->required();
  cmd->add_option("--out", o.out, "Report path (default: config 'output', else stdout)");
  cmd->add_option("--seed", o.seed, "Master seed, overrides the config");
  cmd->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}));
}

lshmoe::ExperimentConfig load(const CommonOptions& o) {
  auto cfg = lshmoe::parse_config(read_file(o.config_path), o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void emit(const std::string& text, const CommonOptions& o, const lshmoe::ExperimentConfig& cfg) {
  const std::string path = !o.out.empty() ? o.out : cfg.output.value_or("");
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expert-parallel MoE step simulator with LSH-compressed all-to-all"};
  app.require_subcommand(1);

  CommonOptions sim_opts;
  auto* simulate = app.add_subcommand("simulate", "Run baseline and (if configured) LSH steps");
  add_common(simulate, sim_opts);

  CommonOptions sweep_opts;
  std::string q_list = "2,4,6,8,10";
  std::string family_list = "cp";
  auto* sweep = app.add_subcommand("sweep-hashes", "Sweep hash count and family");
  add_common(sweep, sweep_opts);
  sweep->add_option("--q", q_list, "Comma-separated hash counts");
  sweep->add_option("--families", family_list, "Comma-separated families (cp, sp)");

  CommonOptions cost_opts;
  std::vector<std::string> sweep_specs;
  auto* cost = app.add_subcommand("cost-model", "Evaluate the analytical communication/compute model");
  add_common(cost, cost_opts);
  cost->add_option("--sweep", sweep_specs, "axis=v1,v2,... (axis in w, h, l, k); repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (simulate->parsed()) {
      const auto cfg = load(sim_opts);
      const auto report = lshmoe::run_experiment(cfg, {thread_hint()});
      emit(sim_opts.format == "json" ? lshmoe::to_json(report) : lshmoe::to_csv(report), sim_opts,
           cfg);
    } else if (sweep->parsed()) {
      const auto cfg = load(sweep_opts);
      const auto qs = split_list<std::size_t>(q_list, "--q");
      const auto families = split_list<lshmoe::HashFamily>(family_list, "--families");
      const auto report = lshmoe::sweep_hashes(cfg, qs, families, {thread_hint()});
      emit(sweep_opts.format == "json" ? lshmoe::to_json(report) : lshmoe::to_csv(report),
           sweep_opts, cfg);
    } else if (cost->parsed()) {
      const auto cfg = load(cost_opts);
      if (!cfg.cost_model) throw lshmoe::ConfigError(cost_opts.config_path, 0, "missing section 'cost_model'");
      std::vector<lshmoe::SweepSpec> sweeps;
      for (const auto& s : sweep_specs) sweeps.push_back(lshmoe::parse_sweep_spec(s));
      const auto report = lshmoe::cost_report(*cfg.cost_model, sweeps);
      emit(cost_opts.format == "json" ? lshmoe::to_json(report) : lshmoe::to_csv(report), cost_opts,
           cfg);
    }
  } catch (const lshmoe::InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
