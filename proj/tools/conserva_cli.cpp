// Copyright 2026 The Conserva Authors
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

// conserva: run, sweep and summarize exploration experiments.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "conserva/config.hpp"
#include "conserva/errors.hpp"
#include "conserva/harness.hpp"
#include "conserva/kernels.hpp"
#include "conserva/log.hpp"

namespace {

using conserva::ExperimentConfig;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw conserva::IoError(fmt::format("failed writing {}", path.string()));
}

}  // namespace

int main(int argc, char** argv) {
  conserva::init_logging();
  CLI::App app{"Bayesian tabular exploration experiments"};
  app.require_subcommand(1);

  // run
  ExperimentConfig run_cfg;
  std::string env_text = "nchain:8";
  std::string env_file;
  std::string agent_name = "cdpo";
  std::string out_dir;
  std::vector<std::size_t> width_at;
  bool no_timing = false;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--env", env_text, "Environment, e.g. nchain:8")->capture_default_str();
  run->add_option("--env-file", env_file, "MDP JSON file (overrides --env)");
  run->add_option("--agent", agent_name,
                  "cdpo|psrl|ofu|greedy|cdpo-ref-only|cdpo-cons-only|cdpo-uncon")
      ->capture_default_str();
  run->add_option("--eta", run_cfg.agent.eta, "TV trust-region radius")->capture_default_str();
  run->add_option("--gamma", run_cfg.gamma, "Discount")->capture_default_str();
  run->add_option("--horizon", run_cfg.horizon, "Episode length (0: 2N for chains)")
      ->capture_default_str();
  run->add_option("--iters", run_cfg.iterations, "Iterations T")->capture_default_str();
  run->add_option("--models", run_cfg.agent.n_models, "Posterior samples per iteration")
      ->capture_default_str();
  run->add_option("--sweeps", run_cfg.agent.sweeps, "Conservative improvement sweeps")
      ->capture_default_str();
  run->add_option("--seed", run_cfg.seed, "Experiment seed")->capture_default_str();
  run->add_option("--snapshot-every", run_cfg.snapshot_every,
                  "Iterations between posterior Q snapshots (0: off)")
      ->capture_default_str();
  run->add_option("--snapshot-samples", run_cfg.snapshot_samples, "Models per snapshot")
      ->capture_default_str();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--alpha0", run_cfg.prior.dirichlet_alpha, "Dirichlet prior concentration")
      ->capture_default_str();
  run->add_option("--mu0", run_cfg.prior.reward.mu, "Normal-Gamma prior mean")->capture_default_str();
  run->add_option("--kappa0", run_cfg.prior.reward.kappa, "Normal-Gamma prior kappa")
      ->capture_default_str();
  run->add_option("--a0", run_cfg.prior.reward.alpha, "Normal-Gamma prior shape")
      ->capture_default_str();
  run->add_option("--b0", run_cfg.prior.reward.beta, "Normal-Gamma prior rate")
      ->capture_default_str();
  run->add_flag("--env-from-prior", run_cfg.env_from_prior,
                "Draw the true MDP from the prior (Bayes regret)");
  run->add_option("--width-at", width_at, "Record ensemble width at S A (pairs)")
      ->expected(0, -1);
  run->add_flag("--no-timing", no_timing, "Write wall_ms as 0 for reproducible traces");

  // sweep
  std::string sweep_file;
  std::size_t jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of experiments");
  sweep->add_option("--config", sweep_file, "Sweep JSON file")->required();
  sweep->add_option("--jobs", jobs, "Concurrent runs")->capture_default_str();

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "Aggregate finished runs into aggregate.csv");
  report->add_option("--in", report_dir, "Directory holding run outputs")->required();

  // kernels
  auto* kernels = app.add_subcommand("kernels", "Print the selected SIMD kernel table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      run_cfg.env = env_file.empty() ? conserva::EnvSpec::parse(env_text)
                                     : conserva::EnvSpec::file(env_file);
      run_cfg.agent.kind = conserva::parse_agent_kind(agent_name);
      run_cfg.agent.gamma = run_cfg.gamma;
      run_cfg.output_dir = out_dir;
      run_cfg.record_timing = !no_timing;
      if (width_at.size() % 2 != 0) throw conserva::InvalidInput("--width-at takes S A pairs");
      for (std::size_t i = 0; i < width_at.size(); i += 2) {
        run_cfg.width_at.emplace_back(width_at[i], width_at[i + 1]);
      }
      const conserva::RunResult res = conserva::run_experiment(run_cfg);
      fmt::print("{} agent={} seed={} iterations={} final_cum_regret={:.10g}\n",
                 run_cfg.env.label(), agent_name, run_cfg.seed, run_cfg.iterations,
                 res.trace.final_cum_regret());
    } else if (*sweep) {
      std::ifstream in(sweep_file);
      if (!in) throw conserva::InvalidInput(fmt::format("cannot open {}", sweep_file));
      const nlohmann::json doc = nlohmann::json::parse(in);
      const auto configs = conserva::sweep_configs_from_json(doc);
      const conserva::SweepResult res = conserva::sweep(configs, jobs);
      const std::string csv = conserva::aggregate_csv(res.aggregate);
      fmt::print("{}", csv);
      if (doc.contains("output_dir")) {
        const std::filesystem::path root = doc.at("output_dir").get<std::string>();
        std::filesystem::create_directories(root);
        write_text(root / "aggregate.csv", csv);
      }
      if (res.failures > 0) {
        fmt::print(stderr, "{} of {} runs failed\n", res.failures, res.runs.size());
        return 2;
      }
    } else if (*report) {
      const auto rows = conserva::report(report_dir);
      const std::string csv = conserva::aggregate_csv(rows);
      write_text(std::filesystem::path(report_dir) / "aggregate.csv", csv);
      fmt::print("{}", csv);
    } else if (*kernels) {
      fmt::print("active: {}\n", conserva::kernels::active().name);
      for (const auto* table : conserva::kernels::available_tables()) {
        fmt::print("available: {}\n", table->name);
      }
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
