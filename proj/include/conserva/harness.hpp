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

#pragma once

// The experiment loop: plan, act in the real environment, update the
// posterior, and account regret exactly on the true model.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conserva/agents.hpp"
#include "conserva/bayes.hpp"
#include "conserva/config.hpp"
#include "conserva/envs.hpp"

namespace conserva {

struct RegretTrace {
  std::vector<double> per_iter_regret;
  std::vector<double> cum_regret;
  std::vector<double> delta_t;       // NaN for agents without a referential step
  std::vector<double> max_state_tv;  // NaN for agents without a conservative step
  std::vector<double> wall_ms;
  // Safeguard margin (1/N)Σ E[V_{π_t}] - (1/N)Σ E[V_{q_t}]; NaN when unused.
  std::vector<double> improvement;
  // width_at[k][t]: ensemble width at the k-th configured (s,a).
  std::vector<std::vector<double>> width_at;

  double final_cum_regret() const { return cum_regret.empty() ? 0.0 : cum_regret.back(); }
};

struct IterationRecord {
  std::size_t t = 0;
  const Environment& env;
  const PosteriorState& posterior;  // after this iteration's update
  const AgentStep& step;
  double regret = 0.0;
};

using IterationObserver = std::function<void(const IterationRecord&)>;

struct RunResult {
  ExperimentConfig config;
  RegretTrace trace;
  std::vector<QSnapshot> snapshots;
};

// R_t = Σ_s ζ(s) (V*(s) - V_π(s)) on the true model.
double true_regret(const Environment& env, const Policy& policy, double gamma);

// Runs the configured loop. With a non-empty output_dir writes trace.csv,
// config.json, summary.json and (if snapshots are on) snapshots.jsonl.
// Invariant violations throw InternalError; I/O failures throw IoError after
// leaving a PARTIAL marker next to whatever was written.
RunResult run_experiment(const ExperimentConfig& config,
                         const IterationObserver& observer = {});

// Header row and formatting of the canonical trace CSV.
std::string trace_csv(const RegretTrace& trace);

// iter plus one column per configured (s,a).
std::string width_csv(const std::vector<std::pair<std::size_t, std::size_t>>& cells,
                      const RegretTrace& trace);

// One JSONL record per (iteration, s, a); an empty snapshot list gives a
// single header record.
void export_snapshots(const std::vector<QSnapshot>& snapshots,
                      const std::filesystem::path& path);

struct RunSummary {
  std::string env;
  std::string agent;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  double final_cum_regret = 0.0;
  bool ok = true;
  std::string error;
};

struct AggregateRow {
  std::string env;
  std::string agent;
  std::size_t runs = 0;
  double mean_cum_regret = 0.0;
  double std_cum_regret = 0.0;
  // mean_cum_regret over the largest mean for the same env.
  double normalized_regret = 0.0;
};

struct SweepResult {
  std::vector<RunSummary> runs;
  std::vector<AggregateRow> aggregate;
  std::size_t failures = 0;
};

// Successful runs only; rows sorted by (env, agent).
std::vector<AggregateRow> aggregate_runs(const std::vector<RunSummary>& runs);

std::string aggregate_csv(const std::vector<AggregateRow>& rows);

// Runs every cell on up to `jobs` threads. Failed cells are recorded and
// skipped by the aggregation.
SweepResult sweep(const std::vector<ExperimentConfig>& configs, std::size_t jobs);

// Collects summary.json files under `dir` and aggregates them.
std::vector<AggregateRow> report(const std::filesystem::path& dir);

}  // namespace conserva
