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


#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "conserva/config.hpp"
#include "conserva/errors.hpp"
#include "conserva/harness.hpp"
#include "oracles.hpp"

using namespace conserva;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "conserva_harness_test" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig chain_config(std::size_t n, AgentKind kind, std::size_t iters, std::uint64_t seed) {
  ExperimentConfig c;
  c.env = EnvSpec::parse("nchain:" + std::to_string(n));
  c.agent.kind = kind;
  c.iterations = iters;
  c.seed = seed;
  c.record_timing = false;
  return c;
}

}  // namespace

TEST_CASE("true_regret basics") {
  const Environment env = build_nchain(5);
  const PlanResult opt = oracle_solution(env, 0.97);
  CHECK(std::fabs(true_regret(env, opt.policy, 0.97)) <= 1e-9);
  std::mt19937_64 rng(51);
  for (int i = 0; i < 20; ++i)
    CHECK(true_regret(env, oracle::random_policy(5, 2, rng), 0.97) >= -1e-9);
  CHECK_THROWS_AS(true_regret(env, Policy::uniform(4, 2), 0.97), InvalidInput);
}

TEST_CASE("always-left regret on the 5-chain against Monte-Carlo returns") {
  const double gamma = 0.97;
  const Environment env = build_nchain(5);
  const std::vector<std::size_t> left_actions(5, kLeft);
  const Policy left = Policy::deterministic(left_actions, 2);
  const double regret = true_regret(env, left, gamma);
  // left earns mean reward 0 forever
  CHECK(std::fabs(regret - oracle::exact_values(env.model, oracle_solution(env, gamma).policy,
                                                gamma)[0]) <= 1e-9);

  // 0.97^300 < 1e-3 of the tail
  const Environment long_env = build_nchain(5, 300);
  const Policy best = oracle_solution(env, gamma).policy;
  const int episodes = 100000;
  double best_sum = 0.0, left_sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    double w = 1.0;
    for (const Transition& x : rollout(long_env, best, make_stream(7, StreamPurpose::kRollout, e))) {
      best_sum += w * x.r;
      w *= gamma;
    }
    if (e % 10 == 0) {
      w = 1.0;
      for (const Transition& x : rollout(long_env, left, make_stream(8, StreamPurpose::kRollout, e))) {
        left_sum += w * x.r;
        w *= gamma;
      }
    }
  }
  const double mc = best_sum / episodes - left_sum / (episodes / 10);
  CHECK(std::fabs(mc - regret) <= 0.02 * regret);
}

TEST_CASE("one iteration from a posterior at the truth has no regret") {
  for (AgentKind kind : {AgentKind::kCdpo, AgentKind::kPsrl, AgentKind::kOfu, AgentKind::kGreedy}) {
    ExperimentConfig c = chain_config(6, kind, 1, 3);
    c.prior_at_truth = true;
    const RunResult r = run_experiment(c);
    REQUIRE(r.trace.per_iter_regret.size() == 1);
    CHECK(std::fabs(r.trace.per_iter_regret[0]) <= 1e-9);
  }
}

TEST_CASE("traces are deterministic, nonnegative and exact prefix sums") {
  for (AgentKind kind : {AgentKind::kCdpo, AgentKind::kPsrl, AgentKind::kOfu, AgentKind::kGreedy,
                         AgentKind::kCdpoReferentialOnly, AgentKind::kCdpoConservativeOnly,
                         AgentKind::kCdpoUnconstrained}) {
    CAPTURE(to_string(kind));
    const ExperimentConfig c = chain_config(5, kind, 40, 11);
    const RunResult a = run_experiment(c);
    const RunResult b = run_experiment(c);
    CHECK(trace_csv(a.trace) == trace_csv(b.trace));
    double running = 0.0;
    for (std::size_t t = 0; t < a.trace.per_iter_regret.size(); ++t) {
      CHECK(a.trace.per_iter_regret[t] >= -1e-9);
      running += a.trace.per_iter_regret[t];
      CHECK(a.trace.cum_regret[t] == running);
    }
    const bool has_ref = kind != AgentKind::kPsrl && kind != AgentKind::kOfu &&
                         kind != AgentKind::kGreedy && kind != AgentKind::kCdpoConservativeOnly;
    for (double d : a.trace.delta_t) {
      if (has_ref) {
        CHECK(d >= -1e-9);
      } else {
        CHECK(std::isnan(d));
      }
    }
  }
  const RunResult s1 = run_experiment(chain_config(5, AgentKind::kPsrl, 30, 1));
  const RunResult s2 = run_experiment(chain_config(5, AgentKind::kPsrl, 30, 2));
  CHECK(trace_csv(s1.trace) != trace_csv(s2.trace));
}

TEST_CASE("run artifacts") {
  ExperimentConfig c = chain_config(4, AgentKind::kCdpo, 20, 5);
  c.snapshot_every = 6;
  c.snapshot_samples = 4;
  c.output_dir = fresh_dir("artifacts");
  const RunResult r = run_experiment(c);
  CHECK(fs::exists(c.output_dir / "trace.csv"));
  CHECK(fs::exists(c.output_dir / "config.json"));
  CHECK(!fs::exists(c.output_dir / "PARTIAL"));
  CHECK(slurp(c.output_dir / "trace.csv") == trace_csv(r.trace));

  const std::string csv = slurp(c.output_dir / "trace.csv");
  CHECK(csv.rfind("iter,per_iter_regret,cum_regret,delta_t,max_state_tv,wall_ms\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);

  const nlohmann::json summary = nlohmann::json::parse(slurp(c.output_dir / "summary.json"));
  CHECK(summary["status"] == "complete");
  CHECK(summary["final_cum_regret"].get<double>() == r.trace.final_cum_regret());

  // ⌊20/6⌋ snapshots × 4 states × 2 actions
  std::ifstream in(c.output_dir / "snapshots.jsonl");
  std::string line;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    const nlohmann::json rec = nlohmann::json::parse(line);
    CHECK(rec["t"].get<std::size_t>() % 6 == 0);
    CHECK(rec["std_q"].get<double>() >= 0.0);
    CHECK(rec.contains("mean_q"));
    CHECK(rec.contains("n_obs"));
    ++records;
  }
  CHECK(records == 3 * 4 * 2);

  ExperimentConfig again = c;
  again.output_dir = fresh_dir("artifacts_again");
  run_experiment(again);
  CHECK(slurp(again.output_dir / "trace.csv") == slurp(c.output_dir / "trace.csv"));

  ExperimentConfig quiet = c;
  quiet.snapshot_every = 0;
  quiet.output_dir = fresh_dir("no_snapshots");
  run_experiment(quiet);
  CHECK(!fs::exists(quiet.output_dir / "snapshots.jsonl"));
}

TEST_CASE("export_snapshots writes a header record when empty") {
  const fs::path path = fresh_dir("empty_snap");
  fs::create_directories(path);
  export_snapshots({}, path / "s.jsonl");
  std::ifstream in(path / "s.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    nlohmann::json rec;
    CHECK_NOTHROW(rec = nlohmann::json::parse(line));
    CHECK(rec.is_object());
    ++lines;
  }
  CHECK(lines == 1);
}

TEST_CASE("unwritable output directory raises an I/O error") {
  const fs::path base = fresh_dir("blocked");
  fs::create_directories(base);
  std::ofstream(base / "file") << "x";
  ExperimentConfig c = chain_config(3, AgentKind::kGreedy, 2, 1);
  c.output_dir = base / "file" / "run";
  CHECK_THROWS_AS(run_experiment(c), IoError);
}

TEST_CASE("config JSON round-trip and validation") {
  ExperimentConfig c = chain_config(7, AgentKind::kOfu, 33, 99);
  c.agent.eta = 0.35;
  c.agent.n_models = 4;
  c.horizon = 9;
  c.snapshot_every = 3;
  c.prior.reward.mu = 0.5;
  c.width_at = {{0, 1}, {6, 1}};
  const ExperimentConfig back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.agent.kind == AgentKind::kOfu);
  CHECK(back.prior.reward.mu == 0.5);
  CHECK(back.width_at == c.width_at);

  nlohmann::json bad = to_json(c);
  bad["gamma"] = 1.5;
  CHECK_THROWS_AS(config_from_json(bad), InvalidInput);
  bad = to_json(c);
  bad["iterations"] = 0;
  CHECK_THROWS_AS(config_from_json(bad), InvalidInput);
  CHECK_THROWS_AS(EnvSpec::parse("chain:5"), InvalidInput);
  CHECK(EnvSpec::parse("file:/tmp/x.json").kind == EnvSpec::Kind::kFile);
}

TEST_CASE("width traces and prior-drawn environments") {
  ExperimentConfig c = chain_config(5, AgentKind::kCdpo, 15, 2);
  c.width_at = {{0, kRight}, {4, kRight}};
  const RunResult r = run_experiment(c);
  REQUIRE(r.trace.width_at.size() == 2);
  for (const auto& w : r.trace.width_at) {
    CHECK(w.size() == 15);
    for (double x : w) CHECK((x >= 0.0 && x <= 2.0));
  }

  const std::string csv = width_csv(c.width_at, r.trace);
  CHECK(csv.rfind("iter,w_s0_a1,w_s4_a1\n1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);
  ExperimentConfig saved = c;
  saved.output_dir = fresh_dir("width");
  run_experiment(saved);
  CHECK(slurp(saved.output_dir / "width.csv") == csv);

  ExperimentConfig b = chain_config(4, AgentKind::kPsrl, 10, 3);
  b.env_from_prior = true;
  const RunResult rb = run_experiment(b);
  for (double x : rb.trace.per_iter_regret) CHECK(x >= -1e-9);
}

TEST_CASE("sweep aggregation") {
  std::vector<ExperimentConfig> configs;
  for (std::uint64_t seed : {1, 2, 3})
    for (AgentKind k : {AgentKind::kCdpo, AgentKind::kGreedy})
      configs.push_back(chain_config(4, k, 25, seed));
  ExperimentConfig broken = chain_config(4, AgentKind::kPsrl, 25, 1);
  broken.env = EnvSpec::file("/nonexistent/env.json");
  configs.push_back(broken);

  const SweepResult res = sweep(configs, 2);
  CHECK(res.runs.size() == configs.size());
  CHECK(res.failures == 1);
  REQUIRE(res.aggregate.size() == 2);
  double top = 0.0;
  for (const AggregateRow& row : res.aggregate) {
    CHECK(row.runs == 3);
    CHECK(row.std_cum_regret > 0.0);
    top = std::max(top, row.normalized_regret);
    CHECK(row.normalized_regret <= 1.0);
  }
  CHECK(top == 1.0);

  const ExperimentConfig solo = chain_config(4, AgentKind::kPsrl, 25, 8);
  const SweepResult one = sweep({solo}, 1);
  REQUIRE(one.aggregate.size() == 1);
  CHECK(one.aggregate[0].mean_cum_regret == run_experiment(solo).trace.final_cum_regret());
  CHECK(one.aggregate[0].std_cum_regret == 0.0);
  CHECK(one.aggregate[0].normalized_regret == 1.0);

  const std::string csv = aggregate_csv(res.aggregate);
  CHECK(csv.rfind("env,agent,runs,mean_cum_regret,std_cum_regret,normalized_regret\n", 0) == 0);
}

TEST_CASE("aggregate_runs arithmetic") {
  std::vector<RunSummary> runs{{"e", "a", 1, 10, 2.0, true, ""},
                               {"e", "a", 2, 10, 4.0, true, ""},
                               {"e", "b", 1, 10, 6.0, true, ""},
                               {"e", "b", 2, 10, 0.0, false, "boom"}};
  const std::vector<AggregateRow> rows = aggregate_runs(runs);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].agent == "a");
  CHECK(rows[0].mean_cum_regret == 3.0);
  CHECK(rows[0].std_cum_regret == doctest::Approx(std::sqrt(2.0)));
  CHECK(rows[0].normalized_regret == 0.5);
  CHECK(rows[1].runs == 1);
  CHECK(rows[1].normalized_regret == 1.0);
}

TEST_CASE("sweep configs from a grid and report over saved runs") {
  const fs::path out = fresh_dir("grid");
  nlohmann::json doc = {
      {"base", {{"iterations", 10}, {"record_timing", false}}},
      {"envs", {"nchain:3", "nchain:4"}},
      {"agents", {"psrl", "greedy"}},
      {"seeds", {1, 2}},
      {"output_dir", out.string()},
  };
  const std::vector<ExperimentConfig> configs = sweep_configs_from_json(doc);
  CHECK(configs.size() == 8);
  const SweepResult res = sweep(configs, 2);
  CHECK(res.failures == 0);
  const std::vector<AggregateRow> rep = report(out);
  REQUIRE(rep.size() == res.aggregate.size());
  for (std::size_t i = 0; i < rep.size(); ++i) {
    CHECK(rep[i].env == res.aggregate[i].env);
    CHECK(rep[i].agent == res.aggregate[i].agent);
    CHECK(rep[i].mean_cum_regret == doctest::Approx(res.aggregate[i].mean_cum_regret).epsilon(1e-12));
  }
}

TEST_CASE("greedy converges prematurely where CDPO keeps exploring") {
  // Found by search over μ0 and seeds; a documented instance, not a universal claim.
  auto make = [](AgentKind kind) {
    ExperimentConfig c = chain_config(8, kind, 300, 8);
    c.prior.reward.mu = 0.03;
    return c;
  };
  const RunResult greedy = run_experiment(make(AgentKind::kGreedy));
  const RunResult cdpo = run_experiment(make(AgentKind::kCdpo));
  const Environment env = build_nchain(8);
  const std::vector<std::size_t> left(8, kLeft);
  const double left_regret = true_regret(env, Policy::deterministic(left, 2), 0.97);
  double cdpo_late = 0.0;
  for (std::size_t t = 250; t < 300; ++t) {
    CHECK(std::fabs(greedy.trace.per_iter_regret[t] - left_regret) <= 1e-9);
    cdpo_late += cdpo.trace.per_iter_regret[t] / 50.0;
  }
  MESSAGE("late mean regret: greedy " << left_regret << ", cdpo " << cdpo_late);
  CHECK(cdpo_late < 0.1 * left_regret);
}
