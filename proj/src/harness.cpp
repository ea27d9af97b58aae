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

#include "conserva/harness.hpp"

#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <spdlog/spdlog.h>

#include "conserva/errors.hpp"

namespace conserva {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRegretTol = 1e-9;
constexpr double kTrustTol = 1e-12;
constexpr double kMonotoneTol = 1e-9;
constexpr double kSafeguardTol = 1e-12;

std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  return fmt::format("{:.17g}", x);
}

// Streams artifacts for one run; on failure leaves a PARTIAL marker.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(fmt::format("cannot create output directory {}: {}", dir_.string(), ec.message()));
    std::filesystem::remove(dir_ / "PARTIAL", ec);
    trace_.open(dir_ / "trace.csv", std::ios::trunc);
    if (!trace_) fail("cannot open trace.csv");
    trace_ << "iter,per_iter_regret,cum_regret,delta_t,max_state_tv,wall_ms\n";
  }

  bool enabled() const { return !dir_.empty(); }

  void row(std::size_t t, const RegretTrace& tr) {
    if (!enabled()) return;
    const std::size_t i = t - 1;
    trace_ << t << ',' << fmt_double(tr.per_iter_regret[i]) << ','
           << fmt_double(tr.cum_regret[i]) << ',' << fmt_double(tr.delta_t[i]) << ','
           << fmt_double(tr.max_state_tv[i]) << ',' << fmt_double(tr.wall_ms[i]) << '\n';
    if (!trace_) fail("failed writing trace.csv");
  }

  void write_json(const char* name, const json& doc) {
    if (!enabled()) return;
    std::ofstream out(dir_ / name, std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) fail(fmt::format("failed writing {}", name));
  }

  void snapshots(const std::vector<QSnapshot>& snaps) {
    if (!enabled()) return;
    try {
      export_snapshots(snaps, dir_ / "snapshots.jsonl");
    } catch (const IoError& e) {
      fail(e.what());
    }
  }

  void text(const char* name, const std::string& body) {
    if (!enabled()) return;
    std::ofstream out(dir_ / name, std::ios::trunc);
    out << body;
    if (!out) fail(fmt::format("failed writing {}", name));
  }

  void close() {
    if (!enabled()) return;
    trace_.flush();
    if (!trace_) fail("failed flushing trace.csv");
    trace_.close();
  }

 private:
  [[noreturn]] void fail(const std::string& what) {
    std::ofstream marker(dir_ / "PARTIAL", std::ios::trunc);
    marker << what << '\n';
    throw IoError(fmt::format("{}: {}", dir_.string(), what));
  }

  std::filesystem::path dir_;
  std::ofstream trace_;
};

Environment make_environment(const ExperimentConfig& config) {
  Environment env = config.env.build(config.horizon);
  if (config.env_from_prior) {
    Rng rng = make_stream(config.seed, StreamPurpose::kEnvDraw, 0);
    const PosteriorState prior = init_posterior(env.n_states(), env.n_actions(), config.prior);
    env = sample_environment(prior, rng, env.zeta, env.horizon);
  }
  env.validate();
  return env;
}

void check_invariants(std::size_t t, const AgentSpec& spec, const AgentStep& step,
                      double regret) {
  if (regret < -kRegretTol) {
    throw InternalError(fmt::format("iteration {}: negative regret {}", t, regret));
  }
  if (!step.cdpo) return;
  const CdpoIterationResult& r = *step.cdpo;
  const double eta = spec.kind == AgentKind::kCdpoUnconstrained ? 1.0 : spec.eta;
  if (r.max_state_tv > eta + kTrustTol) {
    throw InternalError(fmt::format("iteration {}: TV {} exceeds radius {}", t, r.max_state_tv, eta));
  }
  if (!std::isnan(r.delta_t) &&
      (r.delta_t < -kMonotoneTol || r.gap_to_previous_pi < -kMonotoneTol)) {
    throw InternalError(fmt::format(
        "iteration {}: referential step not greedy (delta {}, gap to previous pi {})", t,
        r.delta_t, r.gap_to_previous_pi));
  }
  if (!std::isnan(r.mean_sampled_value_before) &&
      r.mean_sampled_value_after < r.mean_sampled_value_before - kSafeguardTol) {
    throw InternalError(fmt::format("iteration {}: conservative step lowered ensemble value {} -> {}",
                                    t, r.mean_sampled_value_before, r.mean_sampled_value_after));
  }
}

}  // namespace

double true_regret(const Environment& env, const Policy& policy, double gamma) {
  if (policy.n_states() != env.n_states() || policy.n_actions() != env.n_actions()) {
    throw InvalidInput(fmt::format("policy is {}x{} but environment is {}x{}",
                                   policy.n_states(), policy.n_actions(), env.n_states(),
                                   env.n_actions()));
  }
  const PlanResult oracle = oracle_solution(env, gamma);
  const double best = expected_return(oracle.values, env.zeta);
  return best - expected_return(evaluate_policy(env.model, policy, gamma), env.zeta);
}

std::string trace_csv(const RegretTrace& tr) {
  std::string out = "iter,per_iter_regret,cum_regret,delta_t,max_state_tv,wall_ms\n";
  for (std::size_t i = 0; i < tr.per_iter_regret.size(); ++i) {
    out += fmt::format("{},{},{},{},{},{}\n", i + 1, fmt_double(tr.per_iter_regret[i]),
                       fmt_double(tr.cum_regret[i]), fmt_double(tr.delta_t[i]),
                       fmt_double(tr.max_state_tv[i]), fmt_double(tr.wall_ms[i]));
  }
  return out;
}

std::string width_csv(const std::vector<std::pair<std::size_t, std::size_t>>& cells,
                      const RegretTrace& tr) {
  std::string out = "iter";
  for (const auto& [s, a] : cells) out += fmt::format(",w_s{}_a{}", s, a);
  out += '\n';
  const std::size_t rows = tr.width_at.empty() ? 0 : tr.width_at.front().size();
  for (std::size_t i = 0; i < rows; ++i) {
    out += fmt::format("{}", i + 1);
    for (const auto& column : tr.width_at) out += ',' + fmt_double(column[i]);
    out += '\n';
  }
  return out;
}

void export_snapshots(const std::vector<QSnapshot>& snapshots,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {}", path.string()));
  if (snapshots.empty()) {
    out << json{{"header", true}, {"fields", {"t", "s", "a", "mean_q", "std_q", "n_obs"}}}.dump()
        << '\n';
  }
  for (const QSnapshot& snap : snapshots) {
    for (std::size_t s = 0; s < snap.n_states; ++s) {
      for (std::size_t a = 0; a < snap.n_actions; ++a) {
        const std::size_t c = s * snap.n_actions + a;
        json rec = {{"t", snap.iteration}, {"s", s}, {"a", a},
                    {"mean_q", snap.mean_q[c]}, {"std_q", snap.std_q[c]},
                    {"n_obs", snap.n_obs.empty() ? 0 : snap.n_obs[c]}};
        out << rec.dump() << '\n';
      }
    }
  }
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

RunResult run_experiment(const ExperimentConfig& config, const IterationObserver& observer) {
  config.validate();
  RunResult result;
  result.config = config;
  result.config.agent.gamma = config.gamma;
  const AgentSpec spec = result.config.agent;

  const Environment env = make_environment(config);
  for (const auto& [s, a] : config.width_at) {
    if (s >= env.n_states() || a >= env.n_actions()) {
      throw InvalidInput(fmt::format("width_at ({}, {}) out of range", s, a));
    }
  }
  const double best_return = expected_return(oracle_solution(env, config.gamma).values, env.zeta);

  PosteriorState posterior =
      config.prior_at_truth
          ? PosteriorState(Prior::concentrated(env.model))
          : init_posterior(env.n_states(), env.n_actions(), config.prior);
  Agent agent(spec, env.n_states(), env.n_actions(), env.zeta);

  ArtifactWriter writer(config.output_dir);
  writer.write_json("config.json", to_json(result.config));

  RegretTrace& tr = result.trace;
  tr.width_at.assign(config.width_at.size(), {});
  spdlog::info("run {} agent={} seed={} T={} H={}", config.env.label(), to_string(spec.kind),
               config.seed, config.iterations, env.horizon);

  double cumulative = 0.0;
  for (std::size_t t = 1; t <= config.iterations; ++t) {
    const auto start = std::chrono::steady_clock::now();

    Rng agent_rng = make_stream(config.seed, StreamPurpose::kAgent, t);
    const AgentStep step = agent.step(posterior, agent_rng);
    const double regret =
        best_return -
        expected_return(evaluate_policy(env.model, step.executed, config.gamma), env.zeta);
    check_invariants(t, spec, step, regret);

    const std::vector<Transition> batch =
        rollout(env, step.executed, make_stream(config.seed, StreamPurpose::kRollout, t), t);
    posterior.absorb(batch);

    if (!config.width_at.empty()) {
      Rng width_rng = make_stream(config.seed, StreamPurpose::kWidth, t);
      std::vector<TabularModel> models;
      for (std::size_t i = 0; i < std::max<std::size_t>(2, spec.n_models); ++i) {
        models.push_back(sample_model(posterior, width_rng));
      }
      for (std::size_t k = 0; k < config.width_at.size(); ++k) {
        tr.width_at[k].push_back(
            ensemble_width(models, config.width_at[k].first, config.width_at[k].second));
      }
    }
    if (config.snapshot_every > 0 && t % config.snapshot_every == 0) {
      Rng snap_rng = make_stream(config.seed, StreamPurpose::kSnapshot, t);
      result.snapshots.push_back(q_posterior_snapshot(posterior, config.snapshot_samples,
                                                      config.gamma, snap_rng, t));
    }

    cumulative += regret;
    tr.per_iter_regret.push_back(regret);
    tr.cum_regret.push_back(cumulative);
    if (step.cdpo) {
      tr.delta_t.push_back(step.cdpo->delta_t);
      tr.max_state_tv.push_back(std::isnan(step.cdpo->mean_sampled_value_before)
                                    ? 0.0
                                    : step.cdpo->max_state_tv);
      tr.improvement.push_back(step.cdpo->mean_sampled_value_after -
                               step.cdpo->mean_sampled_value_before);
    } else {
      tr.delta_t.push_back(kNaN);
      tr.max_state_tv.push_back(kNaN);
      tr.improvement.push_back(kNaN);
    }
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    tr.wall_ms.push_back(config.record_timing ? elapsed : 0.0);
    writer.row(t, tr);

    spdlog::debug("t={} regret={:.6g} cum={:.6g}", t, regret, cumulative);
    if (observer) observer(IterationRecord{t, env, posterior, step, regret});
  }

  writer.close();
  if (config.snapshot_every > 0) writer.snapshots(result.snapshots);
  if (!config.width_at.empty()) writer.text("width.csv", width_csv(config.width_at, tr));
  writer.write_json("summary.json",
                    {{"env", config.env.label()},
                     {"agent", std::string(to_string(spec.kind))},
                     {"seed", config.seed},
                     {"iterations", config.iterations},
                     {"final_cum_regret", tr.final_cum_regret()},
                     {"status", "complete"}});
  spdlog::info("done {} agent={} seed={} cum_regret={:.6g}", config.env.label(),
               to_string(spec.kind), config.seed, tr.final_cum_regret());
  return result;
}

}  // namespace conserva
