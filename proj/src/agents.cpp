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

#include "conserva/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>

#include "conserva/errors.hpp"

namespace conserva {

namespace {

constexpr struct {
  AgentKind kind;
  std::string_view name;
} kAgentNames[] = {
    {AgentKind::kCdpo, "cdpo"},
    {AgentKind::kPsrl, "psrl"},
    {AgentKind::kOfu, "ofu"},
    {AgentKind::kGreedy, "greedy"},
    {AgentKind::kCdpoReferentialOnly, "cdpo-ref-only"},
    {AgentKind::kCdpoConservativeOnly, "cdpo-cons-only"},
    {AgentKind::kCdpoUnconstrained, "cdpo-uncon"},
};

std::vector<TabularModel> sample_models(const PosteriorState& post,
                                        std::size_t n, Rng& rng) {
  std::vector<TabularModel> models;
  models.reserve(n);
  for (std::size_t i = 0; i < n; ++i) models.push_back(sample_model(post, rng));
  return models;
}

}  // namespace

std::string_view to_string(AgentKind kind) {
  for (const auto& entry : kAgentNames) {
    if (entry.kind == kind) return entry.name;
  }
  return "unknown";
}

AgentKind parse_agent_kind(std::string_view name) {
  for (const auto& entry : kAgentNames) {
    if (entry.name == name) return entry.kind;
  }
  throw InvalidInput(fmt::format("unknown agent '{}'", name));
}

void AgentSpec::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw InvalidInput(fmt::format("eta must lie in [0,1], got {}", eta));
  }
  if (n_models < 1) throw InvalidInput("n_models must be >= 1");
  if (sweeps < 1) throw InvalidInput("sweeps must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput(fmt::format("gamma must lie in (0,1), got {}", gamma));
  }
}

Policy referential_update(const TabularModel& reference, double gamma) {
  if (reference.tag() != ModelTag::kReference) {
    throw InvalidInput("referential update expects a model tagged as reference");
  }
  return policy_iteration(reference, gamma).policy;
}

std::vector<double> conservative_state_step(std::span<const double> q_row,
                                            std::span<const double> qbar_row,
                                            double eta) {
  if (q_row.size() != qbar_row.size() || q_row.empty()) {
    throw InvalidInput(fmt::format("conservative step on rows of length {} and {}",
                                   q_row.size(), qbar_row.size()));
  }
  std::vector<double> out(q_row.begin(), q_row.end());
  const std::size_t best = static_cast<std::size_t>(
      std::max_element(qbar_row.begin(), qbar_row.end()) - qbar_row.begin());

  std::vector<std::size_t> donors;
  for (std::size_t a = 0; a < out.size(); ++a) {
    if (qbar_row[a] < qbar_row[best] && out[a] > 0.0) donors.push_back(a);
  }
  std::stable_sort(donors.begin(), donors.end(), [&](std::size_t x, std::size_t y) {
    return qbar_row[x] < qbar_row[y];
  });

  double budget = std::clamp(eta, 0.0, 1.0);
  for (std::size_t a : donors) {
    if (budget <= 0.0) break;
    const double moved = std::min(budget, out[a]);
    out[a] -= moved;
    out[best] += moved;
    budget -= moved;
  }
  return out;
}

double mean_model_value(std::span<const TabularModel> models,
                        const Policy& policy, double gamma,
                        std::span<const double> zeta) {
  double total = 0.0;
  for (const TabularModel& m : models) {
    total += expected_return(evaluate_policy(m, policy, gamma), zeta);
  }
  return total / static_cast<double>(models.size());
}

ConservativeResult conservative_update(const Policy& anchor,
                                       std::span<const TabularModel> models,
                                       double gamma, double eta,
                                       std::size_t sweeps,
                                       std::span<const double> zeta) {
  if (models.empty()) throw InvalidInput("conservative update needs at least one model");
  if (sweeps < 1) throw InvalidInput("conservative update needs at least one sweep");
  const std::size_t ns = anchor.n_states();
  const std::size_t na = anchor.n_actions();
  const double inv_n = 1.0 / static_cast<double>(models.size());

  ConservativeDiagnostics diag;
  Policy candidate = anchor;
  std::vector<double> qbar(ns * na);
  bool evaluated = false;
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    std::fill(qbar.begin(), qbar.end(), 0.0);
    double value = 0.0;
    for (const TabularModel& m : models) {
      const ValueBundle vb = evaluate_policy(m, candidate, gamma);
      for (std::size_t i = 0; i < qbar.size(); ++i) qbar[i] += inv_n * vb.q[i];
      value += inv_n * expected_return(vb, zeta);
    }
    if (sweep == 0) diag.mean_value_before = value;
    diag.mean_value_after = value;
    evaluated = true;

    Policy next = anchor;
    for (std::size_t s = 0; s < ns; ++s) {
      const std::vector<double> row = conservative_state_step(
          anchor.row(s), std::span<const double>(qbar.data() + s * na, na), eta);
      std::copy(row.begin(), row.end(), next.row(s).begin());
    }
    diag.sweeps_run = sweep + 1;
    if (next == candidate) break;
    candidate = std::move(next);
    evaluated = false;
  }
  if (!evaluated) diag.mean_value_after = mean_model_value(models, candidate, gamma, zeta);

  if (!(diag.mean_value_after >= diag.mean_value_before - 1e-12)) {
    diag.accepted = false;
    diag.mean_value_after = diag.mean_value_before;
    candidate = anchor;
  }
  for (std::size_t s = 0; s < ns; ++s) {
    diag.max_state_tv = std::max(diag.max_state_tv, tv_distance(candidate.row(s), anchor.row(s)));
  }
  return {std::move(candidate), diag};
}

Policy psrl_step(const PosteriorState& post, double gamma, Rng& rng) {
  return policy_iteration(sample_model(post, rng), gamma).policy;
}

Policy ofu_step(std::span<const TabularModel> models, double gamma,
                std::span<const double> zeta) {
  if (models.empty()) throw InvalidInput("optimistic step needs at least one model");
  std::optional<PlanResult> best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (const TabularModel& m : models) {
    PlanResult plan = policy_iteration(m, gamma);
    const double value = expected_return(plan.values, zeta);
    if (!best || value > best_value) {
      best_value = value;
      best = std::move(plan);
    }
  }
  return std::move(best->policy);
}

Policy greedy_step(const PosteriorState& post, double gamma) {
  return policy_iteration(mean_model(post), gamma).policy;
}

Agent::Agent(AgentSpec spec, std::size_t n_states, std::size_t n_actions,
             std::vector<double> zeta)
    : spec_(spec),
      zeta_(std::move(zeta)),
      prev_q_(Policy::uniform(n_states, n_actions)),
      prev_pi_(Policy::uniform(n_states, n_actions)) {
  spec_.validate();
}

CdpoIterationResult Agent::dual_step(const PosteriorState& post, Rng& rng,
                                     bool referential, bool conservative,
                                     double eta) {
  CdpoIterationResult res;
  if (referential) {
    const TabularModel reference = mean_model(post);
    res.q_t = referential_update(reference, spec_.gamma);
    const double v_q = expected_return(evaluate_policy(reference, res.q_t, spec_.gamma), zeta_);
    res.delta_t = v_q - expected_return(evaluate_policy(reference, prev_q_, spec_.gamma), zeta_);
    res.gap_to_previous_pi =
        v_q - expected_return(evaluate_policy(reference, prev_pi_, spec_.gamma), zeta_);
  } else {
    res.q_t = prev_pi_;
    res.delta_t = std::numeric_limits<double>::quiet_NaN();
    res.gap_to_previous_pi = std::numeric_limits<double>::quiet_NaN();
  }

  if (conservative) {
    const std::vector<TabularModel> models = sample_models(post, spec_.n_models, rng);
    ConservativeResult cons =
        conservative_update(res.q_t, models, spec_.gamma, eta, spec_.sweeps, zeta_);
    res.pi_t = std::move(cons.policy);
    res.mean_sampled_value_before = cons.diagnostics.mean_value_before;
    res.mean_sampled_value_after = cons.diagnostics.mean_value_after;
    res.max_state_tv = cons.diagnostics.max_state_tv;
    res.accepted = cons.diagnostics.accepted;
  } else {
    res.pi_t = res.q_t;
    res.mean_sampled_value_before = std::numeric_limits<double>::quiet_NaN();
    res.mean_sampled_value_after = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

AgentStep Agent::step(const PosteriorState& post, Rng& rng) {
  AgentStep out;
  switch (spec_.kind) {
    case AgentKind::kCdpo:
      out.cdpo = dual_step(post, rng, true, true, spec_.eta);
      break;
    case AgentKind::kCdpoUnconstrained:
      out.cdpo = dual_step(post, rng, true, true, 1.0);
      break;
    case AgentKind::kCdpoReferentialOnly:
      out.cdpo = dual_step(post, rng, true, false, spec_.eta);
      break;
    case AgentKind::kCdpoConservativeOnly:
      out.cdpo = dual_step(post, rng, false, true, spec_.eta);
      break;
    case AgentKind::kPsrl:
      out.executed = psrl_step(post, spec_.gamma, rng);
      break;
    case AgentKind::kOfu: {
      const std::vector<TabularModel> models = sample_models(post, spec_.n_models, rng);
      out.executed = ofu_step(models, spec_.gamma, zeta_);
      break;
    }
    case AgentKind::kGreedy:
      out.executed = greedy_step(post, spec_.gamma);
      break;
  }
  if (out.cdpo) {
    out.executed = out.cdpo->pi_t;
    prev_q_ = out.cdpo->q_t;
  } else {
    prev_q_ = out.executed;
  }
  prev_pi_ = out.executed;
  return out;
}

}  // namespace conserva
