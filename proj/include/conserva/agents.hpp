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

// Exploration strategies over a tabular posterior: the dual
// referential/conservative update, posterior sampling, optimism over a
// sampled ensemble, and greedy planning on the posterior mean.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conserva/bayes.hpp"
#include "conserva/mdp.hpp"
#include "conserva/rng.hpp"

namespace conserva {

enum class AgentKind {
  kCdpo,
  kPsrl,
  kOfu,
  kGreedy,
  kCdpoReferentialOnly,
  kCdpoConservativeOnly,
  kCdpoUnconstrained,
};

// CLI names: cdpo, psrl, ofu, greedy, cdpo-ref-only, cdpo-cons-only, cdpo-uncon.
std::string_view to_string(AgentKind kind);
AgentKind parse_agent_kind(std::string_view name);

struct AgentSpec {
  AgentKind kind = AgentKind::kCdpo;
  double eta = 0.2;          // per-state TV radius of the conservative step
  std::size_t n_models = 10;  // posterior samples per iteration
  std::size_t sweeps = 3;     // conservative improvement sweeps
  double gamma = 0.97;

  void validate() const;
};

// q_t = argmax_q V_q under the reference model (policy iteration).
Policy referential_update(const TabularModel& reference, double gamma);

// Exact maximizer of Σ_a p(a) qbar(a) over {p : TV(p, q_row) <= eta}: up to
// eta mass drained from the lowest-valued actions onto the best one.
std::vector<double> conservative_state_step(std::span<const double> q_row,
                                            std::span<const double> qbar_row,
                                            double eta);

struct ConservativeDiagnostics {
  double mean_value_before = 0.0;  // (1/N) Σ_n E_ζ[V^{f_n}_{anchor}]
  double mean_value_after = 0.0;   // same for the returned policy
  double max_state_tv = 0.0;
  std::size_t sweeps_run = 0;
  bool accepted = true;  // false when the safeguard fell back to the anchor
};

struct ConservativeResult {
  Policy policy;
  ConservativeDiagnostics diagnostics;
};

// Improvement sweeps on the ensemble-averaged Q, every state constrained to
// the TV ball around `anchor`; the candidate is returned only if it does not
// lower the ensemble-mean value, otherwise `anchor` is.
ConservativeResult conservative_update(const Policy& anchor,
                                       std::span<const TabularModel> models,
                                       double gamma, double eta,
                                       std::size_t sweeps,
                                       std::span<const double> zeta);

// (1/N) Σ_n Σ_s ζ(s) V^{f_n}_π(s)
double mean_model_value(std::span<const TabularModel> models,
                        const Policy& policy, double gamma,
                        std::span<const double> zeta);

Policy psrl_step(const PosteriorState& post, double gamma, Rng& rng);
Policy ofu_step(std::span<const TabularModel> models, double gamma,
                std::span<const double> zeta);
Policy greedy_step(const PosteriorState& post, double gamma);

struct CdpoIterationResult {
  Policy q_t;
  Policy pi_t;
  double delta_t = 0.0;  // E_ζ[V^{f̃_t}_{q_t} - V^{f̃_t}_{q_{t-1}}]; NaN without a referential step
  double mean_sampled_value_before = 0.0;
  double mean_sampled_value_after = 0.0;
  double max_state_tv = 0.0;
  bool accepted = true;
  // E_ζ[V^{f̃_t}_{q_t} - V^{f̃_t}_{π_{t-1}}]
  double gap_to_previous_pi = 0.0;
};

struct AgentStep {
  Policy executed;
  std::optional<CdpoIterationResult> cdpo;
};

// One agent over one run. Keeps q_{t-1} and π_{t-1}; both start uniform.
class Agent {
 public:
  Agent(AgentSpec spec, std::size_t n_states, std::size_t n_actions,
        std::vector<double> zeta);

  const AgentSpec& spec() const { return spec_; }

  // All randomness (posterior samples) comes from `rng`.
  AgentStep step(const PosteriorState& post, Rng& rng);

 private:
  CdpoIterationResult dual_step(const PosteriorState& post, Rng& rng,
                                bool referential, bool conservative, double eta);

  AgentSpec spec_;
  std::vector<double> zeta_;
  Policy prev_q_;
  Policy prev_pi_;
};

}  // namespace conserva
