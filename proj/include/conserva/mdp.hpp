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

// Exact discounted tabular-MDP mathematics: policy evaluation by direct
// linear solve, policy iteration, discounted visitation measures and policy
// distances. Everything here is a pure function of its arguments.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace conserva {

enum class ModelTag { kTrueEnv, kSampled, kReference };

// Transition table P[s][a][s'] and per-outcome reward means r(s,a,s'),
// stored flat in (s, a, s') order.
class TabularModel {
 public:
  TabularModel() = default;
  // All-zero tables; fill rows before use.
  TabularModel(std::size_t n_states, std::size_t n_actions,
               ModelTag tag = ModelTag::kTrueEnv);
  TabularModel(std::size_t n_states, std::size_t n_actions,
               std::vector<double> transition, std::vector<double> reward_mean,
               ModelTag tag);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  ModelTag tag() const { return tag_; }
  void set_tag(ModelTag tag) { tag_ = tag; }

  double& p(std::size_t s, std::size_t a, std::size_t next) {
    return transition_[index(s, a, next)];
  }
  double p(std::size_t s, std::size_t a, std::size_t next) const {
    return transition_[index(s, a, next)];
  }
  double& r(std::size_t s, std::size_t a, std::size_t next) {
    return reward_mean_[index(s, a, next)];
  }
  double r(std::size_t s, std::size_t a, std::size_t next) const {
    return reward_mean_[index(s, a, next)];
  }

  std::span<double> transition_row(std::size_t s, std::size_t a) {
    return {transition_.data() + index(s, a, 0), n_states_};
  }
  std::span<const double> transition_row(std::size_t s, std::size_t a) const {
    return {transition_.data() + index(s, a, 0), n_states_};
  }
  std::span<double> reward_row(std::size_t s, std::size_t a) {
    return {reward_mean_.data() + index(s, a, 0), n_states_};
  }
  std::span<const double> reward_row(std::size_t s, std::size_t a) const {
    return {reward_mean_.data() + index(s, a, 0), n_states_};
  }

  const std::vector<double>& transitions() const { return transition_; }
  const std::vector<double>& reward_means() const { return reward_mean_; }

  // r̄(s,a) = Σ_{s'} P(s'|s,a) r(s,a,s')
  double expected_reward(std::size_t s, std::size_t a) const;

  // Throws InvalidInput on a row that is not a distribution within `tol`
  // or a non-finite reward.
  void validate(double tol = 1e-12) const;

  bool operator==(const TabularModel&) const = default;

 private:
  std::size_t index(std::size_t s, std::size_t a, std::size_t next) const {
    return (s * n_actions_ + a) * n_states_ + next;
  }

  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> transition_;
  std::vector<double> reward_mean_;
  ModelTag tag_ = ModelTag::kTrueEnv;
};

// Stochastic tabular policy π(a|s).
class Policy {
 public:
  Policy() = default;
  Policy(std::size_t n_states, std::size_t n_actions,
         std::vector<double> probs);

  static Policy uniform(std::size_t n_states, std::size_t n_actions);
  static Policy deterministic(std::span<const std::size_t> actions,
                             std::size_t n_actions);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  double& operator()(std::size_t s, std::size_t a) {
    return probs_[s * n_actions_ + a];
  }
  double operator()(std::size_t s, std::size_t a) const {
    return probs_[s * n_actions_ + a];
  }
  std::span<double> row(std::size_t s) {
    return {probs_.data() + s * n_actions_, n_actions_};
  }
  std::span<const double> row(std::size_t s) const {
    return {probs_.data() + s * n_actions_, n_actions_};
  }
  const std::vector<double>& probs() const { return probs_; }

  bool is_deterministic() const;
  // Most probable action at s, lowest index on ties.
  std::size_t mode(std::size_t s) const;

  void validate(double tol = 1e-12) const;

  bool operator==(const Policy&) const = default;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> probs_;
};

struct ValueBundle {
  std::vector<double> v;          // V(s)
  std::vector<double> q;          // Q(s,a), row-major over actions
  std::vector<double> advantage;  // Q(s,a) - V(s)
  std::size_t n_actions = 0;
  double gamma = 0.0;

  double q_at(std::size_t s, std::size_t a) const { return q[s * n_actions + a]; }
  double advantage_at(std::size_t s, std::size_t a) const {
    return advantage[s * n_actions + a];
  }
};

struct VisitationMeasures {
  std::vector<double> nu;   // ν(s)
  std::vector<double> rho;  // ρ(s,a), row-major over actions
  double gamma = 0.0;
};

struct PlanResult {
  Policy policy;
  ValueBundle values;
};

// Systems with at most this many states are solved directly; larger ones
// fall back to Gauss-Seidel sweeps down to kIterativeResidual.
inline constexpr std::size_t kDirectSolveMaxStates = 2000;
inline constexpr double kIterativeResidual = 1e-10;

ValueBundle evaluate_policy(const TabularModel& model, const Policy& policy,
                            double gamma);

// Deterministic optimal policy; argmax ties go to the lowest action index.
PlanResult policy_iteration(const TabularModel& model, double gamma);

VisitationMeasures visitation(const TabularModel& model, const Policy& policy,
                              double gamma, std::span<const double> zeta);

// Half-L1 convention: shifting mass m between entries costs exactly m.
double tv_distance(std::span<const double> p, std::span<const double> q);

// Σ_s ζ(s) V(s)
double expected_return(const ValueBundle& bundle, std::span<const double> zeta);

// Row-stochastic P_π(s, s') = Σ_a π(a|s) P(s'|s,a), flat row-major.
std::vector<double> policy_transition(const TabularModel& model,
                                      const Policy& policy);
// r_π(s) = Σ_a π(a|s) r̄(s,a)
std::vector<double> policy_reward(const TabularModel& model,
                                  const Policy& policy);

// Throws InvalidInput if `dist` is not a probability vector within `tol`.
void check_distribution(std::span<const double> dist, double tol,
                        const char* what);

}  // namespace conserva
