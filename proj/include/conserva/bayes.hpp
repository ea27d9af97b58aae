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

// Conjugate posterior over tabular MDPs: a Dirichlet over next states for
// every (s,a) and a Normal-Gamma over the reward of every (s,a,s').

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "conserva/envs.hpp"
#include "conserva/mdp.hpp"
#include "conserva/rng.hpp"

namespace conserva {

struct NormalGamma {
  double mu = 0.0;
  double kappa = 1.0;
  double alpha = 1.0;
  double beta = 1.0;

  bool operator==(const NormalGamma&) const = default;
};

struct PriorSpec {
  double dirichlet_alpha = 1.0;
  NormalGamma reward{};

  void validate() const;
};

// Per-cell prior hyperparameters.
class Prior {
 public:
  static Prior uniform(std::size_t n_states, std::size_t n_actions,
                       const PriorSpec& spec = {});
  // A posterior-to-be that is effectively a point mass at `truth`: huge
  // Dirichlet concentration on its rows and a near-zero-variance reward
  // belief at its means.
  static Prior concentrated(const TabularModel& truth, double strength = 1e12);
  // Explicit per-(s,a,s') hyperparameters in model layout.
  static Prior from_tables(std::size_t n_states, std::size_t n_actions,
                           std::vector<double> alpha,
                           std::vector<NormalGamma> reward);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double alpha(std::size_t cell) const { return alpha_[cell]; }
  const NormalGamma& reward(std::size_t cell) const { return reward_[cell]; }

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> alpha_;
  std::vector<NormalGamma> reward_;
};

// Count, mean and sum of squared deviations of the rewards seen in a cell.
struct RewardStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const RewardStats& other);
};

class PosteriorState {
 public:
  explicit PosteriorState(Prior prior);

  std::size_t n_states() const { return prior_.n_states(); }
  std::size_t n_actions() const { return prior_.n_actions(); }
  const Prior& prior() const { return prior_; }

  std::size_t cell(std::size_t s, std::size_t a, std::size_t next) const {
    return (s * n_actions() + a) * n_states() + next;
  }

  std::uint64_t count(std::size_t s, std::size_t a, std::size_t next) const {
    return counts_[cell(s, a, next)];
  }
  std::uint64_t n_obs(std::size_t s, std::size_t a) const {
    return n_obs_[s * n_actions() + a];
  }
  double alpha(std::size_t s, std::size_t a, std::size_t next) const;
  std::vector<double> alpha_row(std::size_t s, std::size_t a) const;
  const RewardStats& reward_stats(std::size_t s, std::size_t a,
                                  std::size_t next) const {
    return rewards_[cell(s, a, next)];
  }
  NormalGamma reward_posterior(std::size_t s, std::size_t a,
                               std::size_t next) const;

  // In-place conjugate update. Throws InvalidInput on out-of-range ids.
  void absorb(std::span<const Transition> batch);

 private:
  Prior prior_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> n_obs_;
  std::vector<RewardStats> rewards_;
};

PosteriorState init_posterior(std::size_t n_states, std::size_t n_actions,
                              const PriorSpec& spec = {});

PosteriorState update_posterior(PosteriorState post,
                                std::span<const Transition> batch);

// Dirichlet rows; reward means from the Student-t marginal of the NG belief.
TabularModel sample_model(const PosteriorState& post, Rng& rng);

// Full environment draw (transition rows, reward mean and reward precision)
// for Bayes-regret runs where the true MDP itself comes from the prior.
Environment sample_environment(const PosteriorState& post, Rng& rng,
                               std::vector<double> zeta, std::size_t horizon);

// Dirichlet means and posterior reward means.
TabularModel mean_model(const PosteriorState& post);

// Largest pairwise L1 distance between the models' transition rows at (s,a).
double ensemble_width(std::span<const TabularModel> models, std::size_t s,
                      std::size_t a);

struct QSnapshot {
  std::vector<double> mean_q;  // per (s,a), row-major over actions
  std::vector<double> std_q;
  std::vector<std::uint64_t> n_obs;
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t k = 0;
  std::size_t iteration = 0;

  double mean_at(std::size_t s, std::size_t a) const { return mean_q[s * n_actions + a]; }
  double std_at(std::size_t s, std::size_t a) const { return std_q[s * n_actions + a]; }
};

// Optimal-Q mean and sample standard deviation over the given models.
QSnapshot summarize_optimal_q(std::span<const TabularModel> models, double gamma);

QSnapshot q_posterior_snapshot(const PosteriorState& post, std::size_t k,
                               double gamma, Rng& rng, std::size_t iteration = 0);

}  // namespace conserva
