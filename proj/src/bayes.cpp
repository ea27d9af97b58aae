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

#include "conserva/bayes.hpp"

#include <cmath>
#include <fmt/format.h>
#include <random>
#include <utility>

#include "conserva/errors.hpp"
#include "conserva/kernels.hpp"

namespace conserva {

void PriorSpec::validate() const {
  if (!(dirichlet_alpha > 0.0) || !(reward.kappa > 0.0) ||
      !(reward.alpha > 0.0) || !(reward.beta > 0.0) || !std::isfinite(reward.mu)) {
    throw InvalidInput(fmt::format(
        "prior hyperparameters must be positive (alpha0={}, kappa0={}, a0={}, b0={})",
        dirichlet_alpha, reward.kappa, reward.alpha, reward.beta));
  }
}

Prior Prior::uniform(std::size_t n_states, std::size_t n_actions,
                     const PriorSpec& spec) {
  spec.validate();
  if (n_states == 0 || n_actions == 0) {
    throw InvalidInput("posterior needs at least one state and one action");
  }
  Prior prior;
  prior.n_states_ = n_states;
  prior.n_actions_ = n_actions;
  const std::size_t cells = n_states * n_actions * n_states;
  prior.alpha_.assign(cells, spec.dirichlet_alpha);
  prior.reward_.assign(cells, spec.reward);
  return prior;
}

Prior Prior::concentrated(const TabularModel& truth, double strength) {
  truth.validate();
  if (!(strength > 0.0)) throw InvalidInput("concentration strength must be positive");
  Prior prior;
  prior.n_states_ = truth.n_states();
  prior.n_actions_ = truth.n_actions();
  const std::size_t cells = truth.transitions().size();
  prior.alpha_.resize(cells);
  prior.reward_.resize(cells);
  // Zero-probability outcomes keep a vanishing but positive concentration.
  constexpr double kFloor = 1e-9;
  for (std::size_t i = 0; i < cells; ++i) {
    prior.alpha_[i] = strength * truth.transitions()[i] + kFloor;
    prior.reward_[i] = {truth.reward_means()[i], strength, strength,
                        strength * 1e-12};
  }
  return prior;
}

Prior Prior::from_tables(std::size_t n_states, std::size_t n_actions,
                         std::vector<double> alpha,
                         std::vector<NormalGamma> reward) {
  const std::size_t cells = n_states * n_actions * n_states;
  if (cells == 0) throw InvalidInput("posterior needs at least one state and one action");
  if (alpha.size() != cells || reward.size() != cells) {
    throw InvalidInput("prior tables do not match the model shape");
  }
  for (std::size_t i = 0; i < cells; ++i) {
    PriorSpec{alpha[i], reward[i]}.validate();
  }
  Prior prior;
  prior.n_states_ = n_states;
  prior.n_actions_ = n_actions;
  prior.alpha_ = std::move(alpha);
  prior.reward_ = std::move(reward);
  return prior;
}

void RewardStats::add(double x) {
  ++count;
  const double d = x - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (x - mean);
}

void RewardStats::merge(const RewardStats& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double n_a = static_cast<double>(count);
  const double n_b = static_cast<double>(other.count);
  const double n = n_a + n_b;
  const double d = other.mean - mean;
  mean += d * n_b / n;
  m2 += other.m2 + d * d * n_a * n_b / n;
  count += other.count;
}

PosteriorState::PosteriorState(Prior prior)
    : prior_(std::move(prior)),
      counts_(prior_.n_states() * prior_.n_actions() * prior_.n_states(), 0),
      n_obs_(prior_.n_states() * prior_.n_actions(), 0),
      rewards_(counts_.size()) {}

double PosteriorState::alpha(std::size_t s, std::size_t a, std::size_t next) const {
  const std::size_t c = cell(s, a, next);
  return prior_.alpha(c) + static_cast<double>(counts_[c]);
}

std::vector<double> PosteriorState::alpha_row(std::size_t s, std::size_t a) const {
  std::vector<double> row(n_states());
  for (std::size_t next = 0; next < n_states(); ++next) row[next] = alpha(s, a, next);
  return row;
}

NormalGamma PosteriorState::reward_posterior(std::size_t s, std::size_t a,
                                             std::size_t next) const {
  const std::size_t c = cell(s, a, next);
  const NormalGamma& p0 = prior_.reward(c);
  const RewardStats& st = rewards_[c];
  if (st.count == 0) return p0;
  const double m = static_cast<double>(st.count);
  NormalGamma out;
  out.kappa = p0.kappa + m;
  out.mu = (p0.kappa * p0.mu + m * st.mean) / out.kappa;
  out.alpha = p0.alpha + 0.5 * m;
  const double shift = st.mean - p0.mu;
  out.beta = p0.beta + 0.5 * st.m2 + p0.kappa * m * shift * shift / (2.0 * out.kappa);
  return out;
}

void PosteriorState::absorb(std::span<const Transition> batch) {
  const std::size_t ns = n_states();
  const std::size_t na = n_actions();
  for (const Transition& tr : batch) {
    if (tr.s >= ns || tr.s_next >= ns || tr.a >= na) {
      throw InvalidInput(fmt::format("transition ({}, {}, {}) out of range for {}x{} posterior",
                                     tr.s, tr.a, tr.s_next, ns, na));
    }
  }
  for (const Transition& tr : batch) {
    const std::size_t c = cell(tr.s, tr.a, tr.s_next);
    ++counts_[c];
    ++n_obs_[tr.s * na + tr.a];
    rewards_[c].add(tr.r);
  }
}

PosteriorState init_posterior(std::size_t n_states, std::size_t n_actions,
                              const PriorSpec& spec) {
  return PosteriorState(Prior::uniform(n_states, n_actions, spec));
}

PosteriorState update_posterior(PosteriorState post,
                                std::span<const Transition> batch) {
  post.absorb(batch);
  return post;
}

namespace {

void sample_dirichlet(const PosteriorState& post, std::size_t s, std::size_t a,
                      std::span<double> out, Rng& rng) {
  double total = 0.0;
  for (std::size_t next = 0; next < out.size(); ++next) {
    std::gamma_distribution<double> g(post.alpha(s, a, next), 1.0);
    out[next] = g(rng);
    total += out[next];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    // Every gamma draw underflowed; only possible with tiny concentrations.
    const std::vector<double> alpha = post.alpha_row(s, a);
    double sum = 0.0;
    for (double x : alpha) sum += x;
    for (std::size_t next = 0; next < out.size(); ++next) out[next] = alpha[next] / sum;
    return;
  }
  for (double& x : out) x /= total;
}

double sample_reward_mean(const NormalGamma& ng, Rng& rng) {
  // Marginal of the mean: μ + sqrt(β / (α κ)) · t_{2α}
  std::student_t_distribution<double> t(2.0 * ng.alpha);
  return ng.mu + std::sqrt(ng.beta / (ng.alpha * ng.kappa)) * t(rng);
}

}  // namespace

TabularModel sample_model(const PosteriorState& post, Rng& rng) {
  const std::size_t ns = post.n_states();
  const std::size_t na = post.n_actions();
  TabularModel model(ns, na, ModelTag::kSampled);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      sample_dirichlet(post, s, a, model.transition_row(s, a), rng);
      for (std::size_t next = 0; next < ns; ++next) {
        model.r(s, a, next) = sample_reward_mean(post.reward_posterior(s, a, next), rng);
      }
    }
  }
  return model;
}

Environment sample_environment(const PosteriorState& post, Rng& rng,
                               std::vector<double> zeta, std::size_t horizon) {
  const std::size_t ns = post.n_states();
  const std::size_t na = post.n_actions();
  Environment env;
  env.model = TabularModel(ns, na, ModelTag::kTrueEnv);
  env.reward_std.assign(ns * na * ns, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      sample_dirichlet(post, s, a, env.model.transition_row(s, a), rng);
      for (std::size_t next = 0; next < ns; ++next) {
        const NormalGamma ng = post.reward_posterior(s, a, next);
        // λ ~ Gamma(shape α, rate β); μ | λ ~ N(μ0, 1/(κλ))
        const double precision = std::gamma_distribution<double>(ng.alpha, 1.0 / ng.beta)(rng);
        const double sd = 1.0 / std::sqrt(precision);
        env.model.r(s, a, next) =
            std::normal_distribution<double>(ng.mu, sd / std::sqrt(ng.kappa))(rng);
        env.reward_std[post.cell(s, a, next)] = sd;
      }
    }
  }
  env.zeta = std::move(zeta);
  env.horizon = horizon;
  env.validate();
  return env;
}

TabularModel mean_model(const PosteriorState& post) {
  const std::size_t ns = post.n_states();
  const std::size_t na = post.n_actions();
  TabularModel model(ns, na, ModelTag::kReference);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const std::vector<double> alpha = post.alpha_row(s, a);
      double total = 0.0;
      for (double x : alpha) total += x;
      for (std::size_t next = 0; next < ns; ++next) {
        model.p(s, a, next) = alpha[next] / total;
        model.r(s, a, next) = post.reward_posterior(s, a, next).mu;
      }
    }
  }
  return model;
}

double ensemble_width(std::span<const TabularModel> models, std::size_t s,
                      std::size_t a) {
  if (models.size() < 2) {
    throw InvalidInput(fmt::format("ensemble width needs >= 2 models, got {}", models.size()));
  }
  double widest = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      widest = std::max(widest, kernels::l1_distance(models[i].transition_row(s, a),
                                                     models[j].transition_row(s, a)));
    }
  }
  return widest;
}

QSnapshot summarize_optimal_q(std::span<const TabularModel> models, double gamma) {
  if (models.size() < 2) {
    throw InvalidInput(fmt::format("Q snapshot needs >= 2 models, got {}", models.size()));
  }
  QSnapshot snap;
  snap.n_states = models.front().n_states();
  snap.n_actions = models.front().n_actions();
  snap.k = models.size();
  const std::size_t cells = snap.n_states * snap.n_actions;
  snap.mean_q.assign(cells, 0.0);
  snap.std_q.assign(cells, 0.0);

  // Welford across models.
  for (std::size_t i = 0; i < models.size(); ++i) {
    const PlanResult plan = policy_iteration(models[i], gamma);
    for (std::size_t c = 0; c < cells; ++c) {
      const double x = plan.values.q[c];
      const double d = x - snap.mean_q[c];
      snap.mean_q[c] += d / static_cast<double>(i + 1);
      snap.std_q[c] += d * (x - snap.mean_q[c]);
    }
  }
  for (double& m2 : snap.std_q) {
    m2 = std::sqrt(std::max(0.0, m2) / static_cast<double>(models.size() - 1));
  }
  return snap;
}

QSnapshot q_posterior_snapshot(const PosteriorState& post, std::size_t k,
                               double gamma, Rng& rng, std::size_t iteration) {
  if (k < 2) throw InvalidInput(fmt::format("Q snapshot needs k >= 2, got {}", k));
  std::vector<TabularModel> models;
  models.reserve(k);
  for (std::size_t i = 0; i < k; ++i) models.push_back(sample_model(post, rng));
  QSnapshot snap = summarize_optimal_q(models, gamma);
  snap.iteration = iteration;
  snap.n_obs.resize(post.n_states() * post.n_actions());
  for (std::size_t s = 0; s < post.n_states(); ++s) {
    for (std::size_t a = 0; a < post.n_actions(); ++a) {
      snap.n_obs[s * post.n_actions() + a] = post.n_obs(s, a);
    }
  }
  return snap;
}

}  // namespace conserva
