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

#include "conserva/mdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "conserva/errors.hpp"
#include "conserva/kernels.hpp"

namespace conserva {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput(fmt::format("discount must lie in (0,1), got {}", gamma));
  }
}

void check_dims(const TabularModel& model, const Policy& policy) {
  if (model.n_states() == 0 || model.n_actions() == 0) {
    throw InvalidInput("model has no states or no actions");
  }
  if (model.n_states() != policy.n_states() ||
      model.n_actions() != policy.n_actions()) {
    throw InvalidInput(fmt::format(
        "model is {}x{} but policy is {}x{}", model.n_states(),
        model.n_actions(), policy.n_states(), policy.n_actions()));
  }
}

std::vector<double> q_from_values(const TabularModel& model,
                                  std::span<const double> v, double gamma) {
  const std::size_t n_states = model.n_states();
  const std::size_t n_actions = model.n_actions();
  std::vector<double> q(n_states * n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      q[s * n_actions + a] = model.expected_reward(s, a) +
                             gamma * kernels::dot(model.transition_row(s, a), v);
    }
  }
  return q;
}

std::vector<double> solve_direct(const TabularModel& model,
                                 const Policy& policy, double gamma) {
  const auto n = static_cast<Eigen::Index>(model.n_states());
  const std::vector<double> p_pi = policy_transition(model, policy);
  const std::vector<double> r_pi = policy_reward(model, policy);

  RowMatrix system = -gamma * Eigen::Map<const RowMatrix>(p_pi.data(), n, n);
  system.diagonal().array() += 1.0;
  const Eigen::Map<const Eigen::VectorXd> rhs(r_pi.data(), n);

  Eigen::PartialPivLU<RowMatrix> lu(system);
  Eigen::VectorXd v = lu.solve(rhs);
  // One refinement step; the lemma identities are checked near 1e-12.
  const Eigen::VectorXd residual = rhs - system * v;
  v += lu.solve(residual);
  if (!v.allFinite()) throw InternalError("policy evaluation solve produced non-finite values");
  return {v.data(), v.data() + n};
}

std::vector<double> solve_iterative(const TabularModel& model,
                                    const Policy& policy, double gamma) {
  const std::size_t n_states = model.n_states();
  const std::size_t n_actions = model.n_actions();
  std::vector<double> r_bar(n_states * n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      r_bar[s * n_actions + a] = model.expected_reward(s, a);
    }
  }
  auto backup = [&](const std::vector<double>& v, std::size_t s) {
    double out = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0) continue;
      out += pa * (r_bar[s * n_actions + a] +
                   gamma * kernels::dot(model.transition_row(s, a), v));
    }
    return out;
  };

  std::vector<double> v(n_states, 0.0);
  constexpr int kMaxSweeps = 1'000'000;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    for (std::size_t s = 0; s < n_states; ++s) v[s] = backup(v, s);
    double residual = 0.0;
    for (std::size_t s = 0; s < n_states; ++s) {
      residual = std::max(residual, std::fabs(backup(v, s) - v[s]));
    }
    if (residual <= kIterativeResidual) return v;
  }
  throw InternalError("iterative policy evaluation did not converge");
}

}  // namespace

// ---------------------------------------------------------------------------
// TabularModel

TabularModel::TabularModel(std::size_t n_states, std::size_t n_actions,
                           ModelTag tag)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(n_states * n_actions * n_states, 0.0),
      reward_mean_(n_states * n_actions * n_states, 0.0),
      tag_(tag) {}

TabularModel::TabularModel(std::size_t n_states, std::size_t n_actions,
                           std::vector<double> transition,
                           std::vector<double> reward_mean, ModelTag tag)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_mean_(std::move(reward_mean)),
      tag_(tag) {
  const std::size_t expected = n_states * n_actions * n_states;
  if (transition_.size() != expected || reward_mean_.size() != expected) {
    throw InvalidInput(fmt::format(
        "tables for a {}x{} model need {} entries, got {} and {}", n_states,
        n_actions, expected, transition_.size(), reward_mean_.size()));
  }
}

double TabularModel::expected_reward(std::size_t s, std::size_t a) const {
  return kernels::dot(transition_row(s, a), reward_row(s, a));
}

void TabularModel::validate(double tol) const {
  if (n_states_ == 0 || n_actions_ == 0) {
    throw InvalidInput("model has no states or no actions");
  }
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      double total = 0.0;
      for (double p : transition_row(s, a)) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw InvalidInput(fmt::format(
              "transition row (s={}, a={}) has an invalid entry {}", s, a, p));
        }
        total += p;
      }
      if (std::fabs(total - 1.0) > tol) {
        throw InvalidInput(fmt::format(
            "transition row (s={}, a={}) sums to {:.17g}", s, a, total));
      }
      for (double r : reward_row(s, a)) {
        if (!std::isfinite(r)) {
          throw InvalidInput(
              fmt::format("reward (s={}, a={}) is not finite", s, a));
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(std::size_t n_states, std::size_t n_actions,
               std::vector<double> probs)
    : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
  if (probs_.size() != n_states * n_actions) {
    throw InvalidInput(fmt::format("policy {}x{} needs {} entries, got {}",
                                   n_states, n_actions, n_states * n_actions,
                                   probs_.size()));
  }
}

Policy Policy::uniform(std::size_t n_states, std::size_t n_actions) {
  if (n_actions == 0) throw InvalidInput("policy needs at least one action");
  return Policy(n_states, n_actions,
                std::vector<double>(n_states * n_actions,
                                    1.0 / static_cast<double>(n_actions)));
}

Policy Policy::deterministic(std::span<const std::size_t> actions,
                             std::size_t n_actions) {
  std::vector<double> probs(actions.size() * n_actions, 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= n_actions) {
      throw InvalidInput(fmt::format("action {} out of range at state {}",
                                     actions[s], s));
    }
    probs[s * n_actions + actions[s]] = 1.0;
  }
  return Policy(actions.size(), n_actions, std::move(probs));
}

bool Policy::is_deterministic() const {
  return std::all_of(probs_.begin(), probs_.end(),
                     [](double p) { return p == 0.0 || p == 1.0; });
}

std::size_t Policy::mode(std::size_t s) const {
  const auto r = row(s);
  return static_cast<std::size_t>(std::max_element(r.begin(), r.end()) -
                                  r.begin());
}

void Policy::validate(double tol) const {
  for (std::size_t s = 0; s < n_states_; ++s) {
    check_distribution(row(s), tol, "policy row");
  }
}

// ---------------------------------------------------------------------------
// Operations

void check_distribution(std::span<const double> dist, double tol,
                        const char* what) {
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= -tol && p <= 1.0 + tol)) {
      throw InvalidInput(fmt::format("{} has entry {} outside [0,1]", what, p));
    }
    total += p;
  }
  if (std::fabs(total - 1.0) > tol) {
    throw InvalidInput(fmt::format("{} sums to {:.17g}", what, total));
  }
}

std::vector<double> policy_transition(const TabularModel& model,
                                      const Policy& policy) {
  const std::size_t n = model.n_states();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    std::span<double> dest(out.data() + s * n, n);
    for (std::size_t a = 0; a < model.n_actions(); ++a) {
      const double pa = policy(s, a);
      if (pa != 0.0) kernels::axpy(pa, model.transition_row(s, a), dest);
    }
  }
  return out;
}

std::vector<double> policy_reward(const TabularModel& model,
                                  const Policy& policy) {
  std::vector<double> out(model.n_states(), 0.0);
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    for (std::size_t a = 0; a < model.n_actions(); ++a) {
      const double pa = policy(s, a);
      if (pa != 0.0) out[s] += pa * model.expected_reward(s, a);
    }
  }
  return out;
}

ValueBundle evaluate_policy(const TabularModel& model, const Policy& policy,
                            double gamma) {
  check_gamma(gamma);
  check_dims(model, policy);
  model.validate();
  policy.validate();

  ValueBundle out;
  out.gamma = gamma;
  out.n_actions = model.n_actions();
  out.v = model.n_states() <= kDirectSolveMaxStates
              ? solve_direct(model, policy, gamma)
              : solve_iterative(model, policy, gamma);
  out.q = q_from_values(model, out.v, gamma);
  out.advantage.resize(out.q.size());
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    for (std::size_t a = 0; a < model.n_actions(); ++a) {
      const std::size_t i = s * model.n_actions() + a;
      out.advantage[i] = out.q[i] - out.v[s];
    }
  }
  return out;
}

PlanResult policy_iteration(const TabularModel& model, double gamma) {
  check_gamma(gamma);
  model.validate();
  const std::size_t n_states = model.n_states();
  const std::size_t n_actions = model.n_actions();

  std::vector<std::size_t> actions(n_states, 0);
  Policy policy = Policy::deterministic(actions, n_actions);
  const std::size_t max_rounds = n_states * n_actions + 100;

  for (std::size_t round = 0; round < max_rounds; ++round) {
    ValueBundle values = evaluate_policy(model, policy, gamma);
    bool changed = false;
    for (std::size_t s = 0; s < n_states; ++s) {
      double best = values.q_at(s, 0);
      for (std::size_t a = 1; a < n_actions; ++a) best = std::max(best, values.q_at(s, a));
      // Values within a relative 1e-12 of the max count as ties so that
      // rounding noise cannot flip the lowest-index choice.
      const double tie = 1e-12 * std::max(1.0, std::fabs(best));
      std::size_t pick = 0;
      while (values.q_at(s, pick) < best - tie) ++pick;
      if (pick != actions[s]) {
        actions[s] = pick;
        changed = true;
      }
    }
    if (!changed) return {std::move(policy), std::move(values)};
    policy = Policy::deterministic(actions, n_actions);
  }
  throw InternalError(fmt::format(
      "policy iteration did not converge after {} rounds", max_rounds));
}

VisitationMeasures visitation(const TabularModel& model, const Policy& policy,
                              double gamma, std::span<const double> zeta) {
  check_gamma(gamma);
  check_dims(model, policy);
  if (zeta.size() != model.n_states()) {
    throw InvalidInput(fmt::format("initial distribution has {} entries for {} states",
                                   zeta.size(), model.n_states()));
  }
  check_distribution(zeta, 1e-9, "initial distribution");
  model.validate();
  policy.validate();

  const auto n = static_cast<Eigen::Index>(model.n_states());
  const std::vector<double> p_pi = policy_transition(model, policy);
  RowMatrix system = -gamma * Eigen::Map<const RowMatrix>(p_pi.data(), n, n);
  system.diagonal().array() += 1.0;

  // ν solves νᵀ (I - γP_π) = (1-γ) ζᵀ
  const RowMatrix lhs = system.transpose();
  const Eigen::Map<const Eigen::VectorXd> rhs(zeta.data(), n);
  Eigen::PartialPivLU<RowMatrix> lu(lhs);
  Eigen::VectorXd x = lu.solve(rhs);
  x += lu.solve(Eigen::VectorXd(rhs - lhs * x));
  if (!x.allFinite()) throw InternalError("visitation solve is singular");
  x *= (1.0 - gamma);
  x /= x.sum();

  VisitationMeasures out;
  out.gamma = gamma;
  out.nu.assign(x.data(), x.data() + n);
  out.rho.resize(model.n_states() * model.n_actions());
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    for (std::size_t a = 0; a < model.n_actions(); ++a) {
      out.rho[s * model.n_actions() + a] = out.nu[s] * policy(s, a);
    }
  }
  return out;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw InvalidInput(fmt::format(
        "tv_distance on distributions of length {} and {}", p.size(), q.size()));
  }
  return 0.5 * kernels::l1_distance(p, q);
}

double expected_return(const ValueBundle& bundle,
                       std::span<const double> zeta) {
  if (zeta.size() != bundle.v.size()) {
    throw InvalidInput(fmt::format("initial distribution has {} entries for {} states",
                                   zeta.size(), bundle.v.size()));
  }
  return kernels::dot(zeta, bundle.v);
}

}  // namespace conserva
