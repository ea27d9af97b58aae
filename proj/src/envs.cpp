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

#include "conserva/envs.hpp"

#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <tuple>

#include "conserva/errors.hpp"

namespace conserva {

NChainParams NChainParams::from_length(std::size_t n) {
  if (n < 2) throw InvalidInput(fmt::format("chain length must be >= 2, got {}", n));
  const double len = static_cast<double>(n);
  return {n, 0.1 * std::exp(-len / 4.0), 1.0 - 1.0 / len};
}

void Environment::validate(double tol) const {
  model.validate(tol);
  const std::size_t cells = model.transitions().size();
  if (reward_std.size() != cells) {
    throw InvalidInput(fmt::format("reward_std has {} entries, expected {}",
                                   reward_std.size(), cells));
  }
  for (double sd : reward_std) {
    if (!(sd >= 0.0) || !std::isfinite(sd)) {
      throw InvalidInput(fmt::format("reward_std entry {} is invalid", sd));
    }
  }
  if (zeta.size() != model.n_states()) {
    throw InvalidInput(fmt::format("zeta has {} entries for {} states",
                                   zeta.size(), model.n_states()));
  }
  check_distribution(zeta, 1e-9, "initial distribution");
  if (horizon < 1) throw InvalidInput("horizon must be >= 1");
}

Environment build_nchain(std::size_t n, std::size_t horizon) {
  const NChainParams params = NChainParams::from_length(n);
  const std::size_t last = n - 1;
  TabularModel model(n, 2, ModelTag::kTrueEnv);
  std::vector<double> reward_std(n * 2 * n, 0.0);
  auto set_std = [&](std::size_t s, std::size_t a) {
    for (std::size_t next = 0; next < n; ++next) {
      reward_std[(s * 2 + a) * n + next] = params.delta;
    }
  };

  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t left_of = s == 0 ? 0 : s - 1;

    model.p(s, kLeft, left_of) = 1.0;
    set_std(s, kLeft);

    const double fail = 1.0 - params.success_prob;
    if (s < last) {
      model.p(s, kRight, s + 1) += params.success_prob;
      model.p(s, kRight, left_of) += fail;
      for (double& r : model.reward_row(s, kRight)) r = -params.delta;
    } else {
      model.p(s, kRight, 0) += params.success_prob;
      model.p(s, kRight, left_of) += fail;
      for (double& r : model.reward_row(s, kRight)) r = 1.0;
    }
    set_std(s, kRight);
  }

  Environment env;
  env.model = std::move(model);
  env.reward_std = std::move(reward_std);
  env.zeta.assign(n, 0.0);
  env.zeta[0] = 1.0;
  env.horizon = horizon == 0 ? 2 * n : horizon;
  return env;
}

std::size_t sample_categorical(std::span<const double> dist, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    acc += dist[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

std::vector<Transition> rollout(const Environment& env, const Policy& policy,
                                Rng rng, std::size_t t) {
  if (policy.n_states() != env.n_states() ||
      policy.n_actions() != env.n_actions()) {
    throw InvalidInput(fmt::format(
        "policy is {}x{} but environment is {}x{}", policy.n_states(),
        policy.n_actions(), env.n_states(), env.n_actions()));
  }
  std::vector<Transition> out;
  out.reserve(env.horizon);
  std::size_t s = sample_categorical(env.zeta, rng);
  for (std::size_t h = 0; h < env.horizon; ++h) {
    const std::size_t a = sample_categorical(policy.row(s), rng);
    const std::size_t next = sample_categorical(env.model.transition_row(s, a), rng);
    const std::size_t cell = (s * env.n_actions() + a) * env.n_states() + next;
    const double mean = env.model.reward_means()[cell];
    const double sd = env.reward_std[cell];
    double r = mean;
    if (sd > 0.0) r = std::normal_distribution<double>(mean, sd)(rng);
    out.push_back({s, a, r, next, t, h});
    s = next;
  }
  return out;
}

namespace {

struct OracleKey {
  std::vector<double> transition;
  std::vector<double> reward;
  std::size_t n_states;
  double gamma;

  bool operator<(const OracleKey& other) const {
    return std::tie(n_states, gamma, transition, reward) <
           std::tie(other.n_states, other.gamma, other.transition, other.reward);
  }
};

std::mutex& oracle_mutex() {
  static std::mutex m;
  return m;
}

std::map<OracleKey, std::shared_ptr<const PlanResult>>& oracle_cache() {
  static std::map<OracleKey, std::shared_ptr<const PlanResult>> cache;
  return cache;
}

}  // namespace

PlanResult oracle_solution(const Environment& env, double gamma) {
  OracleKey key{env.model.transitions(), env.model.reward_means(),
                env.n_states(), gamma};
  {
    std::lock_guard lock(oracle_mutex());
    auto it = oracle_cache().find(key);
    if (it != oracle_cache().end()) return *it->second;
  }
  auto solved = std::make_shared<const PlanResult>(policy_iteration(env.model, gamma));
  std::lock_guard lock(oracle_mutex());
  // Bounded: sweeps touch a handful of environments.
  if (oracle_cache().size() > 256) oracle_cache().clear();
  oracle_cache().emplace(std::move(key), solved);
  return *solved;
}

}  // namespace conserva
