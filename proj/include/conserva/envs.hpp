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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "conserva/mdp.hpp"
#include "conserva/rng.hpp"

namespace conserva {

// Action ids in chain environments.
inline constexpr std::size_t kLeft = 0;
inline constexpr std::size_t kRight = 1;

struct NChainParams {
  std::size_t n = 0;
  double delta = 0.0;         // reward-noise scale, 0.1·exp(-n/4)
  double success_prob = 0.0;  // 1 - 1/n

  static NChainParams from_length(std::size_t n);
};

// A real environment: true dynamics plus the Gaussian reward noise the
// agent observes. Immutable once built.
struct Environment {
  TabularModel model;
  std::vector<double> reward_std;  // σ_r(s,a,s'), same layout as the model
  std::vector<double> zeta;        // initial state distribution
  std::size_t horizon = 1;

  std::size_t n_states() const { return model.n_states(); }
  std::size_t n_actions() const { return model.n_actions(); }

  void validate(double tol = 1e-12) const;
};

struct Transition {
  std::size_t s = 0;
  std::size_t a = 0;
  double r = 0.0;
  std::size_t s_next = 0;
  std::size_t t = 0;
  std::size_t h = 0;
};

// States s1..sN are ids 0..n-1; start at s1; horizon defaults to 2n.
Environment build_nchain(std::size_t n, std::size_t horizon = 0);

Environment load_mdp(const std::filesystem::path& path);
void save_mdp(const Environment& env, const std::filesystem::path& path);

// One episode of env.horizon steps under `policy`, tagged with iteration t.
std::vector<Transition> rollout(const Environment& env, const Policy& policy,
                                Rng rng, std::size_t t = 0);

// Optimal policy and values on the true model. Results are memoized per
// (environment tables, gamma); safe to call from several threads.
PlanResult oracle_solution(const Environment& env, double gamma);

// Index of a draw from `dist` using one uniform variate.
std::size_t sample_categorical(std::span<const double> dist, Rng& rng);

}  // namespace conserva
