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

// Reference computations for tests. Deliberately naive and independent of
// the library's solve path: plain loops, hand-written Gaussian elimination,
// no SIMD kernels, no Eigen.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

#include "conserva/mdp.hpp"

namespace oracle {

using conserva::Policy;
using conserva::TabularModel;

inline TabularModel random_model(std::size_t n_states, std::size_t n_actions,
                                 std::mt19937_64& rng,
                                 conserva::ModelTag tag = conserva::ModelTag::kTrueEnv) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> rew(-1.0, 1.0);
  TabularModel m(n_states, n_actions, tag);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (std::size_t k = 0; k < n_states; ++k) {
        m.p(s, a, k) = u(rng) < 0.3 ? 0.0 : u(rng);
        total += m.p(s, a, k);
      }
      if (total == 0.0) {
        m.p(s, a, s) = 1.0;
        total = 1.0;
      }
      for (std::size_t k = 0; k < n_states; ++k) {
        m.p(s, a, k) /= total;
        m.r(s, a, k) = rew(rng);
      }
    }
  }
  return m;
}

inline Policy random_policy(std::size_t n_states, std::size_t n_actions,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> probs(n_states * n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    double total = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) total += probs[s * n_actions + a] = u(rng) + 1e-3;
    for (std::size_t a = 0; a < n_actions; ++a) probs[s * n_actions + a] /= total;
  }
  return Policy(n_states, n_actions, std::move(probs));
}

inline std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> d(n);
  double total = 0.0;
  for (double& x : d) total += x = u(rng) + 1e-3;
  for (double& x : d) x /= total;
  return d;
}

inline double reward_bar(const TabularModel& m, std::size_t s, std::size_t a) {
  double r = 0.0;
  for (std::size_t k = 0; k < m.n_states(); ++k) r += m.p(s, a, k) * m.r(s, a, k);
  return r;
}

// Dense row-major P_π without the library helpers.
inline std::vector<double> transition_under(const TabularModel& m, const Policy& pi) {
  const std::size_t n = m.n_states();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < m.n_actions(); ++a)
      for (std::size_t k = 0; k < n; ++k) out[s * n + k] += pi(s, a) * m.p(s, a, k);
  return out;
}

inline std::vector<double> reward_under(const TabularModel& m, const Policy& pi) {
  std::vector<double> out(m.n_states(), 0.0);
  for (std::size_t s = 0; s < m.n_states(); ++s)
    for (std::size_t a = 0; a < m.n_actions(); ++a) out[s] += pi(s, a) * reward_bar(m, s, a);
  return out;
}

// Gauss-Jordan with partial pivoting; `a` is n x n row-major.
inline std::vector<double> gauss_solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r * n + col]) > std::fabs(a[piv * n + col])) piv = r;
    if (std::fabs(a[piv * n + col]) < 1e-12) return {};
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i * n + i];
  return b;
}

// V_π by elimination on (I - γ P_π) V = r_π.
inline std::vector<double> exact_values(const TabularModel& m, const Policy& pi, double gamma) {
  const std::size_t n = m.n_states();
  std::vector<double> sys = transition_under(m, pi);
  for (double& x : sys) x *= -gamma;
  for (std::size_t i = 0; i < n; ++i) sys[i * n + i] += 1.0;
  return gauss_solve(std::move(sys), reward_under(m, pi));
}

// Jacobi Bellman sweeps.
inline std::vector<double> iterative_values(const TabularModel& m, const Policy& pi,
                                            double gamma, int sweeps = 10000) {
  const std::size_t n = m.n_states();
  const std::vector<double> p = transition_under(m, pi);
  const std::vector<double> r = reward_under(m, pi);
  std::vector<double> v(n, 0.0), next(n);
  for (int it = 0; it < sweeps; ++it) {
    for (std::size_t s = 0; s < n; ++s) {
      double acc = r[s];
      for (std::size_t k = 0; k < n; ++k) acc += gamma * p[s * n + k] * v[k];
      next[s] = acc;
    }
    v.swap(next);
  }
  return v;
}

// (1-γ) Σ_{h<steps} γ^h P(s_h = ·) by forward propagation.
inline std::vector<double> truncated_occupancy(const TabularModel& m, const Policy& pi,
                                               double gamma, const std::vector<double>& zeta,
                                               int steps = 10000) {
  const std::size_t n = m.n_states();
  const std::vector<double> p = transition_under(m, pi);
  std::vector<double> d = zeta, next(n), nu(n, 0.0);
  double w = 1.0 - gamma;
  for (int h = 0; h < steps; ++h) {
    for (std::size_t s = 0; s < n; ++s) nu[s] += w * d[s];
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t k = 0; k < n; ++k) next[k] += d[s] * p[s * n + k];
    d.swap(next);
    w *= gamma;
  }
  return nu;
}

// Calls fn(actions) for every deterministic policy.
template <typename Fn>
void for_each_deterministic(std::size_t n_states, std::size_t n_actions, Fn&& fn) {
  std::vector<std::size_t> actions(n_states, 0);
  while (true) {
    fn(Policy::deterministic(actions, n_actions));
    std::size_t i = 0;
    while (i < n_states && ++actions[i] == n_actions) actions[i++] = 0;
    if (i == n_states) return;
  }
}

// Per-state best value over all deterministic policies.
inline std::vector<double> best_deterministic_values(const TabularModel& m, double gamma) {
  std::vector<double> best(m.n_states(), -std::numeric_limits<double>::infinity());
  for_each_deterministic(m.n_states(), m.n_actions(), [&](const Policy& pi) {
    const std::vector<double> v = exact_values(m, pi, gamma);
    for (std::size_t s = 0; s < v.size(); ++s) best[s] = std::max(best[s], v[s]);
  });
  return best;
}

// max Σ p·qbar over {p in simplex : Σ|p - q| <= 2η} by enumerating the
// vertices of the polytope. The L1 ball is written as 2^A half-spaces
// Σ σ_a (p_a - q_a) <= 2η, one per sign vector σ.
inline double tv_ball_lp_optimum(const std::vector<double>& q, const std::vector<double>& qbar,
                                 double eta) {
  const std::size_t n = q.size();
  struct HalfSpace {
    std::vector<double> w;
    double rhs;
  };
  std::vector<HalfSpace> cons;
  for (std::size_t a = 0; a < n; ++a) {
    HalfSpace h{std::vector<double>(n, 0.0), 0.0};
    h.w[a] = -1.0;  // -p_a <= 0
    cons.push_back(h);
  }
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    HalfSpace h{std::vector<double>(n), 2.0 * eta};
    for (std::size_t a = 0; a < n; ++a) {
      h.w[a] = (mask >> a & 1) ? 1.0 : -1.0;
      h.rhs += h.w[a] * q[a];
    }
    cons.push_back(h);
  }
  auto feasible = [&](const std::vector<double>& p) {
    double total = 0.0;
    for (double x : p) total += x;
    if (std::fabs(total - 1.0) > 1e-9) return false;
    for (const HalfSpace& h : cons) {
      double lhs = 0.0;
      for (std::size_t a = 0; a < n; ++a) lhs += h.w[a] * p[a];
      if (lhs > h.rhs + 1e-9) return false;
    }
    return true;
  };

  double best = -std::numeric_limits<double>::infinity();
  // choose n-1 active constraints plus Σp = 1
  std::vector<std::size_t> pick(n - 1);
  auto visit = [&](auto&& self, std::size_t depth, std::size_t start) -> void {
    if (depth == n - 1) {
      std::vector<double> a(n * n), b(n);
      for (std::size_t r = 0; r + 1 < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) a[r * n + c] = cons[pick[r]].w[c];
        b[r] = cons[pick[r]].rhs;
      }
      for (std::size_t c = 0; c < n; ++c) a[(n - 1) * n + c] = 1.0;
      b[n - 1] = 1.0;
      const std::vector<double> p = gauss_solve(a, b);
      if (p.empty() || !feasible(p)) return;
      double value = 0.0;
      for (std::size_t c = 0; c < n; ++c) value += p[c] * qbar[c];
      best = std::max(best, value);
      return;
    }
    for (std::size_t i = start; i < cons.size(); ++i) {
      pick[depth] = i;
      self(self, depth + 1, i + 1);
    }
  };
  if (n == 1) return qbar[0];
  visit(visit, 0, 0);
  return best;
}

}  // namespace oracle
