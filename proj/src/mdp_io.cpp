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

// MDP files are JSON:
//   {"n_states": S, "n_actions": A,
//    "transition":  [[[p(s'|s,a) for s'] for a] for s],
//    "reward_mean": same nesting, "reward_std": same nesting,
//    "zeta": [S entries], "horizon": H}

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>

#include "conserva/envs.hpp"
#include "conserva/errors.hpp"

namespace conserva {

namespace {

using nlohmann::json;

constexpr double kRowTolerance = 1e-9;

std::vector<double> read_table(const json& doc, const char* field,
                               std::size_t n_states, std::size_t n_actions) {
  if (!doc.contains(field)) throw LoadError(fmt::format("missing field '{}'", field));
  const json& outer = doc.at(field);
  if (!outer.is_array() || outer.size() != n_states) {
    throw LoadError(fmt::format("'{}' must be an array of {} states", field, n_states));
  }
  std::vector<double> flat;
  flat.reserve(n_states * n_actions * n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    const json& per_action = outer[s];
    if (!per_action.is_array() || per_action.size() != n_actions) {
      throw LoadError(fmt::format("'{}'[{}] must hold {} actions", field, s, n_actions));
    }
    for (std::size_t a = 0; a < n_actions; ++a) {
      const json& row = per_action[a];
      if (!row.is_array() || row.size() != n_states) {
        throw LoadError(fmt::format("'{}'[{}][{}] must hold {} next-state entries",
                                    field, s, a, n_states));
      }
      for (const json& x : row) {
        if (!x.is_number()) {
          throw LoadError(fmt::format("'{}'[{}][{}] has a non-numeric entry", field, s, a));
        }
        flat.push_back(x.get<double>());
      }
    }
  }
  return flat;
}

json write_table(const std::vector<double>& flat, std::size_t n_states,
                 std::size_t n_actions) {
  json outer = json::array();
  for (std::size_t s = 0; s < n_states; ++s) {
    json per_action = json::array();
    for (std::size_t a = 0; a < n_actions; ++a) {
      const auto begin = flat.begin() + static_cast<std::ptrdiff_t>((s * n_actions + a) * n_states);
      per_action.push_back(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(n_states)));
    }
    outer.push_back(std::move(per_action));
  }
  return outer;
}

}  // namespace

Environment load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(fmt::format("cannot open MDP file {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
  }

  try {
    const auto n_states = doc.at("n_states").get<std::int64_t>();
    const auto n_actions = doc.at("n_actions").get<std::int64_t>();
    if (n_states < 1 || n_actions < 1) {
      throw LoadError(fmt::format("bad dimensions {}x{}", n_states, n_actions));
    }
    const auto ns = static_cast<std::size_t>(n_states);
    const auto na = static_cast<std::size_t>(n_actions);

    std::vector<double> transition = read_table(doc, "transition", ns, na);
    std::vector<double> reward_mean = read_table(doc, "reward_mean", ns, na);
    std::vector<double> reward_std = read_table(doc, "reward_std", ns, na);

    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        double* row = transition.data() + (s * na + a) * ns;
        double total = 0.0;
        for (std::size_t k = 0; k < ns; ++k) {
          if (row[k] < 0.0) {
            throw LoadError(fmt::format(
                "transition row (s={}, a={}) has negative entry {}", s, a, row[k]));
          }
          total += row[k];
        }
        if (std::fabs(total - 1.0) >= kRowTolerance) {
          throw LoadError(fmt::format(
              "transition row (s={}, a={}) sums to {:.12g}, not 1", s, a, total));
        }
        if (std::fabs(total - 1.0) > 1e-12) {
          for (std::size_t k = 0; k < ns; ++k) row[k] /= total;
        }
      }
    }

    Environment env;
    env.model = TabularModel(ns, na, std::move(transition),
                             std::move(reward_mean), ModelTag::kTrueEnv);
    env.reward_std = std::move(reward_std);
    env.zeta = doc.at("zeta").get<std::vector<double>>();
    const auto horizon = doc.at("horizon").get<std::int64_t>();
    if (horizon < 1) throw LoadError(fmt::format("horizon must be >= 1, got {}", horizon));
    env.horizon = static_cast<std::size_t>(horizon);
    try {
      env.validate(1e-12);
    } catch (const InvalidInput& e) {
      throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return env;
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void save_mdp(const Environment& env, const std::filesystem::path& path) {
  const std::size_t ns = env.n_states();
  const std::size_t na = env.n_actions();
  json doc;
  doc["n_states"] = ns;
  doc["n_actions"] = na;
  doc["transition"] = write_table(env.model.transitions(), ns, na);
  doc["reward_mean"] = write_table(env.model.reward_means(), ns, na);
  doc["reward_std"] = write_table(env.reward_std, ns, na);
  doc["zeta"] = env.zeta;
  doc["horizon"] = env.horizon;

  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write MDP file {}", path.string()));
  out << doc.dump(1) << '\n';
  if (!out) throw IoError(fmt::format("failed writing MDP file {}", path.string()));
}

}  // namespace conserva
