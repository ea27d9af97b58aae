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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "conserva/agents.hpp"
#include "conserva/bayes.hpp"
#include "conserva/envs.hpp"

namespace conserva {

struct EnvSpec {
  enum class Kind { kNChain, kFile };
  Kind kind = Kind::kNChain;
  std::size_t n = 8;
  std::filesystem::path path;

  // "nchain:8", or a file path for file environments.
  std::string label() const;
  // Accepts "nchain:N" or "file:PATH".
  static EnvSpec parse(std::string_view text);
  static EnvSpec file(std::filesystem::path path);

  // Builds the environment; horizon 0 keeps the environment's own default.
  Environment build(std::size_t horizon) const;
};

struct ExperimentConfig {
  EnvSpec env;
  AgentSpec agent;
  std::size_t iterations = 500;
  std::size_t horizon = 0;  // 0: environment default (2N for chains)
  double gamma = 0.97;
  std::uint64_t seed = 1;
  std::size_t snapshot_every = 0;  // 0 disables posterior snapshots
  std::size_t snapshot_samples = 32;
  std::filesystem::path output_dir;  // empty: keep results in memory only
  PriorSpec prior;
  // Start from a posterior concentrated on the true model.
  bool prior_at_truth = false;
  // Replace the true model by a draw from the prior (Bayes-regret runs).
  bool env_from_prior = false;
  // wall_ms column; off gives byte-reproducible traces.
  bool record_timing = true;
  std::vector<std::pair<std::size_t, std::size_t>> width_at;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& doc);

// A sweep file is either {"runs": [config, ...]} or a grid
// {"base": {...}, "envs": [...], "agents": [...], "seeds": [...],
//  "output_dir": "..."}; each grid cell writes to
// output_dir/<env>__<agent>__seed<k>.
std::vector<ExperimentConfig> sweep_configs_from_json(const nlohmann::json& doc);

}  // namespace conserva
