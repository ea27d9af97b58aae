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

#include "conserva/config.hpp"

#include <charconv>
#include <fmt/format.h>

#include "conserva/errors.hpp"

namespace conserva {

using nlohmann::json;

std::string EnvSpec::label() const {
  if (kind == Kind::kNChain) return fmt::format("nchain:{}", n);
  return path.string();
}

EnvSpec EnvSpec::parse(std::string_view text) {
  constexpr std::string_view kChain = "nchain:";
  constexpr std::string_view kFile = "file:";
  if (text.starts_with(kChain)) {
    const std::string_view digits = text.substr(kChain.size());
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) {
      throw InvalidInput(fmt::format("bad chain length in '{}'", text));
    }
    EnvSpec spec;
    spec.kind = Kind::kNChain;
    spec.n = n;
    return spec;
  }
  if (text.starts_with(kFile)) return file(std::filesystem::path(text.substr(kFile.size())));
  throw InvalidInput(fmt::format("unknown environment '{}' (expected nchain:N or file:PATH)", text));
}

EnvSpec EnvSpec::file(std::filesystem::path path) {
  EnvSpec spec;
  spec.kind = Kind::kFile;
  spec.path = std::move(path);
  return spec;
}

Environment EnvSpec::build(std::size_t horizon) const {
  Environment env = kind == Kind::kNChain ? build_nchain(n) : load_mdp(path);
  if (horizon > 0) env.horizon = horizon;
  return env;
}

void ExperimentConfig::validate() const {
  if (iterations < 1) throw InvalidInput("iterations must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput(fmt::format("gamma must lie in (0,1), got {}", gamma));
  }
  if (snapshot_every > 0 && snapshot_samples < 2) {
    throw InvalidInput("snapshot_samples must be >= 2");
  }
  if (env.kind == EnvSpec::Kind::kNChain && env.n < 2) {
    throw InvalidInput(fmt::format("chain length must be >= 2, got {}", env.n));
  }
  if (prior_at_truth && env_from_prior) {
    throw InvalidInput("prior_at_truth and env_from_prior are mutually exclusive");
  }
  AgentSpec a = agent;
  a.gamma = gamma;
  a.validate();
  prior.validate();
}

json to_json(const ExperimentConfig& c) {
  json doc;
  if (c.env.kind == EnvSpec::Kind::kNChain) {
    doc["env"] = c.env.label();
  } else {
    doc["env_file"] = c.env.path.string();
  }
  doc["agent"] = {{"kind", std::string(to_string(c.agent.kind))},
                  {"eta", c.agent.eta},
                  {"n_models", c.agent.n_models},
                  {"sweeps", c.agent.sweeps}};
  doc["iterations"] = c.iterations;
  doc["horizon"] = c.horizon;
  doc["gamma"] = c.gamma;
  doc["seed"] = c.seed;
  doc["snapshot_every"] = c.snapshot_every;
  doc["snapshot_samples"] = c.snapshot_samples;
  doc["output_dir"] = c.output_dir.string();
  doc["prior"] = {{"dirichlet_alpha", c.prior.dirichlet_alpha},
                  {"mu0", c.prior.reward.mu},
                  {"kappa0", c.prior.reward.kappa},
                  {"a0", c.prior.reward.alpha},
                  {"b0", c.prior.reward.beta}};
  doc["prior_at_truth"] = c.prior_at_truth;
  doc["env_from_prior"] = c.env_from_prior;
  doc["record_timing"] = c.record_timing;
  json widths = json::array();
  for (const auto& [s, a] : c.width_at) widths.push_back({s, a});
  doc["width_at"] = widths;
  return doc;
}

namespace {

template <typename T>
void read_opt(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

void apply_json(const json& doc, ExperimentConfig& c) {
  if (!doc.is_object()) throw InvalidInput("experiment config must be a JSON object");
  if (doc.contains("env")) c.env = EnvSpec::parse(doc.at("env").get<std::string>());
  if (doc.contains("env_file")) c.env = EnvSpec::file(doc.at("env_file").get<std::string>());
  if (doc.contains("agent")) {
    const json& a = doc.at("agent");
    if (a.is_string()) {
      c.agent.kind = parse_agent_kind(a.get<std::string>());
    } else {
      if (a.contains("kind")) c.agent.kind = parse_agent_kind(a.at("kind").get<std::string>());
      read_opt(a, "eta", c.agent.eta);
      read_opt(a, "n_models", c.agent.n_models);
      read_opt(a, "sweeps", c.agent.sweeps);
    }
  }
  read_opt(doc, "iterations", c.iterations);
  read_opt(doc, "horizon", c.horizon);
  read_opt(doc, "gamma", c.gamma);
  read_opt(doc, "seed", c.seed);
  read_opt(doc, "snapshot_every", c.snapshot_every);
  read_opt(doc, "snapshot_samples", c.snapshot_samples);
  if (doc.contains("output_dir")) c.output_dir = doc.at("output_dir").get<std::string>();
  if (doc.contains("prior")) {
    const json& p = doc.at("prior");
    read_opt(p, "dirichlet_alpha", c.prior.dirichlet_alpha);
    read_opt(p, "mu0", c.prior.reward.mu);
    read_opt(p, "kappa0", c.prior.reward.kappa);
    read_opt(p, "a0", c.prior.reward.alpha);
    read_opt(p, "b0", c.prior.reward.beta);
  }
  read_opt(doc, "prior_at_truth", c.prior_at_truth);
  read_opt(doc, "env_from_prior", c.env_from_prior);
  read_opt(doc, "record_timing", c.record_timing);
  if (doc.contains("width_at")) {
    c.width_at.clear();
    for (const json& pair : doc.at("width_at")) {
      c.width_at.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>());
    }
  }
  c.agent.gamma = c.gamma;
}

std::string dir_safe(std::string text) {
  for (char& ch : text) {
    if (ch == ':' || ch == '/' || ch == '\\' || ch == ' ') ch = '_';
  }
  return text;
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  try {
    apply_json(doc, c);
  } catch (const json::exception& e) {
    throw InvalidInput(fmt::format("bad experiment config: {}", e.what()));
  }
  c.validate();
  return c;
}

std::vector<ExperimentConfig> sweep_configs_from_json(const json& doc) {
  std::vector<ExperimentConfig> out;
  try {
    if (doc.contains("runs")) {
      for (const json& run : doc.at("runs")) out.push_back(config_from_json(run));
      if (out.empty()) throw InvalidInput("sweep has no runs");
      return out;
    }
    const json base = doc.value("base", json::object());
    const std::filesystem::path root = doc.value("output_dir", std::string());
    const std::vector<std::string> envs = doc.at("envs").get<std::vector<std::string>>();
    const std::vector<std::string> agents = doc.at("agents").get<std::vector<std::string>>();
    const std::vector<std::uint64_t> seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    for (const std::string& env : envs) {
      for (const std::string& agent : agents) {
        for (std::uint64_t seed : seeds) {
          json cell = base;
          if (env.starts_with("nchain:")) {
            cell["env"] = env;
          } else {
            cell["env_file"] = env.starts_with("file:") ? env.substr(5) : env;
          }
          if (cell.contains("agent") && cell["agent"].is_object()) {
            cell["agent"]["kind"] = agent;
          } else {
            cell["agent"] = {{"kind", agent}};
          }
          cell["seed"] = seed;
          if (!root.empty()) {
            cell["output_dir"] =
                (root / fmt::format("{}__{}__seed{}", dir_safe(env), agent, seed)).string();
          }
          out.push_back(config_from_json(cell));
        }
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInput(fmt::format("bad sweep config: {}", e.what()));
  }
  if (out.empty()) throw InvalidInput("sweep has no runs");
  return out;
}

}  // namespace conserva
