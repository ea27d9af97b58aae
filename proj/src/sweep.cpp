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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <spdlog/spdlog.h>
#include <thread>

#include "conserva/errors.hpp"
#include "conserva/harness.hpp"

namespace conserva {

using nlohmann::json;

std::vector<AggregateRow> aggregate_runs(const std::vector<RunSummary>& runs) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const RunSummary& run : runs) {
    if (run.ok) groups[{run.env, run.agent}].push_back(run.final_cum_regret);
  }

  std::vector<AggregateRow> rows;
  std::map<std::string, double> env_max;
  for (const auto& [key, values] : groups) {
    AggregateRow row;
    row.env = key.first;
    row.agent = key.second;
    row.runs = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean_cum_regret = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - row.mean_cum_regret) * (v - row.mean_cum_regret);
      row.std_cum_regret = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    auto [it, inserted] = env_max.try_emplace(row.env, row.mean_cum_regret);
    if (!inserted) it->second = std::max(it->second, row.mean_cum_regret);
    rows.push_back(row);
  }
  for (AggregateRow& row : rows) {
    const double top = env_max.at(row.env);
    if (row.mean_cum_regret == top) {
      row.normalized_regret = 1.0;
    } else {
      row.normalized_regret = top > 0.0 ? row.mean_cum_regret / top : 0.0;
    }
  }
  return rows;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::string out = "env,agent,runs,mean_cum_regret,std_cum_regret,normalized_regret\n";
  for (const AggregateRow& r : rows) {
    out += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g}\n", r.env, r.agent, r.runs,
                       r.mean_cum_regret, r.std_cum_regret, r.normalized_regret);
  }
  return out;
}

SweepResult sweep(const std::vector<ExperimentConfig>& configs, std::size_t jobs) {
  if (configs.empty()) throw InvalidInput("sweep needs at least one config");
  SweepResult result;
  result.runs.resize(configs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      const ExperimentConfig& config = configs[i];
      RunSummary& summary = result.runs[i];
      summary.env = config.env.label();
      summary.agent = std::string(to_string(config.agent.kind));
      summary.seed = config.seed;
      summary.iterations = config.iterations;
      try {
        summary.final_cum_regret = run_experiment(config).trace.final_cum_regret();
      } catch (const std::exception& e) {
        summary.ok = false;
        summary.error = e.what();
        spdlog::error("cell {} agent={} seed={} failed: {}", summary.env, summary.agent,
                      summary.seed, e.what());
      }
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, configs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
  }

  result.failures = static_cast<std::size_t>(
      std::count_if(result.runs.begin(), result.runs.end(), [](const RunSummary& r) { return !r.ok; }));
  result.aggregate = aggregate_runs(result.runs);
  return result;
}

std::vector<AggregateRow> report(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InvalidInput(fmt::format("{} is not a directory", dir.string()));
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "summary.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<RunSummary> runs;
  for (const auto& file : files) {
    std::ifstream in(file);
    try {
      const json doc = json::parse(in);
      RunSummary s;
      s.env = doc.at("env").get<std::string>();
      s.agent = doc.at("agent").get<std::string>();
      s.seed = doc.at("seed").get<std::uint64_t>();
      s.iterations = doc.at("iterations").get<std::size_t>();
      s.final_cum_regret = doc.at("final_cum_regret").get<double>();
      s.ok = doc.value("status", std::string()) == "complete" &&
             !std::filesystem::exists(file.parent_path() / "PARTIAL");
      runs.push_back(std::move(s));
    } catch (const json::exception& e) {
      spdlog::warn("skipping {}: {}", file.string(), e.what());
    }
  }
  return aggregate_runs(runs);
}

}  // namespace conserva
