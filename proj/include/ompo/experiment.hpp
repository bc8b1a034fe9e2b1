// Copyright 2026 The OMPO Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Configuration-driven experiments: (environment seed x solver) runs written
// to results.csv and summary.csv.
//
// Config layout (JSON):
//   {
//     "environment": {"generator": "gridworld" | "token_chain" | "conversation" | "game_file", ...},
//     "solvers": [{"algorithm": "ompo_exact", "beta": 0.7, "iterations": 100, ...}, ...],
//     "seeds": 10, "base_seed": 0, "iterations": 100, "eval_every": 10,
//     "output_dir": "out", "record_timing": false
//   }

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ompo/env_gen.hpp"
#include "ompo/game.hpp"
#include "ompo/game_io.hpp"
#include "ompo/solvers.hpp"

namespace ompo {

/// Malformed experiment configuration; the message names the offending key.
class ConfigError : public FormatError {
 public:
  using FormatError::FormatError;
};

struct TokenChainSpec {
  int horizon = 3;
  int num_tokens = 2;
  int state_budget = 512;
  PreferenceSpec preference;
};

struct GameFileSpec {
  std::string path;
};

using EnvironmentSpec = std::variant<GridworldSpec, TokenChainSpec, ConversationSpec, GameFileSpec>;

struct SolverEntry {
  std::string label;  // defaults to the algorithm name
  SolverConfig config;
};

struct ExperimentConfig {
  EnvironmentSpec environment = GridworldSpec{};
  std::vector<SolverEntry> solvers;
  int seeds = 1;
  std::uint64_t base_seed = 0;
  std::string output_dir = ".";
  bool record_timing = false;
};

struct ResultRow {
  std::uint64_t env_seed = 0;
  std::string algorithm;
  int iteration = 0;
  double last_iterate_exploitability = 0.0;
  double averaged_exploitability = 0.0;
  double nash_gap = 0.0;
  double elapsed_ms = 0.0;
};

struct SummaryRow {
  std::string algorithm;
  int iteration = 0;
  int runs = 0;
  double last_iterate_mean = 0.0;
  double last_iterate_std = 0.0;
  double averaged_mean = 0.0;
  double averaged_std = 0.0;
  double nash_gap_mean = 0.0;
  double nash_gap_std = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
};

namespace detail {

class KeyReader {
 public:
  KeyReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + ": expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& [key, value] : j_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
        throw ConfigError(child(key) + ": unknown key");
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const Json& at(const char* key) const { return j_.at(key); }
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const char* key, int& out, int min_value) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < min_value) {
      throw ConfigError(child(key) + ": expected an integer >= " + std::to_string(min_value));
    }
    out = v.get<int>();
  }
  void read(const char* key, std::uint64_t& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(child(key) + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void read(const char* key, double& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(child(key) + ": expected a number");
    out = v.get<double>();
  }
  void read(const char* key, bool& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(child(key) + ": expected true or false");
    out = v.get<bool>();
  }
  void read(const char* key, std::string& out) const {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(child(key) + ": expected a string");
    out = v.get<std::string>();
  }
  void read(const char* key, PreferenceSpec& out) const {
    if (!has(key)) return;
    try {
      out = read_preference_spec(j_.at(key), child(key));
    } catch (const ConfigError&) {
      throw;
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const Json& j_;
  std::string path_;
};

inline EnvironmentSpec parse_environment(const Json& j) {
  const KeyReader in(j, "environment");
  if (!in.has("generator")) throw ConfigError("environment.generator: missing required key");
  std::string generator;
  in.read("generator", generator);
  if (generator == "gridworld") {
    in.allow({"generator", "state_min", "state_max", "action_min", "action_max", "horizon",
              "transition_sparsity", "preference"});
    GridworldSpec spec;
    in.read("state_min", spec.state_min, 1);
    in.read("state_max", spec.state_max, 1);
    in.read("action_min", spec.action_min, 1);
    in.read("action_max", spec.action_max, 1);
    in.read("horizon", spec.horizon, 1);
    in.read("transition_sparsity", spec.transition_sparsity);
    in.read("preference", spec.preference);
    if (spec.state_min > spec.state_max) throw ConfigError("environment.state_max: below state_min");
    if (spec.action_min > spec.action_max) {
      throw ConfigError("environment.action_max: below action_min");
    }
    if (!(spec.transition_sparsity > 0.0 && spec.transition_sparsity <= 1.0)) {
      throw ConfigError("environment.transition_sparsity: must lie in (0, 1]");
    }
    return spec;
  }
  if (generator == "token_chain") {
    in.allow({"generator", "horizon", "num_tokens", "state_budget", "preference"});
    TokenChainSpec spec;
    in.read("horizon", spec.horizon, 1);
    in.read("num_tokens", spec.num_tokens, 2);
    in.read("state_budget", spec.state_budget, 1);
    in.read("preference", spec.preference);
    return spec;
  }
  if (generator == "conversation") {
    in.allow({"generator", "horizon", "num_prompts", "num_answers", "stochastic", "state_budget",
              "preference"});
    ConversationSpec spec;
    in.read("horizon", spec.horizon, 1);
    in.read("num_prompts", spec.num_prompts, 1);
    in.read("num_answers", spec.num_answers, 1);
    in.read("stochastic", spec.stochastic);
    in.read("state_budget", spec.state_budget, 1);
    in.read("preference", spec.preference);
    return spec;
  }
  if (generator == "game_file") {
    in.allow({"generator", "path"});
    GameFileSpec spec;
    if (!in.has("path")) throw ConfigError("environment.path: missing required key");
    in.read("path", spec.path);
    return spec;
  }
  throw ConfigError("environment.generator: unknown generator '" + generator + "'");
}

inline SolverEntry parse_solver(const Json& j, const std::string& path, int iterations,
                                int eval_every) {
  const KeyReader in(j, path);
  in.allow({"algorithm", "label", "beta", "iterations", "eval_every", "seed", "regression"});
  SolverEntry entry;
  entry.config.iterations = iterations;
  entry.config.eval_every = eval_every;
  if (!in.has("algorithm")) throw ConfigError(in.child("algorithm") + ": missing required key");
  std::string name;
  in.read("algorithm", name);
  const auto algorithm = parse_algorithm(name);
  if (!algorithm) throw ConfigError(in.child("algorithm") + ": unknown algorithm '" + name + "'");
  entry.config.algorithm = *algorithm;
  entry.label = name;
  in.read("label", entry.label);
  if (in.has("beta")) {
    double beta = 0.0;
    in.read("beta", beta);
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError(in.child("beta") + ": must be positive");
    entry.config.beta = beta;
  }
  in.read("iterations", entry.config.iterations, 0);
  in.read("eval_every", entry.config.eval_every, 1);
  in.read("seed", entry.config.seed);
  if (in.has("regression")) {
    const KeyReader reg(in.at("regression"), in.child("regression"));
    reg.allow({"steps", "step_size"});
    reg.read("steps", entry.config.regression.steps, 0);
    reg.read("step_size", entry.config.regression.step_size);
    if (!(entry.config.regression.step_size > 0.0)) {
      throw ConfigError(reg.child("step_size") + ": must be positive");
    }
  }
  return entry;
}

inline std::string fmt12(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x == 0.0 ? 0.0 : x);
  return buf;
}

inline double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline int thread_count_from_env() {
  const char* raw = std::getenv("THREADS");
  if (raw == nullptr) return 1;
  char* end = nullptr;
  const long n = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  const detail::KeyReader in(j, "");
  in.allow({"environment", "solvers", "seeds", "base_seed", "iterations", "eval_every",
            "output_dir", "record_timing", "name"});
  ExperimentConfig config;
  if (!in.has("environment")) throw ConfigError("environment: missing required key");
  config.environment = detail::parse_environment(in.at("environment"));
  in.read("seeds", config.seeds, 1);
  in.read("base_seed", config.base_seed);
  in.read("output_dir", config.output_dir);
  in.read("record_timing", config.record_timing);
  int iterations = 100, eval_every = 10;
  in.read("iterations", iterations, 0);
  in.read("eval_every", eval_every, 1);
  if (!in.has("solvers")) throw ConfigError("solvers: missing required key");
  const auto& solvers = in.at("solvers");
  if (!solvers.is_array() || solvers.empty()) {
    throw ConfigError("solvers: expected a non-empty array");
  }
  for (std::size_t i = 0; i < solvers.size(); ++i) {
    config.solvers.push_back(detail::parse_solver(
        solvers[i], "solvers[" + std::to_string(i) + "]", iterations, eval_every));
  }
  return config;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

/// Random gridworlds with the default dimensions: 10 seeds, OMPO (exact) and
/// MPO for 2000 iterations, evaluated every 10.
inline ExperimentConfig fig3a_config() {
  ExperimentConfig config;
  config.environment = GridworldSpec{};
  config.seeds = 10;
  config.output_dir = "results/fig3a";
  for (auto algorithm : {Algorithm::kOmpoExact, Algorithm::kMpo}) {
    SolverEntry entry;
    entry.label = std::string(to_string(algorithm));
    entry.config.algorithm = algorithm;
    entry.config.iterations = 2000;
    entry.config.eval_every = 10;
    config.solvers.push_back(entry);
  }
  return config;
}

/// Game for environment seed `env_seed`. Generator failures surface as
/// ConfigError.
inline PreferenceGame build_environment(const EnvironmentSpec& env, std::uint64_t env_seed) {
  try {
    if (const auto* grid = std::get_if<GridworldSpec>(&env)) {
      auto spec = *grid;
      spec.seed = env_seed;
      return random_gridworld(spec);
    }
    if (const auto* chain = std::get_if<TokenChainSpec>(&env)) {
      auto preference = chain->preference;
      preference.seed += env_seed;
      return token_chain(chain->horizon, chain->num_tokens, preference, chain->state_budget);
    }
    if (const auto* conv = std::get_if<ConversationSpec>(&env)) {
      auto spec = *conv;
      spec.seed = env_seed;
      spec.preference.seed += env_seed;
      return multi_turn_conversation(spec);
    }
    const auto& file = std::get<GameFileSpec>(env);
    auto g = load_game(file.path);
    const auto report = validate_game(g);
    if (!report.ok()) throw ConfigError("environment.path: " + report.violations.front());
    return g;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("environment: ") + e.what());
  }
}

/// Runs every (env seed x solver) pair. Rows are ordered by seed, solver,
/// iteration regardless of `threads`.
inline ExperimentResult run_experiment(const ExperimentConfig& config, int threads = 1) {
  if (config.seeds < 1) throw ConfigError("seeds: must be at least 1");
  if (config.solvers.empty()) throw ConfigError("solvers: expected a non-empty array");

  std::vector<PreferenceGame> games;
  for (int i = 0; i < config.seeds; ++i) {
    games.push_back(build_environment(config.environment, config.base_seed + i));
  }

  const std::size_t num_solvers = config.solvers.size();
  const std::size_t num_runs = games.size() * num_solvers;
  std::vector<std::vector<ResultRow>> per_run(num_runs);
  std::vector<std::exception_ptr> failures(num_runs);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k = next++; k < num_runs; k = next++) {
      const std::size_t seed_index = k / num_solvers;
      const auto& entry = config.solvers[k % num_solvers];
      try {
        const auto trace = run_solver(games[seed_index], entry.config);
        for (const auto& rec : trace.records) {
          ResultRow row;
          row.env_seed = config.base_seed + seed_index;
          row.algorithm = entry.label;
          row.iteration = rec.iteration;
          row.last_iterate_exploitability = rec.last_exploitability;
          row.averaged_exploitability = rec.averaged_exploitability;
          row.nash_gap = rec.nash_gap;
          row.elapsed_ms = config.record_timing ? rec.elapsed_ms : 0.0;
          per_run[k].push_back(std::move(row));
        }
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp<int>(threads, 1, static_cast<int>(num_runs));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  ExperimentResult result;
  for (auto& rows : per_run) {
    for (auto& row : rows) result.rows.push_back(std::move(row));
  }

  // Labels in first-appearance order, iterations ascending.
  std::vector<std::string> labels;
  for (const auto& e : config.solvers) {
    if (std::find(labels.begin(), labels.end(), e.label) == labels.end()) labels.push_back(e.label);
  }
  for (const auto& label : labels) {
    std::map<int, std::vector<const ResultRow*>> by_iteration;
    for (const auto& row : result.rows) {
      if (row.algorithm == label) by_iteration[row.iteration].push_back(&row);
    }
    for (const auto& [iteration, rows] : by_iteration) {
      SummaryRow s;
      s.algorithm = label;
      s.iteration = iteration;
      s.runs = static_cast<int>(rows.size());
      std::vector<double> last, avg, gap;
      for (const auto* r : rows) {
        last.push_back(r->last_iterate_exploitability);
        avg.push_back(r->averaged_exploitability);
        gap.push_back(r->nash_gap);
      }
      auto mean = [](const std::vector<double>& xs) {
        double total = 0.0;
        for (double x : xs) total += x;
        return total / static_cast<double>(xs.size());
      };
      s.last_iterate_mean = mean(last);
      s.last_iterate_std = detail::sample_std(last, s.last_iterate_mean);
      s.averaged_mean = mean(avg);
      s.averaged_std = detail::sample_std(avg, s.averaged_mean);
      s.nash_gap_mean = mean(gap);
      s.nash_gap_std = detail::sample_std(gap, s.nash_gap_mean);
      result.summary.push_back(s);
    }
  }
  return result;
}

inline constexpr const char* kResultsHeader =
    "env_seed,algorithm,iteration,last_iterate_exploitability,averaged_exploitability,nash_gap,"
    "elapsed_ms";
inline constexpr const char* kSummaryHeader =
    "algorithm,iteration,runs,last_iterate_mean,last_iterate_std,averaged_mean,averaged_std,"
    "nash_gap_mean,nash_gap_std";

inline std::string results_csv(const std::vector<ResultRow>& rows) {
  using detail::fmt12;
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.env_seed) + "," + r.algorithm + "," + std::to_string(r.iteration) +
           "," + fmt12(r.last_iterate_exploitability) + "," + fmt12(r.averaged_exploitability) +
           "," + fmt12(r.nash_gap) + "," + fmt12(r.elapsed_ms) + "\n";
  }
  return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  using detail::fmt12;
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& s : rows) {
    out += s.algorithm + "," + std::to_string(s.iteration) + "," + std::to_string(s.runs) + "," +
           fmt12(s.last_iterate_mean) + "," + fmt12(s.last_iterate_std) + "," +
           fmt12(s.averaged_mean) + "," + fmt12(s.averaged_std) + "," + fmt12(s.nash_gap_mean) +
           "," + fmt12(s.nash_gap_std) + "\n";
  }
  return out;
}

/// Writes results.csv and summary.csv under config.output_dir.
inline void write_experiment(const ExperimentConfig& config, const ExperimentResult& result) {
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : {std::pair{"results.csv", results_csv(result.rows)},
                                   std::pair{"summary.csv", summary_csv(result.summary)}}) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error((dir / name).string() + ": cannot write file");
    out << body;
  }
}

}  // namespace ompo
