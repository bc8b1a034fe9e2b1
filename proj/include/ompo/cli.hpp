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

// Command-line front end:
//   ompo run <config> [--output DIR]
//   ompo solve <game> [--algorithm NAME] [--beta B] [--iterations T]
//   ompo validate <game>
// Exit codes: 0 success, 1 runtime failure or dirty report, 2 malformed input.

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ompo/experiment.hpp"
#include "ompo/game.hpp"
#include "ompo/game_io.hpp"
#include "ompo/metrics.hpp"
#include "ompo/solvers.hpp"

namespace ompo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline void print_policy(std::ostream& out, const char* name, const Policy& pi) {
  for (int h = 0; h < pi.horizon(); ++h) {
    for (int s = 0; s < pi.num_states(); ++s) {
      out << name << "[h=" << h << ",s=" << s << "]:";
      for (double p : pi.row(h, s)) out << ' ' << fmt12(p);
      out << '\n';
    }
  }
}

inline int cmd_run(const std::string& path, const std::optional<std::string>& output,
                   std::ostream& out) {
  auto config = load_experiment_config(path);
  if (output) config.output_dir = *output;
  const auto result = run_experiment(config, thread_count_from_env());
  write_experiment(config, result);
  out << "wrote " << result.rows.size() << " rows to " << config.output_dir << "\n";
  return kExitOk;
}

inline int cmd_solve(const std::string& path, const std::string& algorithm_name,
                     std::optional<double> beta, int iterations, std::ostream& out) {
  const auto algorithm = parse_algorithm(algorithm_name);
  if (!algorithm) throw ConfigError("--algorithm: unknown algorithm '" + algorithm_name + "'");
  if (beta && !(*beta > 0.0)) throw ConfigError("--beta: must be positive");
  if (iterations < 0) throw ConfigError("--iterations: must be non-negative");
  const auto g = load_game(path);
  const auto report = validate_game(g);
  if (!report.ok()) throw ConfigError(path + ": " + report.violations.front());

  SolverConfig config;
  config.algorithm = *algorithm;
  config.beta = beta;
  config.iterations = iterations;
  config.eval_every = std::max(iterations, 1);
  const auto trace = run_solver(g, config);

  const auto last_gap = nash_gap(g, trace.last);
  const auto avg_gap = nash_gap(g, trace.averaged);
  out << "algorithm: " << to_string(trace.algorithm) << '\n';
  out << "beta: " << fmt12(trace.beta) << '\n';
  out << "iterations: " << iterations << '\n';
  print_policy(out, "averaged", trace.averaged);
  print_policy(out, "last", trace.last);
  out << "averaged_exploitability: " << fmt12(exploitability(g, trace.averaged)) << '\n';
  out << "averaged_nash_gap: " << fmt12(avg_gap.worst()) << '\n';
  out << "last_exploitability: " << fmt12(exploitability(g, trace.last)) << '\n';
  out << "last_nash_gap: " << fmt12(last_gap.worst()) << '\n';
  return kExitOk;
}

inline int cmd_validate(const std::string& path, std::ostream& out) {
  const auto g = load_game(path);
  const auto report = validate_game(g);
  if (report.ok()) {
    out << "OK\n";
    return kExitOk;
  }
  for (const auto& v : report.violations) out << v << '\n';
  return kExitFailure;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preference game solvers and experiments", "ompo"};
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::string> run_output;
  auto* run = app.add_subcommand("run", "Run an experiment config and write CSV results");
  run->add_option("config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--output", run_output, "Override the output directory");

  std::string solve_game, algorithm = "ompo_exact";
  std::optional<double> beta;
  int iterations = 500;
  auto* solve = app.add_subcommand("solve", "Solve a game file and print the policies");
  solve->add_option("game", solve_game, "Game file (JSON)")->required();
  solve->add_option("--algorithm", algorithm, "ompo_exact, ompo_approx, mpo, ompo_regression, mpo_regression");
  solve->add_option("--beta", beta, "Step size (default depends on the algorithm)");
  solve->add_option("--iterations", iterations, "Number of updates");

  std::string validate_game_path;
  auto* validate = app.add_subcommand("validate", "Check a game file");
  validate->add_option("game", validate_game_path, "Game file (JSON)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (run->parsed()) return detail::cmd_run(run_config, run_output, out);
    if (solve->parsed()) return detail::cmd_solve(solve_game, algorithm, beta, iterations, out);
    return detail::cmd_validate(validate_game_path, out);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace ompo
