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

// Self-play solvers for preference games.
//
//   ompo_exact       optimistic mirror descent over occupancy measures,
//                    realized in policy space by a soft Bellman recursion.
//   ompo_approx      same update with the standard (non-soft) Q of the
//                    optimistic reward.
//   mpo              natural actor-critic: multiplicative weights on the
//                    expected pairwise Q against the current self.
//   *_regression     tabular squared-loss surrogate of the two updates
//                    above, with the log-partition replaced by a constant.
//
// Every update is multiplicative from a strictly positive initial policy, so
// iterates stay in the interior of the simplex.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ompo/bellman.hpp"
#include "ompo/game.hpp"
#include "ompo/metrics.hpp"

namespace ompo {

enum class Algorithm { kOmpoExact, kOmpoApprox, kMpo, kOmpoRegression, kMpoRegression };

inline std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kOmpoExact: return "ompo_exact";
    case Algorithm::kOmpoApprox: return "ompo_approx";
    case Algorithm::kMpo: return "mpo";
    case Algorithm::kOmpoRegression: return "ompo_regression";
    case Algorithm::kMpoRegression: return "mpo_regression";
  }
  return "unknown";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::kOmpoExact, Algorithm::kOmpoApprox, Algorithm::kMpo,
                 Algorithm::kOmpoRegression, Algorithm::kMpoRegression}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

inline bool is_ompo(Algorithm a) {
  return a == Algorithm::kOmpoExact || a == Algorithm::kOmpoApprox ||
         a == Algorithm::kOmpoRegression;
}

struct RegressionOptions {
  int steps = 200;
  double step_size = 0.5;
};

struct SolverConfig {
  Algorithm algorithm = Algorithm::kOmpoExact;
  std::optional<double> beta;  // unset: default_beta
  int iterations = 100;
  int eval_every = 10;
  std::uint64_t seed = 0;
  RegressionOptions regression;
};

/// 1/sqrt(2) for the OMPO family. For the MPO family
/// sqrt(log(1/pi_min) / (T H^2)) with pi_min = 1/|A| (uniform start).
inline double default_beta(const PreferenceGame& g, Algorithm algorithm, int iterations) {
  if (is_ompo(algorithm) || g.num_actions < 2) return 1.0 / std::sqrt(2.0);
  const double T = std::max(iterations, 1);
  const double H = g.horizon;
  return std::sqrt(std::log(static_cast<double>(g.num_actions)) / (T * H * H));
}

/// Iterate pair (pi^t, pi^{t-1}) with their occupancies.
struct SolverState {
  Policy current;
  Policy previous;
  OccupancyMeasure current_occupancy;
  OccupancyMeasure previous_occupancy;
  int iteration = 1;

  /// pi^0 = pi^1 = start (uniform by default).
  static SolverState initial(const PreferenceGame& g, std::optional<Policy> start = std::nullopt) {
    SolverState st;
    st.current = start ? *start : Policy::uniform(g);
    check_policy(g, st.current);
    st.previous = st.current;
    st.current_occupancy = occupancy_measure(g, st.current);
    st.previous_occupancy = st.current_occupancy;
    return st;
  }

  void advance(const PreferenceGame& g, Policy next) {
    previous = std::move(current);
    previous_occupancy = std::move(current_occupancy);
    current = std::move(next);
    current_occupancy = occupancy_measure(g, current);
    ++iteration;
  }
};

/// r~_h(s,a) = sum_{s',a'} (2 d^t_h(s',a') - d^{t-1}_h(s',a')) r(s,a,s',a').
inline std::vector<double> optimistic_reward(const PreferenceGame& g,
                                             const ConditionalOccupancy& d_t,
                                             const ConditionalOccupancy& d_prev, int h) {
  if (h < 0 || h >= g.horizon) throw std::domain_error("stage out of range");
  if (d_t.initial_state() != d_prev.initial_state()) {
    throw std::domain_error("occupancies are conditioned on different initial states");
  }
  detail::require_shape(g, d_t, "occupancy");
  detail::require_shape(g, d_prev, "occupancy");
  const auto now = d_t.stage(h);
  const auto before = d_prev.stage(h);
  std::vector<double> w(now.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = 2.0 * now[j] - before[j];
  return induced_reward(g, w);
}

/// Same extrapolation seen from the column player: the expected preference
/// of the extrapolated row player over each (s',a').
inline std::vector<double> optimistic_loss(const PreferenceGame& g,
                                           const ConditionalOccupancy& d_t,
                                           const ConditionalOccupancy& d_prev, int h) {
  if (h < 0 || h >= g.horizon) throw std::domain_error("stage out of range");
  const auto now = d_t.stage(h);
  const auto before = d_prev.stage(h);
  std::vector<double> w(now.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = 2.0 * now[j] - before[j];
  return induced_loss(g, w);
}

/// Stage step size beta_h = beta / (H - h).
inline double stage_step(const PreferenceGame& g, double beta, int h) {
  return beta / g.remaining(h);
}

namespace detail {

/// Per-initial-state tables merged into one array: row (h, s) comes from the
/// table of s's initial state. Rows of orphan states stay zero.
inline StageArray merge_by_partition(const PreferenceGame& g, const std::vector<int>& starts,
                                     const std::vector<StageArray>& tables) {
  StageArray out(g.horizon, g.num_states, tables.empty() ? g.num_actions : tables[0].num_actions());
  for (std::size_t k = 0; k < starts.size(); ++k) {
    for (int s = 0; s < g.num_states; ++s) {
      if (g.init_partition[s] != starts[k]) continue;
      for (int h = 0; h < g.horizon; ++h) {
        std::copy(tables[k].row(h, s).begin(), tables[k].row(h, s).end(), out.row(h, s).begin());
      }
    }
  }
  return out;
}

inline StageArray optimistic_tables(const PreferenceGame& g, const ConditionalOccupancy& d_t,
                                    const ConditionalOccupancy& d_prev, bool as_loss) {
  StageArray out(g.horizon, g.num_states, g.num_actions);
  for (int h = 0; h < g.horizon; ++h) {
    const auto r = as_loss ? optimistic_loss(g, d_t, d_prev, h)
                           : optimistic_reward(g, d_t, d_prev, h);
    std::copy(r.begin(), r.end(), out.stage(h).begin());
  }
  return out;
}

/// Applies row <- prev ⊙ exp(eta_h q) to every state owned by a listed
/// initial state; other rows keep their previous value.
inline Policy multiplicative_step(const PreferenceGame& g, const Policy& prev, const StageArray& q,
                                  const std::vector<double>& etas) {
  Policy next = prev;
  for (int h = 0; h < g.horizon; ++h) {
    for (int s = 0; s < g.num_states; ++s) {
      if (!(g.initial_dist[g.init_partition[s]] > 0.0)) continue;
      multiplicative_update(prev.row(h, s), q.row(h, s), etas[h], next.row(h, s));
    }
  }
  return next;
}

inline std::vector<double> ompo_etas(const PreferenceGame& g, double beta) {
  std::vector<double> etas(g.horizon);
  for (int h = 0; h < g.horizon; ++h) etas[h] = stage_step(g, beta, h);
  return etas;
}

}  // namespace detail

enum class Player { kMax, kMin };

/// Result of one soft Bellman sweep: the updated policy, the regularized
/// action values Q^t_h and soft state values V^t_h (stored with one action).
struct SoftBellmanUpdate {
  Policy policy;
  StageArray q;
  StageArray soft_value;
};

/// Backward soft Bellman recursion for one player against fixed per-stage
/// payoff tables (one table per initial state, in initial_states() order):
///   Q_h = payoff_h + F V_{h+1},
///   V_h(s) = (1/beta_h) log sum_a pi_h(a|s) exp(beta_h Q_h(s,a))      (max player)
///   pi'_h(.|s) ∝ pi_h(.|s) exp(beta_h Q_h(s,.)).
/// The min player uses -beta_h throughout (a soft minimum).
inline SoftBellmanUpdate soft_bellman_update(const PreferenceGame& g, const Policy& pi,
                                             const std::vector<StageArray>& payoffs,
                                             double beta, Player player = Player::kMax) {
  if (!(beta > 0.0)) throw std::domain_error("beta must be positive");
  const auto starts = g.initial_states();
  if (payoffs.size() != starts.size()) throw std::domain_error("one payoff table per initial state");
  const int S = g.num_states, A = g.num_actions;
  const double sign = player == Player::kMax ? 1.0 : -1.0;
  std::vector<StageArray> q_tables, v_tables;
  std::vector<double> v(S), cont(g.num_pairs()), scaled(A);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    StageArray q(g.horizon, S, A), soft(g.horizon, S, 1);
    std::fill(v.begin(), v.end(), 0.0);
    for (int h = g.horizon - 1; h >= 0; --h) {
      expect_next(g, v, cont);
      const auto pay = payoffs[k].stage(h);
      auto q_h = q.stage(h);
      for (int i = 0; i < g.num_pairs(); ++i) q_h[i] = pay[i] + cont[i];
      const double eta = sign * stage_step(g, beta, h);
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) scaled[a] = eta * q(h, s, a);
        v[s] = log_weighted_sum_exp(pi.row(h, s), scaled) / eta;
        if (!std::isfinite(v[s])) throw std::runtime_error("soft Bellman value overflow");
        soft(h, s, 0) = v[s];
      }
    }
    q_tables.push_back(std::move(q));
    v_tables.push_back(std::move(soft));
  }
  SoftBellmanUpdate out;
  out.q = detail::merge_by_partition(g, starts, q_tables);
  out.soft_value = detail::merge_by_partition(g, starts, v_tables);
  auto etas = detail::ompo_etas(g, beta);
  for (double& e : etas) e *= sign;
  out.policy = detail::multiplicative_step(g, pi, out.q, etas);
  return out;
}

/// Full exact OMPO update with the regularized values exposed.
inline SoftBellmanUpdate ompo_exact_update(const PreferenceGame& g, const SolverState& state,
                                           double beta) {
  std::vector<StageArray> payoffs;
  for (const auto& part : state.current_occupancy.parts) {
    payoffs.push_back(detail::optimistic_tables(
        g, part, state.previous_occupancy.given(part.initial_state()), false));
  }
  return soft_bellman_update(g, state.current, payoffs, beta, Player::kMax);
}

inline Policy ompo_exact_step(const PreferenceGame& g, const SolverState& state, double beta) {
  return ompo_exact_update(g, state, beta).policy;
}

/// One player's OMPO update against an explicit opponent sequence. For the
/// min player the opponent is the row player and the payoff is its
/// extrapolated preference, which the min player drives down.
inline Policy ompo_player_step(const PreferenceGame& g, const Policy& own,
                               const OccupancyMeasure& opponent_now,
                               const OccupancyMeasure& opponent_before, double beta,
                               Player player) {
  std::vector<StageArray> payoffs;
  for (const auto& part : opponent_now.parts) {
    payoffs.push_back(detail::optimistic_tables(
        g, part, opponent_before.given(part.initial_state()), player == Player::kMin));
  }
  return soft_bellman_update(g, own, payoffs, beta, player).policy;
}

/// Explicit max and min players run simultaneously.
struct TwoPlayerState {
  SolverState max_player;
  SolverState min_player;
};

inline void ompo_two_player_step(const PreferenceGame& g, TwoPlayerState& st, double beta) {
  auto x = ompo_player_step(g, st.max_player.current, st.min_player.current_occupancy,
                            st.min_player.previous_occupancy, beta, Player::kMax);
  auto y = ompo_player_step(g, st.min_player.current, st.max_player.current_occupancy,
                            st.max_player.previous_occupancy, beta, Player::kMin);
  st.max_player.advance(g, std::move(x));
  st.min_player.advance(g, std::move(y));
}

/// Standard Q of pi^t under the optimistic reward:
///   Q~_h(s,a) = 2 E_{d^t_h} Q^{pi^t,pi^t}_h(s,a,.) - E_{d^{t-1}_h} Q^{pi^t,pi^{t-1}}_h(s,a,.),
/// evaluated through the single-player reduction.
inline StageArray optimistic_q(const PreferenceGame& g, const SolverState& state) {
  const auto starts = g.initial_states();
  std::vector<StageArray> tables;
  for (int s1 : starts) {
    const auto rewards = detail::optimistic_tables(g, state.current_occupancy.given(s1),
                                                   state.previous_occupancy.given(s1), false);
    tables.push_back(evaluate_q(g, state.current, rewards));
  }
  return detail::merge_by_partition(g, starts, tables);
}

inline Policy ompo_approx_step(const PreferenceGame& g, const SolverState& state, double beta) {
  if (!(beta > 0.0)) throw std::domain_error("beta must be positive");
  return detail::multiplicative_step(g, state.current, optimistic_q(g, state),
                                     detail::ompo_etas(g, beta));
}

/// E_{S',A' ~ d^{pi}_h | s1(s)} Q^{pi,pi}_h(s,a,S',A') for every (h,s,a).
inline StageArray mpo_q(const PreferenceGame& g, const Policy& pi) {
  const auto starts = g.initial_states();
  std::vector<StageArray> tables;
  for (int s1 : starts) {
    const auto d = occupancy_forward(g, pi, s1);
    tables.push_back(evaluate_q(g, pi, reward_against(g, d)));
  }
  return detail::merge_by_partition(g, starts, tables);
}

/// Natural actor-critic step with a flat learning rate.
inline Policy mpo_step(const PreferenceGame& g, const Policy& pi, double beta) {
  if (!(beta > 0.0)) throw std::domain_error("beta must be positive");
  check_policy(g, pi);
  return detail::multiplicative_step(g, pi, mpo_q(g, pi), std::vector<double>(g.horizon, beta));
}

/// Minimizes, independently at every (h, s), the squared regression loss
///   sum_a (log pi(a|s) - log pi_ref(a|s) - eta_h q(h,s,a) + offset_h)^2
/// by full-batch gradient descent on softmax logits initialised at pi_ref.
/// Zero-probability actions of pi_ref stay at zero.
inline Policy regression_update(const Policy& reference, const StageArray& q,
                                const std::vector<double>& etas,
                                const std::vector<double>& offsets,
                                const RegressionOptions& options) {
  if (options.steps < 0 || !(options.step_size > 0.0)) {
    throw std::domain_error("regression needs steps >= 0 and a positive step size");
  }
  Policy out = reference;
  const int A = reference.num_actions();
  std::vector<double> logits(A), target(A), logp(A), err(A);
  std::vector<char> live(A);
  for (int h = 0; h < reference.horizon(); ++h) {
    for (int s = 0; s < reference.num_states(); ++s) {
      const auto ref = reference.row(h, s);
      for (int a = 0; a < A; ++a) {
        live[a] = ref[a] > 0.0;
        logits[a] = live[a] ? std::log(ref[a]) : 0.0;
        target[a] = live[a] ? std::log(ref[a]) + etas[h] * q(h, s, a) - offsets[h] : 0.0;
      }
      auto probs = out.row(h, s);
      for (int step = 0; step <= options.steps; ++step) {
        double peak = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
          if (live[a]) peak = std::max(peak, logits[a]);
        }
        double z = 0.0;
        for (int a = 0; a < A; ++a) z += live[a] ? std::exp(logits[a] - peak) : 0.0;
        const double log_z = peak + std::log(z);
        double err_sum = 0.0, loss = 0.0;
        for (int a = 0; a < A; ++a) {
          if (!live[a]) continue;
          logp[a] = logits[a] - log_z;
          probs[a] = std::exp(logp[a]);
          err[a] = logp[a] - target[a];
          err_sum += err[a];
          loss += err[a] * err[a];
        }
        if (!std::isfinite(loss)) throw std::runtime_error("regression loss is not finite");
        if (step == options.steps) break;
        // d loss / d logit_b = 2 (err_b - pi_b sum_a err_a)
        for (int a = 0; a < A; ++a) {
          if (live[a]) logits[a] -= options.step_size * 2.0 * (err[a] - probs[a] * err_sum);
        }
      }
    }
  }
  return out;
}

/// Regression surrogate of the expectation-form OMPO update: eta_h = beta_h
/// and the log-partition replaced by beta_h (H - h) / 2.
inline Policy ompo_regression_step(const PreferenceGame& g, const SolverState& state, double beta,
                                   const RegressionOptions& options) {
  const auto etas = detail::ompo_etas(g, beta);
  std::vector<double> offsets(g.horizon);
  for (int h = 0; h < g.horizon; ++h) offsets[h] = etas[h] * g.remaining(h) / 2.0;
  return regression_update(state.current, optimistic_q(g, state), etas, offsets, options);
}

/// Regression surrogate of the MPO update: flat beta and log-partition
/// replaced by beta (H - h) / 2.
inline Policy mpo_regression_step(const PreferenceGame& g, const Policy& pi, double beta,
                                  const RegressionOptions& options) {
  std::vector<double> etas(g.horizon, beta), offsets(g.horizon);
  for (int h = 0; h < g.horizon; ++h) offsets[h] = beta * g.remaining(h) / 2.0;
  return regression_update(pi, mpo_q(g, pi), etas, offsets, options);
}

/// Running stagewise sum of occupancy measures.
class OccupancyAverager {
 public:
  void add(const OccupancyMeasure& d) {
    if (count_ == 0) {
      sum_ = d;
    } else {
      if (d.parts.size() != sum_.parts.size()) throw std::domain_error("occupancy shape mismatch");
      for (std::size_t k = 0; k < d.parts.size(); ++k) {
        if (!d.parts[k].same_shape(sum_.parts[k]) ||
            d.parts[k].initial_state() != sum_.parts[k].initial_state()) {
          throw std::domain_error("occupancy shape mismatch");
        }
        auto& acc = sum_.parts[k].values();
        const auto& x = d.parts[k].values();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
      }
    }
    ++count_;
  }

  int count() const { return count_; }

  OccupancyMeasure mean() const {
    if (count_ == 0) throw std::domain_error("empty occupancy history");
    OccupancyMeasure out = sum_;
    for (auto& part : out.parts) {
      for (double& x : part.values()) x /= count_;
    }
    return out;
  }

 private:
  OccupancyMeasure sum_;
  int count_ = 0;
};

/// Policy whose occupancy is the stagewise mean of the history:
///   pi(a|s) = sum_t d^t_h(s,a) / sum_t d^t_h(s).
inline Policy averaged_policy(const PreferenceGame& g, const std::vector<OccupancyMeasure>& history) {
  if (history.empty()) throw std::domain_error("empty occupancy history");
  OccupancyAverager avg;
  for (const auto& d : history) avg.add(d);
  return policy_from_occupancy(g, avg.mean());
}

struct TraceRecord {
  int iteration = 0;
  double last_exploitability = 0.0;
  double averaged_exploitability = 0.0;
  double nash_gap = 0.0;  // worst side, averaged iterate
  double self_play_value = 0.0;
  double elapsed_ms = 0.0;
};

struct SolverTrace {
  Algorithm algorithm = Algorithm::kOmpoExact;
  double beta = 0.0;
  std::vector<TraceRecord> records;
  Policy last;
  Policy averaged;
};

/// Called after every iteration with the state holding pi^{t+1}.
using SolverObserver = std::function<void(const SolverState&)>;

/// One update of the configured algorithm.
inline Policy solver_step(const PreferenceGame& g, const SolverState& state, Algorithm algorithm,
                          double beta, const RegressionOptions& regression) {
  switch (algorithm) {
    case Algorithm::kOmpoExact: return ompo_exact_step(g, state, beta);
    case Algorithm::kOmpoApprox: return ompo_approx_step(g, state, beta);
    case Algorithm::kMpo: return mpo_step(g, state.current, beta);
    case Algorithm::kOmpoRegression: return ompo_regression_step(g, state, beta, regression);
    case Algorithm::kMpoRegression: return mpo_regression_step(g, state.current, beta, regression);
  }
  throw std::domain_error("unknown algorithm");
}

/// Self-play loop. Records are taken after every `eval_every`-th update and
/// after the final one; at record t the last iterate is pi^{t+1} and the
/// averaged iterate realizes the mean of d^1 .. d^t.
inline SolverTrace run_solver(const PreferenceGame& g, const SolverConfig& config,
                              const SolverObserver& observer = {}) {
  if (config.iterations < 0) throw std::domain_error("iterations must be non-negative");
  if (config.eval_every < 1) throw std::domain_error("eval_every must be positive");
  require_valid(g);
  SolverTrace trace;
  trace.algorithm = config.algorithm;
  trace.beta = config.beta.value_or(default_beta(g, config.algorithm, config.iterations));
  if (!(trace.beta > 0.0)) throw std::domain_error("beta must be positive");

  auto state = SolverState::initial(g);
  OccupancyAverager history;
  history.add(state.current_occupancy);
  trace.last = state.current;
  trace.averaged = state.current;

  const auto start = std::chrono::steady_clock::now();
  const double half_h = 0.5 * g.horizon;
  for (int t = 1; t <= config.iterations; ++t) {
    state.advance(g, solver_step(g, state, config.algorithm, trace.beta, config.regression));
    if (observer) observer(state);
    if (t % config.eval_every == 0 || t == config.iterations) {
      const Policy averaged = policy_from_occupancy(g, history.mean());
      const auto avg_occ = occupancy_measure(g, averaged);
      const double avg_self = bilinear_objective(g, avg_occ, avg_occ);
      const double avg_best = detail::respond(g, avg_occ, Sense::kMaximize).value;
      const double avg_worst = detail::respond(g, avg_occ, Sense::kMinimize).value;
      TraceRecord rec;
      rec.iteration = t;
      rec.last_exploitability = std::max(
          detail::respond(g, state.current_occupancy, Sense::kMaximize).value - half_h, 0.0);
      rec.averaged_exploitability = std::max(avg_best - half_h, 0.0);
      rec.nash_gap = std::max(avg_best - avg_self, avg_self - avg_worst);
      rec.self_play_value =
          bilinear_objective(g, state.current_occupancy, state.current_occupancy);
      rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
      trace.records.push_back(rec);
      if (t == config.iterations) trace.averaged = averaged;
    }
    history.add(state.current_occupancy);
  }
  trace.last = state.current;
  return trace;
}

/// Objective maximized by the exact OMPO update for one initial state:
///   sum_h [ <d_h, r~_h> - (1/beta) sum_{h' <= h} KL_cond(d_{h'} || pi^t_{h'}) ]
/// where KL_cond(d || pi) = sum_{s,a} d(s,a) log(pi_d(a|s) / pi(a|s)).
inline double mirror_descent_objective(const PreferenceGame& g, const StageArray& d,
                                       const Policy& reference, const StageArray& rewards,
                                       double beta) {
  double total = 0.0, divergence = 0.0;
  for (int h = 0; h < g.horizon; ++h) {
    double linear = 0.0, kl = 0.0;
    for (int s = 0; s < g.num_states; ++s) {
      double mass = 0.0;
      for (double x : d.row(h, s)) mass += x;
      for (int a = 0; a < g.num_actions; ++a) {
        const double x = d(h, s, a);
        linear += x * rewards(h, s, a);
        if (x > 0.0) kl += x * std::log((x / mass) / reference(h, s, a));
      }
    }
    divergence += kl;
    total += linear - divergence / beta;
  }
  return total;
}

}  // namespace ompo
