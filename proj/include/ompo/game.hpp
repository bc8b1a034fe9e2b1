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

// Finite-horizon two-player constant-sum games induced by a pairwise
// preference oracle, together with the exact dynamic-programming primitives
// shared by every solver and metric in the library.
//
// Conventions used throughout:
//   * stages are 0-based, h = 0 .. H-1. The number of remaining stages at
//     stage h (inclusive) is H - h.
//   * state-action pairs are flattened as i = s * A + a.
//   * the reward r(s, a, s', a') is the probability that [s, a] is preferred
//     over [s', a'], stored row-major over (i, j) pairs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ompo {

/// Tolerance for a distribution to count as stochastic.
inline constexpr double kStochasticTolerance = 1e-12;
/// Distributions within this distance of stochastic are silently renormalized.
inline constexpr double kRenormalizeTolerance = 1e-9;
/// Maximum Bellman-flow residual of a feasible occupancy measure.
inline constexpr double kFlowTolerance = 1e-10;
/// Residual above which an occupancy is rejected as infeasible.
inline constexpr double kFeasibilityTolerance = 1e-9;

/// Dense (stage, state, action) array. Base storage for policies,
/// occupancies and per-stage value tables.
class StageArray {
 public:
  StageArray() = default;
  StageArray(int horizon, int num_states, int num_actions, double fill = 0.0)
      : horizon_(horizon),
        num_states_(num_states),
        num_actions_(num_actions),
        values_(static_cast<std::size_t>(horizon) * num_states * num_actions,
                fill) {}

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int stage_size() const { return num_states_ * num_actions_; }

  double operator()(int h, int s, int a) const { return values_[index(h, s, a)]; }
  double& operator()(int h, int s, int a) { return values_[index(h, s, a)]; }

  std::span<const double> row(int h, int s) const {
    return {values_.data() + index(h, s, 0), static_cast<std::size_t>(num_actions_)};
  }
  std::span<double> row(int h, int s) {
    return {values_.data() + index(h, s, 0), static_cast<std::size_t>(num_actions_)};
  }
  std::span<const double> stage(int h) const {
    return {values_.data() + index(h, 0, 0), static_cast<std::size_t>(stage_size())};
  }
  std::span<double> stage(int h) {
    return {values_.data() + index(h, 0, 0), static_cast<std::size_t>(stage_size())};
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool same_shape(const StageArray& other) const {
    return horizon_ == other.horizon_ && num_states_ == other.num_states_ &&
           num_actions_ == other.num_actions_;
  }

  friend bool operator==(const StageArray&, const StageArray&) = default;

 private:
  std::size_t index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * num_states_ + s) * num_actions_ + a;
  }

  int horizon_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> values_;
};

/// Finite-horizon game M = (S, A, f, r, nu_1, H) with an antisymmetric
/// pairwise preference reward.
struct PreferenceGame {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<double> transition;    // [s][a][s']
  std::vector<double> initial_dist;  // [s]
  std::vector<double> reward;        // [s][a][s'][a']
  std::vector<int> init_partition;   // [s] -> initial state that leads to s

  /// Allocates a game with zero kernels, a tie reward and state 0 as the
  /// only initial state.
  static PreferenceGame zeros(int num_states, int num_actions, int horizon) {
    if (num_states < 1 || num_actions < 1 || horizon < 1) {
      throw std::domain_error("game dimensions must be positive");
    }
    PreferenceGame g;
    g.num_states = num_states;
    g.num_actions = num_actions;
    g.horizon = horizon;
    const std::size_t sa = static_cast<std::size_t>(num_states) * num_actions;
    g.transition.assign(sa * num_states, 0.0);
    g.initial_dist.assign(num_states, 0.0);
    g.initial_dist[0] = 1.0;
    g.reward.assign(sa * sa, 0.5);
    g.init_partition.assign(num_states, 0);
    return g;
  }

  int num_pairs() const { return num_states * num_actions; }
  int pair(int s, int a) const { return s * num_actions + a; }

  double f(int s, int a, int next) const {
    return transition[static_cast<std::size_t>(pair(s, a)) * num_states + next];
  }
  double& f(int s, int a, int next) {
    return transition[static_cast<std::size_t>(pair(s, a)) * num_states + next];
  }
  std::span<const double> successors(int s, int a) const {
    return {transition.data() + static_cast<std::size_t>(pair(s, a)) * num_states,
            static_cast<std::size_t>(num_states)};
  }

  double r(int s, int a, int s2, int a2) const {
    return reward[static_cast<std::size_t>(pair(s, a)) * num_pairs() + pair(s2, a2)];
  }
  double& r(int s, int a, int s2, int a2) {
    return reward[static_cast<std::size_t>(pair(s, a)) * num_pairs() + pair(s2, a2)];
  }
  /// Preference of pair i over every pair j.
  std::span<const double> reward_row(int i) const {
    return {reward.data() + static_cast<std::size_t>(i) * num_pairs(),
            static_cast<std::size_t>(num_pairs())};
  }

  /// Support of the initial distribution, ascending.
  std::vector<int> initial_states() const {
    std::vector<int> out;
    for (int s = 0; s < num_states; ++s) {
      if (initial_dist[s] > 0.0) out.push_back(s);
    }
    return out;
  }

  /// Number of stages left at stage h, inclusive.
  int remaining(int h) const { return horizon - h; }
};

/// Non-stationary stochastic policy pi_h(a | s).
class Policy : public StageArray {
 public:
  Policy() = default;
  Policy(int horizon, int num_states, int num_actions, double fill = 0.0)
      : StageArray(horizon, num_states, num_actions, fill) {}

  static Policy uniform(int horizon, int num_states, int num_actions) {
    return Policy(horizon, num_states, num_actions, 1.0 / num_actions);
  }
  static Policy uniform(const PreferenceGame& game) {
    return uniform(game.horizon, game.num_states, game.num_actions);
  }
  /// Deterministic stationary policy playing `action` everywhere.
  static Policy pure(const PreferenceGame& game, int action) {
    Policy p(game.horizon, game.num_states, game.num_actions);
    for (int h = 0; h < game.horizon; ++h) {
      for (int s = 0; s < game.num_states; ++s) p(h, s, action) = 1.0;
    }
    return p;
  }
};

/// d_h(s, a | s1) for one initial state s1.
class ConditionalOccupancy : public StageArray {
 public:
  ConditionalOccupancy() = default;
  ConditionalOccupancy(int initial_state, int horizon, int num_states, int num_actions)
      : StageArray(horizon, num_states, num_actions), initial_state_(initial_state) {}

  int initial_state() const { return initial_state_; }

  double state_mass(int h, int s) const {
    double total = 0.0;
    for (double x : row(h, s)) total += x;
    return total;
  }

  friend bool operator==(const ConditionalOccupancy&, const ConditionalOccupancy&) = default;

 private:
  int initial_state_ = 0;
};

/// Conditional occupancies for every initial state in the support of nu_1.
struct OccupancyMeasure {
  std::vector<ConditionalOccupancy> parts;  // ascending initial state

  const ConditionalOccupancy& given(int s1) const {
    for (const auto& part : parts) {
      if (part.initial_state() == s1) return part;
    }
    throw std::domain_error("no occupancy for initial state " + std::to_string(s1));
  }
  const ConditionalOccupancy* find(int s1) const {
    for (const auto& part : parts) {
      if (part.initial_state() == s1) return &part;
    }
    return nullptr;
  }
};

/// Stagewise pairwise values Q_h(s,a,s',a') and V_h(s,s'), V_H == 0.
struct PairwiseValues {
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> q;  // [h][s][a][s'][a'], h < H
  std::vector<double> v;  // [h][s][s'], h <= H

  double Q(int h, int s, int a, int s2, int a2) const {
    const std::size_t sa = static_cast<std::size_t>(num_states) * num_actions;
    return q[(static_cast<std::size_t>(h) * sa + s * num_actions + a) * sa +
             s2 * num_actions + a2];
  }
  double V(int h, int s, int s2) const {
    return v[(static_cast<std::size_t>(h) * num_states + s) * num_states + s2];
  }
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

inline std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

/// States reachable within the horizon from `s1` through positive-probability
/// transitions under any action.
inline std::vector<char> reachable_from(const PreferenceGame& g, int s1) {
  std::vector<char> seen(g.num_states, 0);
  std::vector<int> frontier{s1};
  seen[s1] = 1;
  for (int h = 1; h < g.horizon && !frontier.empty(); ++h) {
    std::vector<int> next;
    for (int s : frontier) {
      for (int a = 0; a < g.num_actions; ++a) {
        const auto row = g.successors(s, a);
        for (int t = 0; t < g.num_states; ++t) {
          if (row[t] > 0.0 && !seen[t]) {
            seen[t] = 1;
            next.push_back(t);
          }
        }
      }
    }
    frontier = std::move(next);
  }
  return seen;
}

inline void require_shape(const PreferenceGame& g, const StageArray& x, const char* what) {
  if (x.horizon() != g.horizon || x.num_states() != g.num_states ||
      x.num_actions() != g.num_actions) {
    throw std::domain_error(std::string(what) + " shape does not match the game");
  }
}

}  // namespace detail

/// Reports every violated model invariant; an empty report means the game is
/// well formed.
inline ValidationReport validate_game(const PreferenceGame& g) {
  ValidationReport report;
  auto fail = [&report](std::string msg) { report.violations.push_back(std::move(msg)); };

  if (g.num_states < 1 || g.num_actions < 1 || g.horizon < 1) {
    fail("dimensions must be positive");
    return report;
  }
  const std::size_t S = g.num_states;
  const std::size_t SA = S * g.num_actions;
  if (g.transition.size() != SA * S) fail("transition has wrong size");
  if (g.initial_dist.size() != S) fail("initial_dist has wrong size");
  if (g.reward.size() != SA * SA) fail("reward has wrong size");
  if (g.init_partition.size() != S) fail("init_partition has wrong size");
  if (!report.ok()) return report;
  for (int s = 0; s < g.num_states; ++s) {
    if (g.init_partition[s] < 0 || g.init_partition[s] >= g.num_states) {
      fail("init_partition of state " + std::to_string(s) + " is not a state");
    }
  }
  if (!report.ok()) return report;

  for (int s = 0; s < g.num_states; ++s) {
    for (int a = 0; a < g.num_actions; ++a) {
      double total = 0.0;
      bool negative = false;
      for (double p : g.successors(s, a)) {
        total += p;
        negative = negative || p < 0.0 || !std::isfinite(p);
      }
      if (negative || std::abs(total - 1.0) > kStochasticTolerance) {
        fail("transition row (s=" + std::to_string(s) + ", a=" + std::to_string(a) +
             ") is not a distribution (sum " + detail::fmt_double(total) + ")");
      }
    }
  }
  double init_total = 0.0;
  bool init_negative = false;
  for (double p : g.initial_dist) {
    init_total += p;
    init_negative = init_negative || p < 0.0 || !std::isfinite(p);
  }
  if (init_negative || std::abs(init_total - 1.0) > kStochasticTolerance) {
    fail("initial_dist is not a distribution (sum " + detail::fmt_double(init_total) + ")");
  }

  const int n = g.num_pairs();
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double rij = g.reward[static_cast<std::size_t>(i) * n + j];
      const double rji = g.reward[static_cast<std::size_t>(j) * n + i];
      const int s = i / g.num_actions, a = i % g.num_actions;
      const int s2 = j / g.num_actions, a2 = j % g.num_actions;
      const std::string tuple = "(" + std::to_string(s) + "," + std::to_string(a) + "," +
                                std::to_string(s2) + "," + std::to_string(a2) + ")";
      if (!(rij >= 0.0 && rij <= 1.0) || !(rji >= 0.0 && rji <= 1.0)) {
        fail("reward outside [0,1] at " + tuple);
      } else if (std::abs(rij + rji - 1.0) > kStochasticTolerance) {
        fail("antisymmetry violated at " + tuple + ": r=" + detail::fmt_double(rij) +
             " mirror=" + detail::fmt_double(rji));
      }
    }
  }

  if (!init_negative) {
    const auto starts = g.initial_states();
    std::vector<int> owner(g.num_states, -1);
    for (int s1 : starts) {
      if (g.init_partition[s1] != s1) {
        fail("init_partition of initial state " + std::to_string(s1) + " is " +
             std::to_string(g.init_partition[s1]));
      }
      const auto seen = detail::reachable_from(g, s1);
      for (int s = 0; s < g.num_states; ++s) {
        if (!seen[s]) continue;
        if (owner[s] >= 0) {
          fail("separability violated: state " + std::to_string(s) +
               " is reachable from initial states " + std::to_string(owner[s]) + " and " +
               std::to_string(s1));
        } else {
          owner[s] = s1;
          if (g.init_partition[s] != s1) {
            fail("init_partition of state " + std::to_string(s) + " is " +
                 std::to_string(g.init_partition[s]) + " but it is reachable from " +
                 std::to_string(s1));
          }
        }
      }
    }
  }
  return report;
}

/// Renormalizes distributions that drifted by at most kRenormalizeTolerance.
/// Larger deviations are left alone so that validate_game reports them.
inline void renormalize(PreferenceGame& g) {
  auto fix = [](std::span<double> row) {
    double total = 0.0;
    for (double p : row) total += p;
    if (total > 0.0 && std::abs(total - 1.0) <= kRenormalizeTolerance) {
      for (double& p : row) p /= total;
    }
  };
  for (int s = 0; s < g.num_states; ++s) {
    for (int a = 0; a < g.num_actions; ++a) {
      fix({g.transition.data() + static_cast<std::size_t>(g.pair(s, a)) * g.num_states,
           static_cast<std::size_t>(g.num_states)});
    }
  }
  fix(g.initial_dist);
}

/// Throws std::domain_error unless the game passes validate_game.
inline void require_valid(const PreferenceGame& g) {
  const auto report = validate_game(g);
  if (!report.ok()) throw std::domain_error("invalid game: " + report.violations.front());
}

/// Throws std::domain_error if `pi` does not fit the game or a row is not a
/// distribution (within kRenormalizeTolerance).
inline void check_policy(const PreferenceGame& g, const Policy& pi) {
  detail::require_shape(g, pi, "policy");
  for (int h = 0; h < g.horizon; ++h) {
    for (int s = 0; s < g.num_states; ++s) {
      double total = 0.0;
      for (double p : pi.row(h, s)) {
        if (!(p >= 0.0)) throw std::domain_error("policy has a negative or NaN entry");
        total += p;
      }
      if (std::abs(total - 1.0) > kRenormalizeTolerance) {
        throw std::domain_error("policy row (h=" + std::to_string(h) +
                                ", s=" + std::to_string(s) + ") sums to " +
                                detail::fmt_double(total));
      }
    }
  }
}

/// Forward recursion for d_h(. | s1):
///   d_0(s,a) = 1{s = s1} pi_0(a|s1),
///   d_{h+1}(s,a) = pi_{h+1}(a|s) sum_{s',a'} f(s|s',a') d_h(s',a').
inline ConditionalOccupancy occupancy_forward(const PreferenceGame& g, const Policy& pi, int s1) {
  detail::require_shape(g, pi, "policy");
  if (s1 < 0 || s1 >= g.num_states || !(g.initial_dist[s1] > 0.0)) {
    throw std::domain_error("state " + std::to_string(s1) + " is not in the support of nu_1");
  }
  const int S = g.num_states, A = g.num_actions;
  ConditionalOccupancy d(s1, g.horizon, S, A);
  for (int a = 0; a < A; ++a) d(0, s1, a) = pi(0, s1, a);
  std::vector<double> next_state(S);
  for (int h = 0; h + 1 < g.horizon; ++h) {
    std::fill(next_state.begin(), next_state.end(), 0.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double w = d(h, s, a);
        if (w == 0.0) continue;
        const auto row = g.successors(s, a);
        for (int t = 0; t < S; ++t) next_state[t] += w * row[t];
      }
    }
    for (int s = 0; s < S; ++s) {
      if (next_state[s] == 0.0) continue;
      for (int a = 0; a < A; ++a) d(h + 1, s, a) = next_state[s] * pi(h + 1, s, a);
    }
  }
  return d;
}

/// Conditional occupancies of `pi` for every initial state.
inline OccupancyMeasure occupancy_measure(const PreferenceGame& g, const Policy& pi) {
  OccupancyMeasure out;
  for (int s1 : g.initial_states()) out.parts.push_back(occupancy_forward(g, pi, s1));
  return out;
}

/// Largest violation of the Bellman flow constraints of F_{s1}.
inline double flow_residual(const PreferenceGame& g, const StageArray& d, int s1) {
  detail::require_shape(g, d, "occupancy");
  const int S = g.num_states, A = g.num_actions;
  double worst = 0.0;
  for (int s = 0; s < S; ++s) {
    double mass = 0.0;
    for (double x : d.row(0, s)) mass += x;
    worst = std::max(worst, std::abs(mass - (s == s1 ? 1.0 : 0.0)));
  }
  std::vector<double> inflow(S);
  for (int h = 0; h + 1 < g.horizon; ++h) {
    std::fill(inflow.begin(), inflow.end(), 0.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double w = d(h, s, a);
        if (w == 0.0) continue;
        const auto row = g.successors(s, a);
        for (int t = 0; t < S; ++t) inflow[t] += w * row[t];
      }
    }
    for (int s = 0; s < S; ++s) {
      double mass = 0.0;
      for (double x : d.row(h + 1, s)) mass += x;
      worst = std::max(worst, std::abs(mass - inflow[s]));
    }
  }
  return worst;
}

inline double flow_residual(const PreferenceGame& g, const ConditionalOccupancy& d) {
  return flow_residual(g, d, d.initial_state());
}

/// Pairwise Bellman backup from V_H = 0:
///   Q_h(s,a,s',a') = r(s,a,s',a') + E_{f(.|s,a) x f(.|s',a')} V_{h+1},
///   V_h(s,s') = E_{pi_h(.|s) x pi'_h(.|s')} Q_h(s,.,s',.).
/// Dense in (S*A)^2 per stage; meant for small games and as a reference.
inline PairwiseValues pairwise_backup(const PreferenceGame& g, const Policy& pi,
                                      const Policy& pi_prime) {
  detail::require_shape(g, pi, "policy");
  detail::require_shape(g, pi_prime, "opponent policy");
  const int S = g.num_states, A = g.num_actions, H = g.horizon;
  const std::size_t SA = static_cast<std::size_t>(S) * A;
  PairwiseValues out;
  out.horizon = H;
  out.num_states = S;
  out.num_actions = A;
  out.q.assign(static_cast<std::size_t>(H) * SA * SA, 0.0);
  out.v.assign(static_cast<std::size_t>(H + 1) * S * S, 0.0);

  // w[next][j] = E_{s'' ~ f(.|j)} V_{h+1}(next, s'')
  std::vector<double> w(static_cast<std::size_t>(S) * SA);
  for (int h = H - 1; h >= 0; --h) {
    const double* v_next = out.v.data() + static_cast<std::size_t>(h + 1) * S * S;
    for (int next = 0; next < S; ++next) {
      for (std::size_t j = 0; j < SA; ++j) {
        const double* row = g.transition.data() + j * S;
        double acc = 0.0;
        for (int t = 0; t < S; ++t) acc += row[t] * v_next[static_cast<std::size_t>(next) * S + t];
        w[static_cast<std::size_t>(next) * SA + j] = acc;
      }
    }
    double* q_h = out.q.data() + static_cast<std::size_t>(h) * SA * SA;
    for (std::size_t i = 0; i < SA; ++i) {
      const double* f_i = g.transition.data() + i * S;
      double* q_row = q_h + i * SA;
      const double* r_row = g.reward.data() + i * SA;
      for (std::size_t j = 0; j < SA; ++j) q_row[j] = r_row[j];
      for (int next = 0; next < S; ++next) {
        const double p = f_i[next];
        if (p == 0.0) continue;
        const double* w_row = w.data() + static_cast<std::size_t>(next) * SA;
        for (std::size_t j = 0; j < SA; ++j) q_row[j] += p * w_row[j];
      }
    }
    double* v_h = out.v.data() + static_cast<std::size_t>(h) * S * S;
    for (int s = 0; s < S; ++s) {
      for (int s2 = 0; s2 < S; ++s2) {
        double acc = 0.0;
        for (int a = 0; a < A; ++a) {
          const double pa = pi(h, s, a);
          if (pa == 0.0) continue;
          const double* q_row = q_h + (static_cast<std::size_t>(s) * A + a) * SA;
          for (int a2 = 0; a2 < A; ++a2) {
            acc += pa * pi_prime(h, s2, a2) * q_row[static_cast<std::size_t>(s2) * A + a2];
          }
        }
        v_h[static_cast<std::size_t>(s) * S + s2] = acc;
      }
    }
  }
  return out;
}

/// <nu_1, V^{pi, pi'}> = E_{S1 ~ nu_1} V_0(S1, S1).
inline double game_value(const PreferenceGame& g, const Policy& pi, const Policy& pi_prime) {
  const auto values = pairwise_backup(g, pi, pi_prime);
  double total = 0.0;
  for (int s1 : g.initial_states()) total += g.initial_dist[s1] * values.V(0, s1, s1);
  return total;
}

/// Bilinear form E_{s1} sum_h <d_h(.|s1), r d'_h(.|s1)> over occupancies.
inline double bilinear_objective(const PreferenceGame& g, const OccupancyMeasure& d,
                                 const OccupancyMeasure& d_prime) {
  const int n = g.num_pairs();
  double total = 0.0;
  for (int s1 : g.initial_states()) {
    const auto& x = d.given(s1);
    const auto& y = d_prime.given(s1);
    if (flow_residual(g, x) > kFeasibilityTolerance ||
        flow_residual(g, y) > kFeasibilityTolerance) {
      throw std::domain_error("occupancy violates the Bellman flow constraints");
    }
    double value = 0.0;
    for (int h = 0; h < g.horizon; ++h) {
      const auto xs = x.stage(h);
      const auto ys = y.stage(h);
      for (int i = 0; i < n; ++i) {
        if (xs[i] == 0.0) continue;
        const auto row = g.reward_row(i);
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += row[j] * ys[j];
        value += xs[i] * acc;
      }
    }
    total += g.initial_dist[s1] * value;
  }
  return total;
}

/// pi_h(a|s) = d_h(s,a) / sum_a d_h(s,a), taking d from the initial state that
/// owns s. Rows with no mass become uniform.
inline Policy policy_from_occupancy(const PreferenceGame& g, const OccupancyMeasure& d) {
  Policy pi = Policy::uniform(g);
  for (int s = 0; s < g.num_states; ++s) {
    const auto* part = d.find(g.init_partition[s]);
    if (part == nullptr) continue;
    detail::require_shape(g, *part, "occupancy");
    for (int h = 0; h < g.horizon; ++h) {
      const double mass = part->state_mass(h, s);
      if (!(mass > 0.0)) continue;
      for (int a = 0; a < g.num_actions; ++a) pi(h, s, a) = (*part)(h, s, a) / mass;
    }
  }
  return pi;
}

}  // namespace ompo
