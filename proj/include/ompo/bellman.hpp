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

// Single-player reductions of the pairwise game. Once the opponent's
// occupancy is fixed, the expected pairwise reward factorizes into a
// per-(s,a) reward and every quantity below is an ordinary MDP backup.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "ompo/game.hpp"

namespace ompo {

/// out(s,a) = sum_{s',a'} w(s',a') r(s,a,s',a'): expected preference of
/// (s,a) against an opponent distributed as w.
inline std::vector<double> induced_reward(const PreferenceGame& g, std::span<const double> w) {
  const int n = g.num_pairs();
  std::vector<int> support;
  for (int j = 0; j < n; ++j) {
    if (w[j] != 0.0) support.push_back(j);
  }
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = g.reward.data() + static_cast<std::size_t>(i) * n;
    double acc = 0.0;
    for (int j : support) acc += row[j] * w[j];
    out[i] = acc;
  }
  return out;
}

/// out(s',a') = sum_{s,a} w(s,a) r(s,a,s',a'): expected preference of a
/// row player distributed as w over the column pair (s',a').
inline std::vector<double> induced_loss(const PreferenceGame& g, std::span<const double> w) {
  const int n = g.num_pairs();
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (w[i] == 0.0) continue;
    const double* row = g.reward.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) out[j] += w[i] * row[j];
  }
  return out;
}

/// Stagewise reward tables r'_h(s,a) against a fixed opponent occupancy.
inline StageArray reward_against(const PreferenceGame& g, const StageArray& opponent) {
  StageArray out(g.horizon, g.num_states, g.num_actions);
  for (int h = 0; h < g.horizon; ++h) {
    const auto r = induced_reward(g, opponent.stage(h));
    std::copy(r.begin(), r.end(), out.stage(h).begin());
  }
  return out;
}

/// sum_{s'} f(s'|s,a) v(s') for every pair, written into `out`.
inline void expect_next(const PreferenceGame& g, std::span<const double> v,
                        std::span<double> out) {
  const int S = g.num_states;
  for (int i = 0; i < g.num_pairs(); ++i) {
    const double* row = g.transition.data() + static_cast<std::size_t>(i) * S;
    double acc = 0.0;
    for (int t = 0; t < S; ++t) acc += row[t] * v[t];
    out[i] = acc;
  }
}

/// Standard Bellman evaluation of `pi` under stagewise rewards:
///   Q_h = r_h + F V_{h+1},  V_h(s) = <pi_h(.|s), Q_h(s,.)>,  V_H = 0.
inline StageArray evaluate_q(const PreferenceGame& g, const Policy& pi, const StageArray& rewards) {
  const int S = g.num_states, A = g.num_actions;
  StageArray q(g.horizon, S, A);
  std::vector<double> v(S, 0.0);
  std::vector<double> cont(g.num_pairs());
  for (int h = g.horizon - 1; h >= 0; --h) {
    expect_next(g, v, cont);
    const auto r = rewards.stage(h);
    auto q_h = q.stage(h);
    for (int i = 0; i < g.num_pairs(); ++i) q_h[i] = r[i] + cont[i];
    for (int s = 0; s < S; ++s) {
      double acc = 0.0;
      for (int a = 0; a < A; ++a) acc += pi(h, s, a) * q(h, s, a);
      v[s] = acc;
    }
  }
  return q;
}

enum class Sense { kMaximize, kMinimize };

struct OptimalControl {
  Policy policy;            // deterministic
  StageArray q;             // optimal action values
  std::vector<double> v0;   // optimal stage-0 state values
};

/// Backward induction with max (or min) over actions. Ties go to the lowest
/// action index.
inline OptimalControl solve_optimal(const PreferenceGame& g, const StageArray& rewards,
                                    Sense sense) {
  const int S = g.num_states, A = g.num_actions;
  OptimalControl out{Policy(g.horizon, S, A), StageArray(g.horizon, S, A), {}};
  std::vector<double> v(S, 0.0);
  std::vector<double> cont(g.num_pairs());
  for (int h = g.horizon - 1; h >= 0; --h) {
    expect_next(g, v, cont);
    const auto r = rewards.stage(h);
    auto q_h = out.q.stage(h);
    for (int i = 0; i < g.num_pairs(); ++i) q_h[i] = r[i] + cont[i];
    for (int s = 0; s < S; ++s) {
      int best = 0;
      for (int a = 1; a < A; ++a) {
        const double x = out.q(h, s, a), y = out.q(h, s, best);
        if (sense == Sense::kMaximize ? x > y : x < y) best = a;
      }
      out.policy(h, s, best) = 1.0;
      v[s] = out.q(h, s, best);
    }
  }
  out.v0 = std::move(v);
  return out;
}

/// log sum_a p_a exp(x_a), skipping zero-probability entries.
inline double log_weighted_sum_exp(std::span<const double> p, std::span<const double> x) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] > 0.0) peak = std::max(peak, x[a]);
  }
  double acc = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] > 0.0) acc += p[a] * std::exp(x[a] - peak);
  }
  return peak + std::log(acc);
}

/// row <- prev ⊙ exp(eta * q), normalized in log domain.
inline void multiplicative_update(std::span<const double> prev, std::span<const double> q,
                                  double eta, std::span<double> row) {
  const std::size_t n = prev.size();
  std::vector<double> scores(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    scores[a] = prev[a] > 0.0 ? std::log(prev[a]) + eta * q[a]
                              : -std::numeric_limits<double>::infinity();
    peak = std::max(peak, scores[a]);
  }
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    row[a] = std::exp(scores[a] - peak);
    total += row[a];
  }
  for (std::size_t a = 0; a < n; ++a) row[a] /= total;
}

}  // namespace ompo
