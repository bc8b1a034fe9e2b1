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

// Rollouts and Monte-Carlo estimators of the Q functions used by the
// practical solvers. Paired rollouts draw from independent streams split off
// the caller's generator.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "ompo/game.hpp"

namespace ompo {

using Rng = std::mt19937_64;

struct Step {
  int stage = 0;
  int state = 0;
  int action = 0;
  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  int initial_state = 0;
  std::vector<Step> steps;  // stages start .. H-1
};

struct RolloutStart {
  int stage = 0;
  int state = 0;
  std::optional<int> action;  // forced at `stage` when set
};

struct EstimatorReport {
  double estimate = 0.0;
  int samples = 0;
  double std_error = 0.0;
};

namespace detail {

inline int sample_index(std::span<const double> probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

/// Welford accumulator.
class MeanVar {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / n_;
    m2_ += delta * (x - mean_);
  }
  EstimatorReport report() const {
    EstimatorReport r;
    r.estimate = mean_;
    r.samples = n_;
    r.std_error = n_ > 1 ? std::sqrt(m2_ / (n_ - 1) / n_) : 0.0;
    return r;
  }

 private:
  int n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace detail

/// Samples A_h ~ pi_h(.|S_h), S_{h+1} ~ f(.|S_h, A_h) from `start` to the
/// end of the horizon.
inline Trajectory sample_trajectory(const PreferenceGame& g, const Policy& pi,
                                    const RolloutStart& start, Rng& rng) {
  if (start.stage < 0 || start.stage >= g.horizon) throw std::domain_error("invalid stage");
  if (start.state < 0 || start.state >= g.num_states) throw std::domain_error("invalid state");
  if (start.action && (*start.action < 0 || *start.action >= g.num_actions)) {
    throw std::domain_error("invalid action");
  }
  Trajectory traj;
  traj.initial_state = g.init_partition[start.state];
  traj.steps.reserve(g.horizon - start.stage);
  int s = start.state;
  for (int h = start.stage; h < g.horizon; ++h) {
    const int a = (h == start.stage && start.action) ? *start.action
                                                     : detail::sample_index(pi.row(h, s), rng);
    traj.steps.push_back({h, s, a});
    if (h + 1 < g.horizon) s = detail::sample_index(g.successors(s, a), rng);
  }
  return traj;
}

/// Full episode from S_1 = s1.
inline Trajectory sample_episode(const PreferenceGame& g, const Policy& pi, int s1, Rng& rng) {
  return sample_trajectory(g, pi, {0, s1, std::nullopt}, rng);
}

/// Unbiased estimate of the optimistic Q
///   2 E_{d^t_h} Q^{pi^t,pi^t}_h(s,a,.) - E_{d^{t-1}_h} Q^{pi^t,pi^{t-1}}_h(s,a,.)
/// from K triple rollouts: one from (h, s, a) under pi^t and two opponents
/// from s1(s) under pi^t and pi^{t-1}. Each sample is
///   sum_{tau >= h} 2 r(S_tau, A_tau, S'_tau, A'_tau) - r(S_tau, A_tau, S+_tau, A+_tau).
/// Without pi_prev (first iteration) the sample is sum_tau r(S, A, S', A').
inline EstimatorReport mc_q_ompo(const PreferenceGame& g, const Policy& pi_t,
                                 const Policy* pi_prev, int h, int s, int a, int K, Rng& rng) {
  if (K <= 0) throw std::domain_error("sample count must be positive");
  Rng& main_rng = rng;
  Rng opponent_rng(rng()), lagged_rng(rng());
  const int s1 = g.init_partition[s];
  detail::MeanVar acc;
  for (int k = 0; k < K; ++k) {
    const auto main = sample_trajectory(g, pi_t, {h, s, a}, main_rng);
    const auto opp = sample_episode(g, pi_t, s1, opponent_rng);
    double total = 0.0;
    if (pi_prev != nullptr) {
      const auto lagged = sample_episode(g, *pi_prev, s1, lagged_rng);
      for (const auto& step : main.steps) {
        const auto& o = opp.steps[step.stage];
        const auto& l = lagged.steps[step.stage];
        total += 2.0 * g.r(step.state, step.action, o.state, o.action) -
                 g.r(step.state, step.action, l.state, l.action);
      }
    } else {
      for (const auto& step : main.steps) {
        const auto& o = opp.steps[step.stage];
        total += g.r(step.state, step.action, o.state, o.action);
      }
    }
    acc.add(total);
  }
  return acc.report();
}

/// Unbiased estimate of E_{A' ~ pi^t(.|s)} Q^{pi^t,pi^t}_h(s, a, s, A') from K
/// paired rollouts started at (h, s, a) and (h, s, A').
inline EstimatorReport mc_q_mpo(const PreferenceGame& g, const Policy& pi_t, int h, int s, int a,
                                int K, Rng& rng) {
  if (K <= 0) throw std::domain_error("sample count must be positive");
  Rng& main_rng = rng;
  Rng opponent_rng(rng());
  detail::MeanVar acc;
  for (int k = 0; k < K; ++k) {
    const auto main = sample_trajectory(g, pi_t, {h, s, a}, main_rng);
    const auto opp = sample_trajectory(g, pi_t, {h, s, std::nullopt}, opponent_rng);
    double total = 0.0;
    for (std::size_t i = 0; i < main.steps.size(); ++i) {
      total += g.r(main.steps[i].state, main.steps[i].action, opp.steps[i].state,
                   opp.steps[i].action);
    }
    acc.add(total);
  }
  return acc.report();
}

}  // namespace ompo
