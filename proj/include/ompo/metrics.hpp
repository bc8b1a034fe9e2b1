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

// Exact best responses and the exploitability / Nash-gap metrics.

#include <algorithm>
#include <vector>

#include "ompo/bellman.hpp"
#include "ompo/game.hpp"

namespace ompo {

struct BestResponse {
  Policy policy;  // deterministic
  double value = 0.0;
};

namespace detail {

/// Stitches the per-initial-state optimal controls into one policy and
/// aggregates the stage-0 values under nu_1.
inline BestResponse respond(const PreferenceGame& g, const OccupancyMeasure& opponent,
                            Sense sense) {
  BestResponse out{Policy::pure(g, 0), 0.0};
  for (const auto& part : opponent.parts) {
    const int s1 = part.initial_state();
    StageArray rewards(g.horizon, g.num_states, g.num_actions);
    for (int h = 0; h < g.horizon; ++h) {
      const auto r = sense == Sense::kMaximize ? induced_reward(g, part.stage(h))
                                               : induced_loss(g, part.stage(h));
      std::copy(r.begin(), r.end(), rewards.stage(h).begin());
    }
    const auto control = solve_optimal(g, rewards, sense);
    for (int s = 0; s < g.num_states; ++s) {
      if (g.init_partition[s] != s1) continue;
      for (int h = 0; h < g.horizon; ++h) {
        std::copy(control.policy.row(h, s).begin(), control.policy.row(h, s).end(),
                  out.policy.row(h, s).begin());
      }
    }
    out.value += g.initial_dist[s1] * control.v0[s1];
  }
  return out;
}

}  // namespace detail

/// max_pi <nu_1, V^{pi, opponent}> by backward induction against the
/// opponent's conditional occupancies.
inline BestResponse best_response(const PreferenceGame& g, const Policy& opponent) {
  check_policy(g, opponent);
  return detail::respond(g, occupancy_measure(g, opponent), Sense::kMaximize);
}

/// min_pi <nu_1, V^{row_player, pi}>: the most damaging column player.
inline BestResponse worst_response(const PreferenceGame& g, const Policy& row_player) {
  check_policy(g, row_player);
  return detail::respond(g, occupancy_measure(g, row_player), Sense::kMinimize);
}

/// Best-response value against `pi` minus the self-play value H/2, clipped
/// at zero.
inline double exploitability(const PreferenceGame& g, const Policy& pi) {
  const double gap = best_response(g, pi).value - 0.5 * g.horizon;
  return std::max(gap, 0.0);
}

struct NashGap {
  double max_side = 0.0;  // max_pibar <V^{pibar,pi}> - <V^{pi,pi}>
  double min_side = 0.0;  // <V^{pi,pi}> - min_pibar <V^{pi,pibar}>
  double worst() const { return std::max(max_side, min_side); }
};

/// Both deviation gaps of the symmetric profile (pi, pi). The self-play value
/// is computed from the occupancies, not assumed.
inline NashGap nash_gap(const PreferenceGame& g, const Policy& pi) {
  check_policy(g, pi);
  const auto d = occupancy_measure(g, pi);
  const double self = bilinear_objective(g, d, d);
  const double best = detail::respond(g, d, Sense::kMaximize).value;
  const double worst = detail::respond(g, d, Sense::kMinimize).value;
  return {best - self, self - worst};
}

}  // namespace ompo
