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

// Seeded environment families and antisymmetric preference oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ompo/game.hpp"

namespace ompo {

enum class PreferenceKind { kScoreSigmoid, kCyclic, kRandomAntisymmetric, kTie };

inline std::string_view to_string(PreferenceKind kind) {
  switch (kind) {
    case PreferenceKind::kScoreSigmoid: return "score_sigmoid";
    case PreferenceKind::kCyclic: return "cyclic";
    case PreferenceKind::kRandomAntisymmetric: return "random_antisymmetric";
    case PreferenceKind::kTie: return "tie";
  }
  return "unknown";
}

inline std::optional<PreferenceKind> parse_preference_kind(std::string_view name) {
  for (auto k : {PreferenceKind::kScoreSigmoid, PreferenceKind::kCyclic,
                 PreferenceKind::kRandomAntisymmetric, PreferenceKind::kTie}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

struct PreferenceSpec {
  PreferenceKind kind = PreferenceKind::kRandomAntisymmetric;
  std::uint64_t seed = 0;
  std::vector<double> scores;   // score_sigmoid; empty draws N(0,1) scores from `seed`
  double cyclic_p = 2.0 / 3.0;  // cyclic
};

struct GridworldSpec {
  std::uint64_t seed = 0;
  int state_min = 1;
  int state_max = 100;
  int action_min = 2;
  int action_max = 10;
  int horizon = 10;
  double transition_sparsity = 0.25;
  PreferenceSpec preference;
};

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Bradley-Terry tensor r(i, j) = sigma(u_i - u_j) over flattened pairs.
inline std::vector<double> preference_from_scores(std::span<const double> scores) {
  const std::size_t n = scores.size();
  std::vector<double> r(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(scores[i])) throw std::domain_error("scores must be finite");
    for (std::size_t j = 0; j < n; ++j) {
      // Evaluate one side and mirror so that r + r^T == 1 exactly.
      r[i * n + j] = i <= j ? sigmoid(scores[i] - scores[j]) : 1.0 - r[j * n + i];
    }
  }
  return r;
}

/// Action i beats action i+1 (mod n) with probability p; other pairs tie.
inline std::vector<double> cyclic_preference(int n, double p = 2.0 / 3.0) {
  if (n < 3) throw std::domain_error("cyclic preference needs at least 3 actions");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("cyclic win probability outside [0,1]");
  std::vector<double> r(static_cast<std::size_t>(n) * n, 0.5);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    r[static_cast<std::size_t>(i) * n + j] = p;
    r[static_cast<std::size_t>(j) * n + i] = 1.0 - p;
  }
  return r;
}

/// r(i,j) = x ~ U(0,1) for i < j, mirrored as 1 - x, diagonal 1/2.
inline std::vector<double> random_antisymmetric_preference(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> r(static_cast<std::size_t>(n) * n, 0.5);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double x = unit(rng);
      r[static_cast<std::size_t>(i) * n + j] = x;
      r[static_cast<std::size_t>(j) * n + i] = 1.0 - x;
    }
  }
  return r;
}

/// Preference tensor over `n` flattened state-action pairs.
inline std::vector<double> make_preference(const PreferenceSpec& spec, int n) {
  switch (spec.kind) {
    case PreferenceKind::kTie:
      return std::vector<double>(static_cast<std::size_t>(n) * n, 0.5);
    case PreferenceKind::kCyclic:
      return cyclic_preference(n, spec.cyclic_p);
    case PreferenceKind::kRandomAntisymmetric:
      return random_antisymmetric_preference(n, spec.seed);
    case PreferenceKind::kScoreSigmoid: {
      if (!spec.scores.empty()) {
        if (static_cast<int>(spec.scores.size()) != n) {
          throw std::domain_error("score vector has " + std::to_string(spec.scores.size()) +
                                  " entries, expected " + std::to_string(n));
        }
        return preference_from_scores(spec.scores);
      }
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<double> u(n);
      for (double& x : u) x = normal(rng);
      return preference_from_scores(u);
    }
  }
  throw std::domain_error("unknown preference kind");
}

/// Random stochastic MDP with one initial state (state 0). Every row is a
/// Dirichlet(1,...,1) draw truncated to its ceil(sparsity * |S|) largest
/// entries and renormalized.
inline PreferenceGame random_gridworld(const GridworldSpec& spec) {
  if (spec.state_min < 1 || spec.state_min > spec.state_max || spec.action_min < 1 ||
      spec.action_min > spec.action_max) {
    throw std::domain_error("empty state or action range");
  }
  if (spec.horizon < 1) throw std::domain_error("horizon must be positive");
  if (!(spec.transition_sparsity > 0.0 && spec.transition_sparsity <= 1.0)) {
    throw std::domain_error("transition_sparsity must lie in (0, 1]");
  }
  std::mt19937_64 rng(spec.seed);
  const int S = std::uniform_int_distribution<int>(spec.state_min, spec.state_max)(rng);
  const int A = std::uniform_int_distribution<int>(spec.action_min, spec.action_max)(rng);
  auto g = PreferenceGame::zeros(S, A, spec.horizon);

  const int keep = std::clamp(static_cast<int>(std::ceil(spec.transition_sparsity * S)), 1, S);
  std::exponential_distribution<double> gamma1(1.0);
  std::vector<double> row(S);
  std::vector<int> order(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      for (double& x : row) x = gamma1(rng);
      std::iota(order.begin(), order.end(), 0);
      std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                        [&row](int x, int y) { return row[x] > row[y] || (row[x] == row[y] && x < y); });
      double total = 0.0;
      for (int k = 0; k < keep; ++k) total += row[order[k]];
      for (int k = 0; k < keep; ++k) g.f(s, a, order[k]) = row[order[k]] / total;
    }
  }
  PreferenceSpec pref = spec.preference;
  if (pref.kind != PreferenceKind::kScoreSigmoid || pref.scores.empty()) {
    // Decorrelate the reward stream from the dynamics stream.
    pref.seed = spec.preference.seed ^ (spec.seed * 0x9E3779B97F4A7C15ULL + 1);
  }
  g.reward = make_preference(pref, g.num_pairs());
  renormalize(g);
  return g;
}

/// Token-level MDP: the state at stage h is the prefix of h tokens, actions
/// append one token, transitions are deterministic. States are numbered
/// breadth first (state 0 is the prompt). Final-stage states self-loop.
inline PreferenceGame token_chain(int horizon, int num_tokens,
                                  const PreferenceSpec& preference = {},
                                  int state_budget = 512) {
  if (horizon < 1) throw std::domain_error("horizon must be positive");
  if (num_tokens < 2) throw std::domain_error("token_chain needs at least 2 tokens");
  // Layers of size A^0, A^1, ..., A^{H-1}.
  long long total = 0, layer = 1;
  std::vector<int> layer_start;
  for (int h = 0; h < horizon; ++h) {
    layer_start.push_back(static_cast<int>(total));
    total += layer;
    if (total > state_budget) {
      throw std::runtime_error("token_chain: " + std::to_string(total) +
                               "+ prefix states exceed the budget of " +
                               std::to_string(state_budget));
    }
    layer *= num_tokens;
  }
  const int S = static_cast<int>(total);
  auto g = PreferenceGame::zeros(S, num_tokens, horizon);
  for (int h = 0; h < horizon; ++h) {
    const int width = (h + 1 < horizon ? layer_start[h + 1] : S) - layer_start[h];
    for (int k = 0; k < width; ++k) {
      const int s = layer_start[h] + k;
      for (int a = 0; a < num_tokens; ++a) {
        const int next = h + 1 < horizon ? layer_start[h + 1] + k * num_tokens + a : s;
        g.f(s, a, next) = 1.0;
      }
    }
  }
  g.reward = make_preference(preference, g.num_pairs());
  return g;
}

struct ConversationSpec {
  std::uint64_t seed = 0;
  int horizon = 3;
  int num_prompts = 2;
  int num_answers = 2;
  bool stochastic = true;
  int state_budget = 512;
  PreferenceSpec preference;
};

/// Multi-turn conversation MDP. The state at turn h is (first prompt, current
/// prompt); the first prompt is carried so that every state has a unique
/// initial state. nu_1 is uniform over the first prompts. The next prompt
/// depends on (state, answer): a random distribution when stochastic,
/// otherwise (prompt + answer) mod num_prompts.
inline PreferenceGame multi_turn_conversation(const ConversationSpec& spec) {
  if (spec.horizon < 1 || spec.num_prompts < 1 || spec.num_answers < 1) {
    throw std::domain_error("conversation dimensions must be positive");
  }
  const long long P = spec.num_prompts;
  const long long total = P + static_cast<long long>(spec.horizon - 1) * P * P;
  if (total > spec.state_budget) {
    throw std::runtime_error("conversation: " + std::to_string(total) +
                             " states exceed the budget of " + std::to_string(spec.state_budget));
  }
  const int S = static_cast<int>(total);
  auto g = PreferenceGame::zeros(S, spec.num_answers, spec.horizon);
  // Turn 0: states 0..P-1 (first prompt x). Turn h >= 1: P + (h-1) P^2 + x P + y.
  auto state_of = [&](int h, int first, int prompt) {
    return h == 0 ? first
                  : static_cast<int>(P + (h - 1) * P * P + first * P + prompt);
  };
  std::mt19937_64 rng(spec.seed);
  std::exponential_distribution<double> gamma1(1.0);
  for (int x = 0; x < P; ++x) {
    g.initial_dist[x] = 1.0 / static_cast<double>(P);
  }
  for (int h = 0; h < spec.horizon; ++h) {
    for (int first = 0; first < P; ++first) {
      for (int prompt = 0; prompt < (h == 0 ? 1 : P); ++prompt) {
        const int s = state_of(h, first, h == 0 ? first : prompt);
        g.init_partition[s] = first;
        for (int a = 0; a < spec.num_answers; ++a) {
          if (h + 1 == spec.horizon) {
            g.f(s, a, s) = 1.0;
            continue;
          }
          if (spec.stochastic) {
            std::vector<double> w(P);
            double sum = 0.0;
            for (double& x : w) sum += (x = gamma1(rng));
            for (int y = 0; y < P; ++y) g.f(s, a, state_of(h + 1, first, y)) = w[y] / sum;
          } else {
            const int current = h == 0 ? first : prompt;
            g.f(s, a, state_of(h + 1, first, static_cast<int>((current + a) % P))) = 1.0;
          }
        }
      }
    }
  }
  g.reward = make_preference(spec.preference, g.num_pairs());
  renormalize(g);
  return g;
}

/// Single-state, single-stage matrix game with the given preference matrix.
inline PreferenceGame matrix_game(int num_actions, std::vector<double> reward, int horizon = 1) {
  auto g = PreferenceGame::zeros(1, num_actions, horizon);
  for (int a = 0; a < num_actions; ++a) g.f(0, a, 0) = 1.0;
  if (reward.size() != static_cast<std::size_t>(num_actions) * num_actions) {
    throw std::domain_error("matrix game reward has wrong size");
  }
  g.reward = std::move(reward);
  return g;
}

/// Rock-paper-scissors with actions (rock, paper, scissors): each action
/// beats its predecessor with certainty.
inline PreferenceGame rock_paper_scissors() {
  return matrix_game(3, {0.5, 0.0, 1.0, 1.0, 0.5, 0.0, 0.0, 1.0, 0.5});
}

/// Two actions where action 0 dominates: r = [[0.5, 0.8], [0.2, 0.5]].
inline PreferenceGame dominant_two_action(int horizon = 1) {
  return matrix_game(2, {0.5, 0.8, 0.2, 0.5}, horizon);
}

}  // namespace ompo
