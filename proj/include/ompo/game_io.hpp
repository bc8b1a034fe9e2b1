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

// JSON game files.
//
//   {
//     "num_states": S, "num_actions": A, "horizon": H,
//     "transition": [[[f(s'|s,a) for s'] for a] for s],
//     "initial_dist": [nu_1(s) for s],
//     "reward": [[[[r(s,a,s',a') for a'] for s'] for a] for s]
//               | {"kind": "tie" | "cyclic" | "random_antisymmetric" | "score_sigmoid",
//                  "p": ..., "seed": ..., "scores": [...]},
//     "init_partition": [s1(s) for s]          (optional)
//   }
//
// Doubles are written with round-trip precision.

#include <algorithm>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ompo/env_gen.hpp"
#include "ompo/game.hpp"

namespace ompo {

/// Malformed or unreadable input; the message names the offending key.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using Json = nlohmann::json;

inline const Json& require_key(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(where + key + ": missing required key");
  }
  return j.at(key);
}

inline int read_positive_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 1) {
    throw FormatError(path + ": expected a positive integer");
  }
  return j.get<int>();
}

inline double read_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw FormatError(path + ": expected a number");
  return j.get<double>();
}

/// Flattens a nested array with the given extents into `out`.
inline void read_nested(const Json& j, const std::vector<int>& extents, std::size_t depth,
                        const std::string& path, std::vector<double>& out) {
  if (depth == extents.size()) {
    out.push_back(read_number(j, path));
    return;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != extents[depth]) {
    throw FormatError(path + ": expected an array of length " + std::to_string(extents[depth]));
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    read_nested(j[i], extents, depth + 1, path + "[" + std::to_string(i) + "]", out);
  }
}

inline PreferenceSpec read_preference_spec(const Json& j, const std::string& path) {
  if (!j.is_object()) throw FormatError(path + ": expected an object");
  PreferenceSpec spec;
  for (const auto& [key, value] : j.items()) {
    const std::string here = path + "." + key;
    if (key == "kind") {
      if (!value.is_string()) throw FormatError(here + ": expected a string");
      const auto kind = parse_preference_kind(value.get<std::string>());
      if (!kind) throw FormatError(here + ": unknown preference kind '" + value.get<std::string>() + "'");
      spec.kind = *kind;
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw FormatError(here + ": expected a non-negative integer");
      spec.seed = value.get<std::uint64_t>();
    } else if (key == "p") {
      spec.cyclic_p = read_number(value, here);
      if (!(spec.cyclic_p >= 0.0 && spec.cyclic_p <= 1.0)) throw FormatError(here + ": must lie in [0,1]");
    } else if (key == "scores") {
      if (!value.is_array()) throw FormatError(here + ": expected an array");
      for (std::size_t i = 0; i < value.size(); ++i) {
        spec.scores.push_back(read_number(value[i], here + "[" + std::to_string(i) + "]"));
      }
    } else {
      throw FormatError(here + ": unknown key");
    }
  }
  if (!j.contains("kind")) throw FormatError(path + ".kind: missing required key");
  return spec;
}

/// Labels every state with the first initial state that reaches it.
inline std::vector<int> default_partition(const PreferenceGame& g) {
  std::vector<int> labels(g.num_states, -1);
  const auto starts = g.initial_states();
  for (int s1 : starts) {
    const auto seen = reachable_from(g, s1);
    for (int s = 0; s < g.num_states; ++s) {
      if (seen[s] && labels[s] < 0) labels[s] = s1;
    }
  }
  const int fallback = starts.empty() ? 0 : starts.front();
  for (int& l : labels) {
    if (l < 0) l = fallback;
  }
  return labels;
}

}  // namespace detail

inline PreferenceGame game_from_json(const nlohmann::json& j) {
  using detail::require_key;
  if (!j.is_object()) throw FormatError("game: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"num_states", "num_actions", "horizon", "transition",
                                  "initial_dist", "reward", "init_partition", "name"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw FormatError(key + ": unknown key");
    }
  }
  PreferenceGame g;
  g.num_states = detail::read_positive_int(require_key(j, "num_states", ""), "num_states");
  g.num_actions = detail::read_positive_int(require_key(j, "num_actions", ""), "num_actions");
  g.horizon = detail::read_positive_int(require_key(j, "horizon", ""), "horizon");
  const int S = g.num_states, A = g.num_actions;

  detail::read_nested(require_key(j, "transition", ""), {S, A, S}, 0, "transition", g.transition);
  detail::read_nested(require_key(j, "initial_dist", ""), {S}, 0, "initial_dist", g.initial_dist);

  const auto& reward = require_key(j, "reward", "");
  if (reward.is_object()) {
    const auto spec = detail::read_preference_spec(reward, "reward");
    try {
      g.reward = make_preference(spec, g.num_pairs());
    } catch (const std::exception& e) {
      throw FormatError(std::string("reward: ") + e.what());
    }
  } else {
    detail::read_nested(reward, {S, A, S, A}, 0, "reward", g.reward);
  }

  renormalize(g);
  if (j.contains("init_partition")) {
    const auto& p = j.at("init_partition");
    if (!p.is_array() || static_cast<int>(p.size()) != S) {
      throw FormatError("init_partition: expected an array of length " + std::to_string(S));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!p[i].is_number_integer()) {
        throw FormatError("init_partition[" + std::to_string(i) + "]: expected an integer");
      }
      g.init_partition.push_back(p[i].get<int>());
    }
  } else {
    g.init_partition = detail::default_partition(g);
  }
  return g;
}

inline nlohmann::json game_to_json(const PreferenceGame& g) {
  nlohmann::json j;
  j["num_states"] = g.num_states;
  j["num_actions"] = g.num_actions;
  j["horizon"] = g.horizon;
  auto transition = nlohmann::json::array();
  auto reward = nlohmann::json::array();
  for (int s = 0; s < g.num_states; ++s) {
    auto t_s = nlohmann::json::array();
    auto r_s = nlohmann::json::array();
    for (int a = 0; a < g.num_actions; ++a) {
      const auto row = g.successors(s, a);
      t_s.push_back(std::vector<double>(row.begin(), row.end()));
      auto r_sa = nlohmann::json::array();
      for (int s2 = 0; s2 < g.num_states; ++s2) {
        std::vector<double> cells(g.num_actions);
        for (int a2 = 0; a2 < g.num_actions; ++a2) cells[a2] = g.r(s, a, s2, a2);
        r_sa.push_back(std::move(cells));
      }
      r_s.push_back(std::move(r_sa));
    }
    transition.push_back(std::move(t_s));
    reward.push_back(std::move(r_s));
  }
  j["transition"] = std::move(transition);
  j["initial_dist"] = g.initial_dist;
  j["reward"] = std::move(reward);
  j["init_partition"] = g.init_partition;
  return j;
}

inline PreferenceGame load_game(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  return game_from_json(j);
}

inline void save_game(const PreferenceGame& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot write file");
  out << game_to_json(g).dump(1) << '\n';
}

}  // namespace ompo
