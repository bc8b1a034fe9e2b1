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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ompo/env_gen.hpp"
#include "ompo/game.hpp"
#include "oracles.hpp"

namespace ompo {
namespace {

PreferenceGame chain(int num_states, int horizon, int num_actions = 1) {
  auto g = PreferenceGame::zeros(num_states, num_actions, horizon);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) g.f(s, a, std::min(s + 1, num_states - 1)) = 1.0;
  }
  return g;
}

bool contains(const ValidationReport& r, const std::string& needle) {
  for (const auto& v : r.violations) {
    if (v.find(needle) != std::string::npos) return true;
  }
  return false;
}

TEST(ValidateGame, RockPaperScissorsIsClean) {
  EXPECT_TRUE(validate_game(rock_paper_scissors()).ok());
}

TEST(ValidateGame, NamesAntisymmetryTuple) {
  auto g = PreferenceGame::zeros(2, 2, 1);
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) g.f(s, a, s) = 1.0;
  }
  g.r(0, 1, 1, 0) = 0.6;
  g.r(1, 0, 0, 1) = 0.6;
  const auto report = validate_game(g);
  ASSERT_FALSE(report.ok());
  EXPECT_TRUE(contains(report, "antisymmetry violated at (0,1,1,0)"));
}

TEST(ValidateGame, NamesSharedStateWhenReachableSetsOverlap) {
  auto g = PreferenceGame::zeros(3, 1, 2);
  g.initial_dist = {0.5, 0.5, 0.0};
  g.init_partition = {0, 1, 0};
  g.f(0, 0, 2) = 1.0;
  g.f(1, 0, 2) = 1.0;
  g.f(2, 0, 2) = 1.0;
  const auto report = validate_game(g);
  ASSERT_FALSE(report.ok());
  EXPECT_TRUE(contains(report, "separability violated: state 2"));
}

TEST(ValidateGame, NamesNonStochasticRow) {
  auto g = chain(2, 2);
  g.f(1, 0, 1) = 0.7;
  const auto report = validate_game(g);
  ASSERT_FALSE(report.ok());
  EXPECT_TRUE(contains(report, "transition row (s=1, a=0)"));
}

TEST(ValidateGame, RewardOutsideUnitInterval) {
  auto g = matrix_game(2, {0.5, 1.2, -0.2, 0.5});
  EXPECT_TRUE(contains(validate_game(g), "reward outside [0,1]"));
}

TEST(ValidateGame, WrongSizes) {
  auto g = rock_paper_scissors();
  g.reward.pop_back();
  EXPECT_TRUE(contains(validate_game(g), "reward has wrong size"));
}

TEST(Renormalize, FixesSmallDriftOnly) {
  auto g = chain(2, 2);
  g.f(0, 0, 1) = 1.0 + 5e-10;
  g.f(1, 0, 1) = 0.9;
  renormalize(g);
  EXPECT_DOUBLE_EQ(g.f(0, 0, 1), 1.0);
  EXPECT_DOUBLE_EQ(g.f(1, 0, 1), 0.9);
}

TEST(CheckPolicy, RejectsBadRows) {
  const auto g = dominant_two_action();
  Policy pi(1, 1, 2);
  pi(0, 0, 0) = 0.7;
  EXPECT_THROW(check_policy(g, pi), std::domain_error);
  pi(0, 0, 1) = 0.3;
  EXPECT_NO_THROW(check_policy(g, pi));
  EXPECT_THROW(check_policy(g, Policy(2, 1, 2, 0.5)), std::domain_error);
}

TEST(OccupancyForward, Dom2Uniform) {
  const auto g = dominant_two_action();
  const auto d = occupancy_forward(g, Policy::uniform(g), 0);
  EXPECT_DOUBLE_EQ(d(0, 0, 0), 0.5);
  EXPECT_DOUBLE_EQ(d(0, 0, 1), 0.5);
}

TEST(OccupancyForward, DeterministicChainIsUnitMass) {
  auto g = chain(3, 3, 2);
  const auto d = occupancy_forward(g, Policy::pure(g, 1), 0);
  for (int h = 0; h < 3; ++h) {
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 2; ++a) EXPECT_EQ(d(h, s, a), (s == h && a == 1) ? 1.0 : 0.0);
    }
  }
}

TEST(OccupancyForward, RejectsStateOutsideSupport) {
  const auto g = chain(3, 2);
  EXPECT_THROW(occupancy_forward(g, Policy::uniform(g), 1), std::domain_error);
}

TEST(OccupancyForward, MatchesEnumeratedVisitation) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = oracle::random_game(seed, {4, 3, 3, seed % 2 == 1});
    const auto pi = oracle::random_policy(g, rng, seed % 3 == 0);
    for (int s1 : g.initial_states()) {
      const auto d = occupancy_forward(g, pi, s1);
      const auto ref = oracle::visitation(g, pi, 0, s1);
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(d.values()[i], ref[i], 1e-12);
      EXPECT_LE(flow_residual(g, d), kFlowTolerance);
      for (int h = 0; h < g.horizon; ++h) {
        double mass = 0.0;
        for (double x : d.stage(h)) mass += x;
        EXPECT_NEAR(mass, 1.0, 1e-10);
      }
    }
  }
}

TEST(OccupancyForward, GridworldFlowResidual) {
  std::mt19937_64 rng(9);
  GridworldSpec spec;
  spec.seed = 4;
  spec.state_max = 30;
  const auto g = random_gridworld(spec);
  const auto d = occupancy_forward(g, oracle::random_policy(g, rng), 0);
  EXPECT_LE(flow_residual(g, d), 1e-10);
}

TEST(FlowResidual, TeleportedMassIsReported) {
  auto g = PreferenceGame::zeros(3, 1, 2);
  g.f(0, 0, 1) = 1.0;
  g.f(1, 0, 1) = 1.0;
  g.f(2, 0, 2) = 1.0;
  auto d = occupancy_forward(g, Policy::uniform(g), 0);
  d(1, 1, 0) -= 0.25;
  d(1, 2, 0) += 0.25;
  EXPECT_NEAR(flow_residual(g, d), 0.25, 1e-15);
}

TEST(FlowResidual, UniformMassOnChain) {
  for (int S : {2, 3, 5}) {
    const auto g = chain(S, 3, 2);
    StageArray d(3, S, 2, 1.0 / (2 * S));
    EXPECT_NEAR(flow_residual(g, d, 0), 1.0 - 1.0 / S, 1e-15);
  }
}

TEST(PairwiseBackup, RpsUniformIsHalf) {
  const auto g = rock_paper_scissors();
  const auto pi = Policy::uniform(g);
  EXPECT_NEAR(pairwise_backup(g, pi, pi).V(0, 0, 0), 0.5, 1e-15);
}

TEST(PairwiseBackup, Dom2PureReadOff) {
  const auto g = dominant_two_action();
  EXPECT_NEAR(pairwise_backup(g, Policy::pure(g, 0), Policy::pure(g, 1)).V(0, 0, 0), 0.8, 1e-15);
}

TEST(PairwiseBackup, TwoStageDom2UniformIsOne) {
  const auto g = dominant_two_action(2);
  const auto pi = Policy::uniform(g);
  EXPECT_NEAR(pairwise_backup(g, pi, pi).V(0, 0, 0), 1.0, 1e-15);
}

TEST(PairwiseBackup, MatchesJointEnumerationAndStaysInRange) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = oracle::random_game(100 + seed, {3, 2, 3});
    const auto pi = oracle::random_policy(g, rng);
    const auto mu = oracle::random_policy(g, rng, true);
    const auto pv = pairwise_backup(g, pi, mu);
    for (int h = 0; h < g.horizon; ++h) {
      for (int s = 0; s < g.num_states; ++s) {
        for (int a = 0; a < g.num_actions; ++a) {
          for (int s2 = 0; s2 < g.num_states; ++s2) {
            for (int a2 = 0; a2 < g.num_actions; ++a2) {
              const double q = pv.Q(h, s, a, s2, a2);
              EXPECT_GE(q, -1e-15);
              EXPECT_LE(q, g.remaining(h) + 1e-12);
              EXPECT_NEAR(q, oracle::pair_value_enumerated(g, pi, h, s, a, mu, h, s2, a2), 1e-12);
            }
          }
        }
      }
    }
  }
}

TEST(GameValue, Examples) {
  const auto dom2 = dominant_two_action();
  EXPECT_NEAR(game_value(dom2, Policy::pure(dom2, 0), Policy::uniform(dom2)), 0.65, 1e-15);
  const auto rps = rock_paper_scissors();
  EXPECT_NEAR(game_value(rps, Policy::pure(rps, 0), Policy::pure(rps, 2)), 1.0, 1e-15);
}

TEST(GameValue, SelfPlayIsHalfHorizonAndMatchesOracle) {
  std::mt19937_64 rng(11);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto g = oracle::random_game(seed, {4, 3, 3, seed % 2 == 0});
    const auto pi = oracle::random_policy(g, rng, seed % 4 == 0);
    const auto mu = oracle::random_policy(g, rng);
    EXPECT_NEAR(game_value(g, pi, pi), 0.5 * g.horizon, 1e-10);
    EXPECT_NEAR(game_value(g, pi, mu), oracle::game_value_by_visitation(g, pi, mu), 1e-12);
  }
}

TEST(BilinearObjective, Examples) {
  const auto g = dominant_two_action();
  const auto d1 = occupancy_measure(g, Policy::pure(g, 0));
  const auto d2 = occupancy_measure(g, Policy::pure(g, 1));
  EXPECT_NEAR(bilinear_objective(g, d1, d2), 0.8, 1e-15);
  EXPECT_NEAR(bilinear_objective(g, d1, d1), 0.5, 1e-15);
}

TEST(BilinearObjective, FactorizesGameValue) {
  std::mt19937_64 rng(12);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto g = oracle::random_game(seed, {5, 3, 3, seed % 2 == 1});
    const auto pi = oracle::random_policy(g, rng);
    const auto mu = oracle::random_policy(g, rng, true);
    const auto dp = occupancy_measure(g, pi);
    const auto dm = occupancy_measure(g, mu);
    EXPECT_NEAR(bilinear_objective(g, dp, dm), game_value(g, pi, mu), 1e-10);
    EXPECT_NEAR(bilinear_objective(g, dp, dp), 0.5 * g.horizon, 1e-10);
  }
}

TEST(BilinearObjective, RejectsInfeasibleOccupancy) {
  const auto g = dominant_two_action();
  auto d = occupancy_measure(g, Policy::uniform(g));
  d.parts[0](0, 0, 0) = 0.9;
  EXPECT_THROW(bilinear_objective(g, d, d), std::domain_error);
}

TEST(PolicyFromOccupancy, UniformAndPure) {
  const auto g = chain(3, 2, 3);
  const auto uni = Policy::uniform(g);
  EXPECT_EQ(policy_from_occupancy(g, occupancy_measure(g, uni)), uni);
  const auto pure = Policy::pure(g, 2);
  const auto back = policy_from_occupancy(g, occupancy_measure(g, pure));
  EXPECT_EQ(back.row(0, 0)[2], 1.0);
  EXPECT_EQ(back.row(1, 1)[2], 1.0);
  // Zero-mass states fall back to uniform.
  EXPECT_DOUBLE_EQ(back.row(0, 2)[0], 1.0 / 3.0);
}

TEST(PolicyFromOccupancy, MixtureOfPureChainPolicies) {
  auto g = PreferenceGame::zeros(3, 2, 2);
  for (int s = 0; s < 3; ++s) {
    g.f(s, 0, s == 0 ? 1 : s) = 1.0;
    g.f(s, 1, s == 0 ? 2 : s) = 1.0;
  }
  const auto da = occupancy_measure(g, Policy::pure(g, 0));
  const auto db = occupancy_measure(g, Policy::pure(g, 1));
  OccupancyMeasure mix = da;
  for (std::size_t i = 0; i < mix.parts[0].values().size(); ++i) {
    mix.parts[0].values()[i] = 0.5 * (da.parts[0].values()[i] + db.parts[0].values()[i]);
  }
  const auto pi = policy_from_occupancy(g, mix);
  const auto ref = oracle::visitation(g, pi, 0, 0);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(mix.parts[0].values()[i], ref[i], 1e-10);
}

TEST(PolicyFromOccupancy, RoundTripAtPositiveMassStates) {
  std::mt19937_64 rng(21);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = oracle::random_game(seed, {5, 3, 3, true});
    const auto pi = oracle::random_policy(g, rng, true);
    const auto d = occupancy_measure(g, pi);
    const auto back = policy_from_occupancy(g, d);
    for (const auto& part : d.parts) {
      for (int h = 0; h < g.horizon; ++h) {
        for (int s = 0; s < g.num_states; ++s) {
          if (part.state_mass(h, s) <= 0.0) continue;
          for (int a = 0; a < g.num_actions; ++a) EXPECT_NEAR(back(h, s, a), pi(h, s, a), 1e-12);
        }
      }
    }
  }
}

TEST(OccupancyMeasure, GivenThrowsForUnknownInitialState) {
  const auto g = dominant_two_action();
  const auto d = occupancy_measure(g, Policy::uniform(g));
  EXPECT_NO_THROW(d.given(0));
  EXPECT_THROW(d.given(3), std::domain_error);
  EXPECT_EQ(d.find(3), nullptr);
}

}  // namespace
}  // namespace ompo
