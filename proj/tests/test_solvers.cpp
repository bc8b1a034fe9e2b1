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
#include "ompo/metrics.hpp"
#include "ompo/solvers.hpp"
#include "oracles.hpp"

namespace ompo {
namespace {

ConditionalOccupancy single_stage(const PreferenceGame& g, std::vector<double> mass) {
  ConditionalOccupancy d(0, g.horizon, g.num_states, g.num_actions);
  std::copy(mass.begin(), mass.end(), d.stage(0).begin());
  return d;
}

PreferenceGame tie_game(std::uint64_t seed) {
  auto g = oracle::random_game(seed, {4, 3, 3, seed % 2 == 1});
  std::fill(g.reward.begin(), g.reward.end(), 0.5);
  return g;
}

// Exact expected r~-Q of pi^t from pairwise enumeration.
double optimistic_q_oracle(const PreferenceGame& g, const Policy& now, const Policy& before,
                           int h, int s, int a) {
  const int s1 = g.init_partition[s];
  const auto dn = oracle::visitation(g, now, 0, s1);
  const auto db = oracle::visitation(g, before, 0, s1);
  double total = 0.0;
  for (int s2 = 0; s2 < g.num_states; ++s2) {
    for (int a2 = 0; a2 < g.num_actions; ++a2) {
      const std::size_t k = (static_cast<std::size_t>(h) * g.num_states + s2) * g.num_actions + a2;
      if (dn[k] > 0.0) total += 2.0 * dn[k] * oracle::pair_value_enumerated(g, now, h, s, a, now, h, s2, a2);
      if (db[k] > 0.0) total -= db[k] * oracle::pair_value_enumerated(g, now, h, s, a, before, h, s2, a2);
    }
  }
  return total;
}

TEST(Algorithm, NamesRoundTrip) {
  for (auto a : {Algorithm::kOmpoExact, Algorithm::kOmpoApprox, Algorithm::kMpo,
                 Algorithm::kOmpoRegression, Algorithm::kMpoRegression}) {
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  }
  EXPECT_FALSE(parse_algorithm("sppo").has_value());
}

TEST(DefaultBeta, Values) {
  const auto g = random_gridworld({});
  EXPECT_DOUBLE_EQ(default_beta(g, Algorithm::kOmpoExact, 100), 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(default_beta(g, Algorithm::kOmpoRegression, 100), 1.0 / std::sqrt(2.0));
  const double expected = std::sqrt(std::log(g.num_actions) / (2000.0 * 100.0));
  EXPECT_NEAR(default_beta(g, Algorithm::kMpo, 2000), expected, 1e-15);
}

TEST(OptimisticReward, EqualOccupanciesGivePlainReward) {
  const auto g = dominant_two_action();
  const auto d = single_stage(g, {0.3, 0.7});
  const auto r = optimistic_reward(g, d, d, 0);
  EXPECT_NEAR(r[0], 0.3 * 0.5 + 0.7 * 0.8, 1e-15);
  EXPECT_NEAR(r[1], 0.3 * 0.2 + 0.7 * 0.5, 1e-15);
}

TEST(OptimisticReward, TieRewardIsConstant) {
  const auto g = tie_game(4);
  std::mt19937_64 rng(1);
  const auto s1 = g.initial_states().front();
  const auto d1 = occupancy_forward(g, oracle::random_policy(g, rng), s1);
  const auto d2 = occupancy_forward(g, oracle::random_policy(g, rng), s1);
  for (int h = 0; h < g.horizon; ++h) {
    for (double x : optimistic_reward(g, d1, d2, h)) EXPECT_NEAR(x, 0.5, 1e-15);
  }
}

TEST(OptimisticReward, Dom2HandEvaluated) {
  const auto g = dominant_two_action();
  const auto r = optimistic_reward(g, single_stage(g, {1, 0}), single_stage(g, {0, 1}), 0);
  EXPECT_NEAR(r[0], 0.2, 1e-15);
  EXPECT_NEAR(r[1], -0.1, 1e-15);
}

TEST(OptimisticReward, RejectsBadStage) {
  const auto g = dominant_two_action();
  const auto d = single_stage(g, {1, 0});
  EXPECT_THROW(optimistic_reward(g, d, d, 1), std::domain_error);
}

TEST(OmpoExactStep, Dom2UniformHalfBeta) {
  const auto g = dominant_two_action();
  const auto next = ompo_exact_step(g, SolverState::initial(g), 0.5);
  EXPECT_NEAR(next(0, 0, 0), 0.5374298453437496, 1e-12);
  EXPECT_NEAR(next(0, 0, 1), 0.46257015465625045, 1e-12);
}

TEST(OmpoExactStep, SingleStageIsMultiplicativeWeights) {
  std::mt19937_64 rng(2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto g = oracle::random_game(seed, {1, 4, 1});
    auto state = SolverState::initial(g, oracle::random_policy(g, rng));
    state.advance(g, oracle::random_policy(g, rng));
    const double beta = 0.3 + 0.1 * seed;
    const auto next = ompo_exact_step(g, state, beta);
    const auto r = optimistic_reward(g, state.current_occupancy.parts[0],
                                     state.previous_occupancy.parts[0], 0);
    const std::vector<double> prev(state.current.row(0, 0).begin(), state.current.row(0, 0).end());
    const auto ref = oracle::mwu(prev, r, beta);
    for (int a = 0; a < g.num_actions; ++a) EXPECT_NEAR(next(0, 0, a), ref[a], 1e-13);
  }
}

TEST(OmpoExactStep, TieGameIsFixedPoint) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = tie_game(seed);
    auto state = SolverState::initial(g, oracle::random_policy(g, rng));
    const auto next = ompo_exact_step(g, state, 0.7);
    for (std::size_t i = 0; i < next.values().size(); ++i) {
      EXPECT_NEAR(next.values()[i], state.current.values()[i], 1e-15);
    }
  }
}

TEST(OmpoApproxStep, TieGameIsFixedPoint) {
  std::mt19937_64 rng(4);
  const auto g = tie_game(7);
  auto state = SolverState::initial(g, oracle::random_policy(g, rng));
  const auto next = ompo_approx_step(g, state, 0.7);
  for (std::size_t i = 0; i < next.values().size(); ++i) {
    EXPECT_NEAR(next.values()[i], state.current.values()[i], 1e-15);
  }
}

TEST(OptimisticQ, MatchesPairwiseEnumeration) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto g = oracle::random_game(200 + seed, {3, 2, 3, seed % 2 == 0});
    auto state = SolverState::initial(g, oracle::random_policy(g, rng));
    state.advance(g, oracle::random_policy(g, rng));
    const auto q = optimistic_q(g, state);
    for (int h = 0; h < g.horizon; ++h) {
      for (int s = 0; s < g.num_states; ++s) {
        for (int a = 0; a < g.num_actions; ++a) {
          EXPECT_NEAR(q(h, s, a), optimistic_q_oracle(g, state.current, state.previous, h, s, a), 1e-12);
        }
      }
    }
  }
}

TEST(OmpoApproxStep, CloseToExactOnTwoStageDom2) {
  const auto g = dominant_two_action(2);
  const double beta = 0.2;
  const auto state = SolverState::initial(g);
  const auto exact = ompo_exact_step(g, state, beta);
  const auto approx = ompo_approx_step(g, state, beta);
  for (int h = 0; h < 2; ++h) {
    const double bound = stage_step(g, beta, h) * g.remaining(h) * g.remaining(h);
    for (int a = 0; a < 2; ++a) {
      EXPECT_LE(std::abs(std::log(exact(h, 0, a)) - std::log(approx(h, 0, a))), bound);
    }
  }
  // Last stage has no continuation, so both agree there.
  EXPECT_NEAR(exact(1, 0, 0), approx(1, 0, 0), 1e-15);
}

TEST(MpoStep, Dom2UniformUnitBeta) {
  const auto g = dominant_two_action();
  const auto next = mpo_step(g, Policy::uniform(g), 1.0);
  EXPECT_NEAR(next(0, 0, 0), 0.574442516811659, 1e-12);
  EXPECT_NEAR(next(0, 0, 1), 0.42555748318834097, 1e-12);
}

TEST(MpoStep, RpsUniformAndTieAreFixedPoints) {
  const auto rps = rock_paper_scissors();
  const auto next = mpo_step(rps, Policy::uniform(rps), 0.9);
  for (double p : next.values()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  std::mt19937_64 rng(6);
  const auto g = tie_game(3);
  const auto pi = oracle::random_policy(g, rng);
  const auto same = mpo_step(g, pi, 0.9);
  for (std::size_t i = 0; i < pi.values().size(); ++i) EXPECT_NEAR(same.values()[i], pi.values()[i], 1e-15);
}

TEST(MpoQ, MatchesPairwiseEnumeration) {
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto g = oracle::random_game(300 + seed, {3, 3, 3, seed % 2 == 1});
    const auto pi = oracle::random_policy(g, rng);
    const auto q = mpo_q(g, pi);
    for (int h = 0; h < g.horizon; ++h) {
      for (int s = 0; s < g.num_states; ++s) {
        for (int a = 0; a < g.num_actions; ++a) {
          EXPECT_NEAR(q(h, s, a), optimistic_q_oracle(g, pi, pi, h, s, a), 1e-12);
        }
      }
    }
  }
}

TEST(Updates, PreserveStrictPositivity) {
  const auto g = random_gridworld({.seed = 3, .state_max = 20, .horizon = 4});
  auto state = SolverState::initial(g);
  for (int t = 0; t < 20; ++t) {
    for (auto algorithm : {Algorithm::kOmpoExact, Algorithm::kOmpoApprox, Algorithm::kMpo,
                           Algorithm::kOmpoRegression, Algorithm::kMpoRegression}) {
      const auto next = solver_step(g, state, algorithm, 0.7, {});
      for (double p : next.values()) ASSERT_GT(p, 0.0);
    }
    state.advance(g, ompo_exact_step(g, state, 0.7));
  }
}

TEST(RegressionUpdate, ZeroStepsLeavesPolicy) {
  std::mt19937_64 rng(8);
  const auto g = oracle::random_game(5);
  const auto pi = oracle::random_policy(g, rng);
  StageArray q(g.horizon, g.num_states, g.num_actions, 0.3);
  const auto out = regression_update(pi, q, std::vector<double>(g.horizon, 0.5),
                                     std::vector<double>(g.horizon, 0.1), {0, 0.5});
  for (std::size_t i = 0; i < pi.values().size(); ++i) EXPECT_NEAR(out.values()[i], pi.values()[i], 1e-15);
}

TEST(RegressionUpdate, TieGameIsFixedPoint) {
  std::mt19937_64 rng(9);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = tie_game(seed);
    auto state = SolverState::initial(g, oracle::random_policy(g, rng));
    const auto a = ompo_regression_step(g, state, 0.7, {});
    const auto b = mpo_regression_step(g, state.current, 0.7, {});
    for (std::size_t i = 0; i < a.values().size(); ++i) {
      EXPECT_NEAR(a.values()[i], state.current.values()[i], 1e-6);
      EXPECT_NEAR(b.values()[i], state.current.values()[i], 1e-6);
    }
  }
}

TEST(RegressionUpdate, Dom2MatchesClosedForm) {
  const auto g = dominant_two_action();
  const double beta = 0.1;
  RegressionOptions ample{2000, 0.5};
  const auto state = SolverState::initial(g);
  const auto exact = ompo_exact_step(g, state, beta);
  const auto reg = ompo_regression_step(g, state, beta, ample);
  EXPECT_LT(oracle::total_variation(exact.row(0, 0), reg.row(0, 0)), 1e-4);
  const auto mpo = mpo_step(g, Policy::uniform(g), beta);
  const auto mpo_reg = mpo_regression_step(g, Policy::uniform(g), beta, ample);
  EXPECT_LT(oracle::total_variation(mpo.row(0, 0), mpo_reg.row(0, 0)), 1e-4);
}

TEST(RegressionUpdate, ExactTargetWhenOffsetIsLogPartition) {
  // With the exact log-partition as offset the loss has a zero at the MWU
  // policy, so gradient descent must land on it.
  const std::vector<double> prev = {0.2, 0.5, 0.3};
  const std::vector<double> q = {1.0, -0.4, 0.3};
  const double eta = 0.8;
  double z = 0.0;
  for (int a = 0; a < 3; ++a) z += prev[a] * std::exp(eta * q[a]);
  Policy ref(1, 1, 3);
  std::copy(prev.begin(), prev.end(), ref.row(0, 0).begin());
  StageArray qa(1, 1, 3);
  std::copy(q.begin(), q.end(), qa.row(0, 0).begin());
  const auto out = regression_update(ref, qa, {eta}, {std::log(z)}, {3000, 0.5});
  const auto mwu = oracle::mwu(prev, q, eta);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(out(0, 0, a), mwu[a], 1e-10);
}

TEST(RegressionUpdate, RejectsBadOptions) {
  const Policy pi = Policy::uniform(1, 1, 2);
  StageArray q(1, 1, 2);
  EXPECT_THROW(regression_update(pi, q, {1.0}, {0.0}, {-1, 0.5}), std::domain_error);
  EXPECT_THROW(regression_update(pi, q, {1.0}, {0.0}, {10, 0.0}), std::domain_error);
}

TEST(AveragedPolicy, SingleAndIdenticalHistories) {
  std::mt19937_64 rng(10);
  const auto g = oracle::random_game(8, {4, 3, 3, true});
  const auto pi = oracle::random_policy(g, rng, true);
  const auto d = occupancy_measure(g, pi);
  const auto single = averaged_policy(g, {d});
  EXPECT_EQ(single, policy_from_occupancy(g, d));
  const auto triple = averaged_policy(g, {d, d, d});
  for (std::size_t i = 0; i < single.values().size(); ++i) {
    EXPECT_NEAR(triple.values()[i], single.values()[i], 1e-15);
  }
  EXPECT_THROW(averaged_policy(g, {}), std::domain_error);
}

TEST(AveragedPolicy, MixtureOfPureChains) {
  auto g = PreferenceGame::zeros(3, 2, 3);
  for (int s = 0; s < 3; ++s) {
    g.f(s, 0, s == 0 ? 1 : s) = 1.0;
    g.f(s, 1, s == 0 ? 2 : s) = 1.0;
  }
  const auto da = occupancy_measure(g, Policy::pure(g, 0));
  const auto db = occupancy_measure(g, Policy::pure(g, 1));
  const auto pi = averaged_policy(g, {da, db});
  const auto ref = oracle::visitation(g, pi, 0, 0);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(ref[i], 0.5 * (da.parts[0].values()[i] + db.parts[0].values()[i]), 1e-12);
  }
}

TEST(RunSolver, RpsLastIterate) {
  SolverConfig config;
  config.beta = 0.5;
  config.iterations = 200;
  const auto trace = run_solver(rock_paper_scissors(), config);
  EXPECT_LE(trace.records.back().last_exploitability, 1e-3);
}

TEST(RunSolver, RpsMpoAverage) {
  SolverConfig config;
  config.algorithm = Algorithm::kMpo;
  config.iterations = 200;
  const auto trace = run_solver(rock_paper_scissors(), config);
  EXPECT_LE(trace.records.back().averaged_exploitability, 2e-2);
}

TEST(RunSolver, ShiftedRpsConverges) {
  // Start away from the equilibrium so that the dynamics do something.
  const auto g = rock_paper_scissors();
  SolverConfig config;
  config.iterations = 300;
  config.eval_every = 300;
  auto state = SolverState::initial(g, [&] {
    Policy p(1, 1, 3);
    p(0, 0, 0) = 0.6;
    p(0, 0, 1) = 0.3;
    p(0, 0, 2) = 0.1;
    return p;
  }());
  for (int t = 0; t < 2000; ++t) state.advance(g, ompo_exact_step(g, state, 0.5));
  EXPECT_LT(exploitability(g, state.current), 1e-3);
}

TEST(RunSolver, RecordScheduleAndInvariants) {
  const auto g = oracle::random_game(12, {4, 3, 3, true});
  for (auto algorithm : {Algorithm::kOmpoExact, Algorithm::kOmpoApprox, Algorithm::kMpo,
                         Algorithm::kOmpoRegression, Algorithm::kMpoRegression}) {
    SolverConfig config;
    config.algorithm = algorithm;
    config.iterations = 23;
    config.eval_every = 5;
    const auto trace = run_solver(g, config);
    ASSERT_EQ(trace.records.size(), 5u);
    EXPECT_EQ(trace.records.back().iteration, 23);
    for (const auto& rec : trace.records) {
      EXPECT_NEAR(rec.self_play_value, 0.5 * g.horizon, 1e-8);
      EXPECT_GE(rec.last_exploitability, 0.0);
      EXPECT_GE(rec.averaged_exploitability, 0.0);
      EXPECT_GE(rec.nash_gap, -1e-10);
    }
  }
}

TEST(RunSolver, ZeroIterations) {
  SolverConfig config;
  config.iterations = 0;
  const auto g = dominant_two_action();
  const auto trace = run_solver(g, config);
  EXPECT_TRUE(trace.records.empty());
  EXPECT_EQ(trace.last, Policy::uniform(g));
}

TEST(RunSolver, RejectsInvalidGameAndConfig) {
  auto g = dominant_two_action();
  SolverConfig config;
  config.eval_every = 0;
  EXPECT_THROW(run_solver(g, config), std::domain_error);
  config = {};
  config.beta = -1.0;
  EXPECT_THROW(run_solver(g, config), std::domain_error);
  g.r(0, 0, 0, 1) = 0.9;
  EXPECT_THROW(run_solver(g, {}), std::domain_error);
}

TEST(RunSolver, RateBudgetOnDom2) {
  const auto g = dominant_two_action();
  const double beta = 1.0 / std::sqrt(2.0), eps = 0.05;
  const int budget = static_cast<int>(std::ceil(10.0 * g.horizon * std::log(2.0) / (beta * eps)));
  SolverConfig config;
  config.iterations = budget;
  config.eval_every = budget;
  const auto trace = run_solver(g, config);
  EXPECT_LE(nash_gap(g, trace.averaged).worst(), eps);
}

TEST(RunSolver, ObserverSeesEveryIterate) {
  SolverConfig config;
  config.iterations = 7;
  int calls = 0;
  run_solver(dominant_two_action(), config, [&](const SolverState& st) {
    ++calls;
    EXPECT_EQ(st.iteration, calls + 1);
  });
  EXPECT_EQ(calls, 7);
}

TEST(TwoPlayer, MinPlayerMirrorsMaxPlayer) {
  const auto g = oracle::random_game(44, {4, 3, 3});
  TwoPlayerState st{SolverState::initial(g), SolverState::initial(g)};
  for (int t = 0; t < 30; ++t) {
    ompo_two_player_step(g, st, 0.6);
    for (std::size_t i = 0; i < st.max_player.current.values().size(); ++i) {
      ASSERT_NEAR(st.max_player.current.values()[i], st.min_player.current.values()[i], 1e-12);
    }
  }
  // Self-play exact updates follow the same sequence.
  auto self = SolverState::initial(g);
  TwoPlayerState again{SolverState::initial(g), SolverState::initial(g)};
  for (int t = 0; t < 10; ++t) {
    self.advance(g, ompo_exact_step(g, self, 0.6));
    ompo_two_player_step(g, again, 0.6);
  }
  for (std::size_t i = 0; i < self.current.values().size(); ++i) {
    EXPECT_NEAR(self.current.values()[i], again.max_player.current.values()[i], 1e-12);
  }
}

}  // namespace
}  // namespace ompo
