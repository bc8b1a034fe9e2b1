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

// Solves rock-paper-scissors and a two-step token game with OMPO and prints
// the exploitability of the last and averaged iterates.

#include <cstdio>

#include "ompo/ompo.hpp"

namespace {

void report(const char* name, const ompo::PreferenceGame& game) {
  ompo::SolverConfig config;
  config.algorithm = ompo::Algorithm::kOmpoExact;
  config.iterations = 300;
  config.eval_every = 100;
  const auto trace = ompo::run_solver(game, config);
  std::printf("%s\n", name);
  for (const auto& rec : trace.records) {
    std::printf("  t=%4d  last=%.3e  averaged=%.3e\n", rec.iteration, rec.last_exploitability,
                rec.averaged_exploitability);
  }
  std::printf("  last policy at the root:");
  for (double p : trace.last.row(0, 0)) std::printf(" %.4f", p);
  std::printf("\n");
}

}  // namespace

int main() {
  report("rock-paper-scissors", ompo::rock_paper_scissors());
  ompo::PreferenceSpec cyclic{ompo::PreferenceKind::kCyclic, 0, {}, 0.8};
  report("token chain (H=2, 3 tokens, cyclic preference)", ompo::token_chain(2, 3, cyclic));
  return 0;
}
