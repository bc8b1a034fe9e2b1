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

#include "ompo/bellman.hpp"
#include "ompo/env_gen.hpp"
#include "ompo/estimation.hpp"
#include "ompo/experiment.hpp"
#include "ompo/game.hpp"
#include "ompo/game_io.hpp"
#include "ompo/metrics.hpp"
#include "ompo/solvers.hpp"
