// Copyright 2026 The ORPL Authors.
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

#include <functional>
#include <vector>

#include "orpl/downstream/frontend.hpp"
#include "orpl/envs/env.hpp"
#include "orpl/envs/normalizer.hpp"
#include "orpl/envs/policy.hpp"

namespace orpl {

// Batched deterministic policy: one action row per observation row.
using BatchPolicy = std::function<Matrix<float>(const ObservationBatch<float>&)>;

struct EvalResult {
  double mean_score = 0.0;
  double mean_return = 0.0;
  std::vector<double> scores;
  std::vector<double> returns;
};

struct EvalOptions {
  int episodes = 10;
  Index history_length = 1;
  RewardStats history_stats;  // standardizes rewards inside histories
};

// Runs `episodes` copies of `prototype` in lockstep; episode i resets from
// stream (eval_seed, kEval, i). Scores are normalized under the env name.
EvalResult evaluate_policy(const BatchPolicy& policy, const Env& prototype, std::uint64_t eval_seed,
                           const EvalOptions& options = {}, const ScoreNormalizer& normalizer = default_normalizer());

// Adapts a per-observation policy (reads the newest observation only).
BatchPolicy batch_policy(Policy& policy, Rng& rng);

}  // namespace orpl
