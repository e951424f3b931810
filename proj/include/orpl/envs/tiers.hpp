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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orpl/envs/normalizer.hpp"
#include "orpl/envs/policy.hpp"
#include "orpl/envs/trajectory.hpp"

namespace orpl {

enum class Tier { kExpert, kMedium, kMediumExpert, kMediumReplay };

Tier parse_tier(const std::string& name);
std::string to_string(Tier tier);

// Per-env recipe for the degraded "medium" behavior policy and the expert
// data-collection noise.
struct TierRecipe {
  double expert_noise = 0.1;
  double medium_random_prob = 0.8;
  double medium_noise = 0.1;
  int replay_snapshots = 5;
};

TierRecipe tier_recipe(const std::string& env_name);

// The i-th of n snapshots of the improving policy, from uniform random
// (i = 0) to the medium policy (i = n - 1).
double replay_random_prob(const TierRecipe& recipe, int snapshot);

struct CollectedData {
  std::vector<Trajectory> trajectories;
  std::vector<double> returns;
  // Which behavior policy produced each trajectory (tier-specific index).
  std::vector<int> source;
};

// Rolls out the tier's behavior policy until at least n_transitions steps are
// collected. Trajectory j uses rng stream (seed, kDataset, j).
CollectedData collect_dataset(const std::string& env_name, Tier tier, std::int64_t n_transitions,
                              std::uint64_t seed);

struct TierStats {
  double mean_return = 0.0;
  double std_return = 0.0;
  double mean_score = 0.0;
};

struct TierReport {
  std::string env;
  std::map<Tier, TierStats> tiers;
};

// Measures each tier's behavior policy over `episodes` episodes per tier.
TierReport measure_tiers(const std::string& env_name, const ScoreNormalizer& norm, std::int64_t episodes,
                         std::uint64_t seed);

// Throws DataError unless expert beats medium by 3 return std (the larger of
// the two tiers' std) and expert > medium-expert > medium with gaps of at
// least 10 normalized points.
void enforce_tier_gaps(const TierReport& report);

}  // namespace orpl
