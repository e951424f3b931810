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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "orpl/envs/tiers.hpp"
#include "orpl/envs/trajectory.hpp"

namespace orpl {

// Container layout (little-endian):
//   "ORPL" | version u8 | meta_len u32 | meta (UTF-8 "key=value\n" lines)
//   | n_traj u32 | { T u32 | states f32[(T+1)*sd] | actions f32[T*ad] | rewards f32[T] }*
inline constexpr char kDatasetMagic[4] = {'O', 'R', 'P', 'L'};
inline constexpr std::uint8_t kDatasetVersion = 1;
inline constexpr const char* kGeneratorVersion = "orpl-gen-1";

struct RewardStats {
  double mean = 0.0;
  double std = 1.0;
};

struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;
  std::map<std::string, std::string> metadata;

  Index state_dim() const;
  Index action_dim() const;
  std::int64_t num_transitions() const;
  Index min_length() const;  // in states

  // Shapes consistent, values finite, dims agree with metadata when present.
  void validate() const;

  // Statistics stored in metadata; computed from the rewards if absent.
  RewardStats reward_stats() const;
  void store_reward_stats();

  const std::string& meta(const std::string& key) const;
  bool operator==(const TrajectoryDataset&) const = default;
};

void save_dataset(const std::filesystem::path& path, const TrajectoryDataset& ds);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

// Rolls out `tier` for `n_transitions` and prepends the first
// `expert_prefix_transitions` expert transitions (rounded up to whole
// episodes) drawn from an independent expert collection.
TrajectoryDataset build_dataset(const std::string& env, Tier tier, std::int64_t n_transitions, std::uint64_t seed,
                                std::int64_t expert_prefix_transitions = 0);

// The first `n_transitions` (whole episodes) of the expert collection for
// `seed`; identical to the prefix build_dataset prepends.
TrajectoryDataset expert_demonstrations(const std::string& env, std::int64_t n_transitions, std::uint64_t seed);

// Exactly the first `n_transitions` transitions (the last trajectory is cut
// short when needed). Throws DataError if the dataset is smaller.
TrajectoryDataset truncate_transitions(const TrajectoryDataset& ds, std::int64_t n_transitions);

// Zeroes one observation coordinate per trajectory, drawn uniformly from
// (seed, trajectory index); the masked-observation twin of `ds`.
TrajectoryDataset mask_observations(const TrajectoryDataset& ds, std::uint64_t seed);

// "<env>-<tier>[-x<prefix>]-n<n>-s<seed>.orpl"
std::string dataset_file_name(const std::string& env, Tier tier, std::int64_t n_transitions, std::uint64_t seed,
                              std::int64_t expert_prefix_transitions = 0);

// Root directory for dataset files: $ORPL_DATA_ROOT or "./data".
std::filesystem::path data_root();

struct DatasetSummary {
  std::int64_t trajectories = 0;
  std::int64_t transitions = 0;
  double mean_return = 0.0;
  double min_return = 0.0;
  double max_return = 0.0;
  std::vector<double> state_mean, state_std;
  std::vector<double> action_mean, action_std;
};

DatasetSummary summarize(const TrajectoryDataset& ds);

}  // namespace orpl
