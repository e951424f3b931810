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

#include <deque>
#include <vector>

#include "orpl/data/sampler.hpp"
#include "orpl/downstream/frontend.hpp"
#include "orpl/envs/env.hpp"
#include "orpl/numerics/checkpoint.hpp"

namespace orpl {

// Episode-structured FIFO replay. Capacity counts transitions; once full,
// adding a transition evicts the oldest one. Evicted steps stay readable as
// history for later steps of the same episode until the whole episode is
// gone.
class ReplayBuffer {
 public:
  ReplayBuffer(std::int64_t capacity, Index state_dim, Index action_dim);

  void begin_episode(const Vec& observation);
  void add(const Vec& action, double reward, const Vec& next_observation);

  std::int64_t size() const { return size_; }
  std::int64_t capacity() const { return capacity_; }
  std::int64_t total_added() const { return added_; }

  // Uniform over stored transitions; each reference is (obs at t, action,
  // reward, next obs at t + 1).
  std::vector<StepRef> sample(Index batch, Rng& rng) const;
  // Uniform sub-trajectory windows of `window` states from stored
  // transitions; returns use the rewards available so far.
  SubTrajectoryBatch<float> sample_windows(Index batch, Index window, double gamma, const RewardStats& stats,
                                           Rng& rng) const;

  void save(Checkpoint& ckpt, const std::string& prefix) const;
  void load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  struct Episode {
    Matrix<float> states;   // (steps + 1) x sd, grows
    Matrix<float> actions;  // steps x ad
    Matrix<float> rewards;  // steps x 1
    Index steps = 0;
    Index first = 0;  // oldest transition still in the buffer
  };
  void evict_one();
  std::vector<std::int64_t> prefix_counts() const;

  std::int64_t capacity_;
  Index sd_, ad_;
  std::deque<Episode> episodes_;
  std::int64_t size_ = 0;
  std::int64_t added_ = 0;
};

}  // namespace orpl
