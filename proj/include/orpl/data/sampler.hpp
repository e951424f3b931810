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
#include <vector>

#include "orpl/data/dataset.hpp"
#include "orpl/numerics/rng.hpp"

namespace orpl {

// A batch of length-(k+1) windows, position-major: element i of each vector
// is the B x dim slice at window offset i.
//
// actions[k] and rewards[k] exist only where tail_valid is set (the window
// may end on the terminal state); elsewhere they are zero.
template <typename S>
struct SubTrajectoryBatch {
  Index batch = 0;
  Index window = 0;  // k + 1
  std::vector<Matrix<S>> states;
  std::vector<Matrix<S>> actions;
  std::vector<Matrix<S>> rewards;  // standardized
  std::vector<Matrix<S>> returns;  // discounted return-to-go of standardized rewards from s_{t+i}
  Matrix<S> tail_valid;            // B x 1 in {0, 1}
  std::vector<Index> trajectory;
  std::vector<Index> start;

  Index k() const { return window - 1; }
  Index state_dim() const { return states.empty() ? 0 : states.front().cols(); }
  Index action_dim() const { return actions.empty() ? 0 : actions.front().cols(); }

  template <typename T>
  SubTrajectoryBatch<T> cast() const;
};

// Discounted return-to-go G_t = r_t + gamma G_{t+1}, G_T = 0, accumulated in
// double precision.
std::vector<double> discounted_returns(const Matrix<float>& rewards, double gamma);

class SubTrajectorySampler {
 public:
  // Rewards are standardized with the dataset's stored statistics.
  SubTrajectorySampler(const TrajectoryDataset& ds, Index window, double gamma = 0.99);

  SubTrajectoryBatch<float> sample(Index batch, Rng& rng) const;
  // Deterministic window extraction.
  SubTrajectoryBatch<float> gather(const std::vector<Index>& trajectory, const std::vector<Index>& start) const;

  Index window() const { return window_; }
  const TrajectoryDataset& dataset() const { return *ds_; }
  const std::vector<Matrix<float>>& standardized_rewards() const { return rewards_; }
  const std::vector<Matrix<float>>& returns() const { return returns_; }

 private:
  const TrajectoryDataset* ds_;
  Index window_;
  std::vector<Matrix<float>> rewards_;
  std::vector<Matrix<float>> returns_;
};

}  // namespace orpl
