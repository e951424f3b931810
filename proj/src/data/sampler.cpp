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

#include "orpl/data/sampler.hpp"

#include "orpl/numerics/errors.hpp"

namespace orpl {

template <typename S>
template <typename T>
SubTrajectoryBatch<T> SubTrajectoryBatch<S>::cast() const {
  SubTrajectoryBatch<T> out;
  out.batch = batch;
  out.window = window;
  auto conv = [](const std::vector<Matrix<S>>& v) {
    std::vector<Matrix<T>> o;
    for (const auto& m : v) o.push_back(m.template cast<T>());
    return o;
  };
  out.states = conv(states);
  out.actions = conv(actions);
  out.rewards = conv(rewards);
  out.returns = conv(returns);
  out.tail_valid = tail_valid.template cast<T>();
  out.trajectory = trajectory;
  out.start = start;
  return out;
}

template SubTrajectoryBatch<double> SubTrajectoryBatch<float>::cast<double>() const;
template SubTrajectoryBatch<float> SubTrajectoryBatch<float>::cast<float>() const;
template SubTrajectoryBatch<float> SubTrajectoryBatch<double>::cast<float>() const;
template SubTrajectoryBatch<double> SubTrajectoryBatch<double>::cast<double>() const;

std::vector<double> discounted_returns(const Matrix<float>& rewards, double gamma) {
  const Index T = rewards.rows();
  std::vector<double> g(static_cast<std::size_t>(T + 1), 0.0);
  for (Index t = T - 1; t >= 0; --t)
    g[static_cast<std::size_t>(t)] = rewards(t, 0) + gamma * g[static_cast<std::size_t>(t + 1)];
  return g;
}

SubTrajectorySampler::SubTrajectorySampler(const TrajectoryDataset& ds, Index window, double gamma)
    : ds_(&ds), window_(window) {
  if (window < 1) throw WindowError("window must hold at least one state");
  if (ds.trajectories.empty()) throw DataError("sampler needs a nonempty dataset");
  if (window > ds.min_length()) throw WindowError("window longer than the shortest trajectory");
  const RewardStats st = ds.reward_stats();
  for (const auto& t : ds.trajectories) {
    Matrix<float> r = ((t.rewards.cast<double>().array() - st.mean) / st.std).matrix().cast<float>();
    const auto g = discounted_returns(r, gamma);
    Matrix<float> G(static_cast<Index>(g.size()), 1);
    for (std::size_t i = 0; i < g.size(); ++i) G(static_cast<Index>(i), 0) = static_cast<float>(g[i]);
    rewards_.push_back(std::move(r));
    returns_.push_back(std::move(G));
  }
}

SubTrajectoryBatch<float> SubTrajectorySampler::sample(Index batch, Rng& rng) const {
  if (batch < 1) throw ConfigurationError("batch must be positive");
  std::vector<Index> traj(static_cast<std::size_t>(batch)), start(static_cast<std::size_t>(batch));
  const auto n = static_cast<std::int64_t>(ds_->trajectories.size());
  for (Index b = 0; b < batch; ++b) {
    const Index j = uniform_int(rng, 0, n - 1);
    const Index states = ds_->trajectories[static_cast<std::size_t>(j)].states.rows();
    traj[static_cast<std::size_t>(b)] = j;
    start[static_cast<std::size_t>(b)] = uniform_int(rng, 0, states - window_);
  }
  return gather(traj, start);
}

SubTrajectoryBatch<float> SubTrajectorySampler::gather(const std::vector<Index>& trajectory,
                                                       const std::vector<Index>& start) const {
  if (trajectory.size() != start.size()) throw DimensionError("gather: index lists differ in length");
  const Index B = static_cast<Index>(trajectory.size());
  const Index sd = ds_->state_dim(), ad = ds_->action_dim();
  SubTrajectoryBatch<float> out;
  out.batch = B;
  out.window = window_;
  out.trajectory = trajectory;
  out.start = start;
  out.tail_valid = Matrix<float>::Zero(B, 1);
  for (Index i = 0; i < window_; ++i) {
    out.states.push_back(Matrix<float>::Zero(B, sd));
    out.actions.push_back(Matrix<float>::Zero(B, ad));
    out.rewards.push_back(Matrix<float>::Zero(B, 1));
    out.returns.push_back(Matrix<float>::Zero(B, 1));
  }
  for (Index b = 0; b < B; ++b) {
    const auto j = static_cast<std::size_t>(trajectory[static_cast<std::size_t>(b)]);
    const Index t0 = start[static_cast<std::size_t>(b)];
    const Trajectory& tr = ds_->trajectories.at(j);
    const Index T = tr.length();
    if (t0 < 0 || t0 + window_ > T + 1) throw WindowError("window crosses the trajectory boundary");
    for (Index i = 0; i < window_; ++i) {
      const Index t = t0 + i;
      out.states[static_cast<std::size_t>(i)].row(b) = tr.states.row(t);
      out.returns[static_cast<std::size_t>(i)](b, 0) = returns_[j](t, 0);
      if (t < T) {
        out.actions[static_cast<std::size_t>(i)].row(b) = tr.actions.row(t);
        out.rewards[static_cast<std::size_t>(i)](b, 0) = rewards_[j](t, 0);
      }
    }
    out.tail_valid(b, 0) = t0 + window_ - 1 < T ? 1.0f : 0.0f;
  }
  return out;
}

}  // namespace orpl
