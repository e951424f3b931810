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

#include "orpl/downstream/replay.hpp"

#include <algorithm>

#include "orpl/numerics/errors.hpp"

namespace orpl {

namespace {

template <typename M>
void grow_rows(M& m, Index rows) {
  if (m.rows() >= rows) return;
  M bigger(std::max<Index>(rows, 2 * m.rows()), m.cols());
  bigger.topRows(m.rows()) = m;
  m.swap(bigger);
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::int64_t capacity, Index state_dim, Index action_dim)
    : capacity_(capacity), sd_(state_dim), ad_(action_dim) {
  if (capacity <= 0) throw ConfigurationError("replay capacity must be positive");
}

void ReplayBuffer::begin_episode(const Vec& observation) {
  if (observation.size() != sd_) throw DimensionError("replay: observation dimension mismatch");
  Episode e;
  e.states.resize(64, sd_);
  e.actions.resize(64, ad_);
  e.rewards.resize(64, 1);
  e.states.row(0) = observation.cast<float>().transpose();
  episodes_.push_back(std::move(e));
}

void ReplayBuffer::add(const Vec& action, double reward, const Vec& next_observation) {
  if (episodes_.empty()) throw ConfigurationError("replay: add before begin_episode");
  if (action.size() != ad_ || next_observation.size() != sd_) throw DimensionError("replay: dimension mismatch");
  Episode& e = episodes_.back();
  grow_rows(e.states, e.steps + 2);
  grow_rows(e.actions, e.steps + 1);
  grow_rows(e.rewards, e.steps + 1);
  e.actions.row(e.steps) = action.cast<float>().transpose();
  e.rewards(e.steps, 0) = static_cast<float>(reward);
  e.states.row(e.steps + 1) = next_observation.cast<float>().transpose();
  ++e.steps;
  ++size_;
  ++added_;
  while (size_ > capacity_) evict_one();
}

void ReplayBuffer::evict_one() {
  while (!episodes_.empty() && episodes_.front().first >= episodes_.front().steps && episodes_.size() > 1)
    episodes_.pop_front();
  Episode& e = episodes_.front();
  ++e.first;
  --size_;
  if (e.first >= e.steps && episodes_.size() > 1) episodes_.pop_front();
}

std::vector<std::int64_t> ReplayBuffer::prefix_counts() const {
  std::vector<std::int64_t> c;
  c.reserve(episodes_.size() + 1);
  c.push_back(0);
  for (const auto& e : episodes_) c.push_back(c.back() + (e.steps - e.first));
  return c;
}

std::vector<StepRef> ReplayBuffer::sample(Index batch, Rng& rng) const {
  if (size_ == 0) throw EmptyInputError("replay: sample from an empty buffer");
  const auto c = prefix_counts();
  std::vector<StepRef> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (Index i = 0; i < batch; ++i) {
    const std::int64_t k = uniform_int(rng, 0, size_ - 1);
    const auto it = std::upper_bound(c.begin(), c.end(), k);
    const std::size_t ep = static_cast<std::size_t>(it - c.begin() - 1);
    const Episode& e = episodes_[ep];
    out.push_back(StepRef{&e.states, &e.actions, &e.rewards, e.first + static_cast<Index>(k - c[ep])});
  }
  return out;
}

SubTrajectoryBatch<float> ReplayBuffer::sample_windows(Index batch, Index window, double gamma,
                                                       const RewardStats& stats, Rng& rng) const {
  // Candidate starts: stored transitions whose episode has `window` states
  // from that point on.
  std::vector<std::int64_t> c(1, 0);
  std::vector<std::size_t> eps;
  for (std::size_t i = 0; i < episodes_.size(); ++i) {
    const Episode& e = episodes_[i];
    const Index last_start = e.steps + 1 - window;
    const Index n = std::max<Index>(0, last_start - e.first + 1);
    if (n == 0) continue;
    eps.push_back(i);
    c.push_back(c.back() + n);
  }
  if (c.back() == 0) throw WindowError("replay: no stored episode is long enough for the window");
  SubTrajectoryBatch<float> b;
  b.batch = batch;
  b.window = window;
  b.tail_valid = Matrix<float>::Zero(batch, 1);
  for (Index i = 0; i < window; ++i) {
    b.states.emplace_back(batch, sd_);
    b.actions.push_back(Matrix<float>::Zero(batch, ad_));
    b.rewards.push_back(Matrix<float>::Zero(batch, 1));
    b.returns.push_back(Matrix<float>::Zero(batch, 1));
  }
  const double inv_std = 1.0 / stats.std;
  for (Index j = 0; j < batch; ++j) {
    const std::int64_t k = uniform_int(rng, 0, c.back() - 1);
    const auto it = std::upper_bound(c.begin(), c.end(), k);
    const std::size_t slot = static_cast<std::size_t>(it - c.begin() - 1);
    const Episode& e = episodes_[eps[slot]];
    const Index start = e.first + static_cast<Index>(k - c[slot]);
    b.trajectory.push_back(static_cast<Index>(eps[slot]));
    b.start.push_back(start);
    // Discounted standardized returns over the rewards stored so far.
    double g = 0.0;
    std::vector<double> ret(static_cast<std::size_t>(e.steps - start + 1), 0.0);
    for (Index t = e.steps - 1; t >= start; --t) {
      g = ((static_cast<double>(e.rewards(t, 0)) - stats.mean) * inv_std) + gamma * g;
      ret[static_cast<std::size_t>(t - start)] = g;
    }
    for (Index i = 0; i < window; ++i) {
      const Index t = start + i;
      b.states[static_cast<std::size_t>(i)].row(j) = e.states.row(t);
      b.returns[static_cast<std::size_t>(i)](j, 0) = static_cast<float>(ret[static_cast<std::size_t>(i)]);
      if (t < e.steps) {
        b.actions[static_cast<std::size_t>(i)].row(j) = e.actions.row(t);
        b.rewards[static_cast<std::size_t>(i)](j, 0) =
            static_cast<float>((static_cast<double>(e.rewards(t, 0)) - stats.mean) * inv_std);
      }
    }
    b.tail_valid(j, 0) = start + window - 1 < e.steps ? 1.0f : 0.0f;
  }
  return b;
}

void ReplayBuffer::save(Checkpoint& ckpt, const std::string& prefix) const {
  put_scalar(ckpt, prefix + "/episodes", static_cast<double>(episodes_.size()));
  put_scalar(ckpt, prefix + "/size", static_cast<double>(size_));
  put_scalar(ckpt, prefix + "/added", static_cast<double>(added_));
  for (std::size_t i = 0; i < episodes_.size(); ++i) {
    const Episode& e = episodes_[i];
    const std::string p = prefix + "/" + std::to_string(i);
    put_matrix<float>(ckpt, p + "/states", Matrix<float>(e.states.topRows(e.steps + 1)));
    put_matrix<float>(ckpt, p + "/actions", Matrix<float>(e.actions.topRows(e.steps)));
    put_matrix<float>(ckpt, p + "/rewards", Matrix<float>(e.rewards.topRows(e.steps)));
    put_scalar(ckpt, p + "/first", static_cast<double>(e.first));
  }
}

void ReplayBuffer::load(const Checkpoint& ckpt, const std::string& prefix) {
  episodes_.clear();
  const auto n = static_cast<std::size_t>(get_scalar(ckpt, prefix + "/episodes"));
  size_ = static_cast<std::int64_t>(get_scalar(ckpt, prefix + "/size"));
  added_ = static_cast<std::int64_t>(get_scalar(ckpt, prefix + "/added"));
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = prefix + "/" + std::to_string(i);
    Episode e;
    e.states = get_matrix<float>(ckpt, p + "/states");
    e.actions = get_matrix<float>(ckpt, p + "/actions");
    e.rewards = get_matrix<float>(ckpt, p + "/rewards");
    e.steps = e.actions.rows();
    e.first = static_cast<Index>(get_scalar(ckpt, p + "/first"));
    if (e.states.cols() != sd_ || (e.steps > 0 && e.actions.cols() != ad_))
      throw FormatError("replay checkpoint has the wrong dimensions");
    if (e.actions.cols() != ad_) e.actions.resize(0, ad_);
    episodes_.push_back(std::move(e));
  }
}

}  // namespace orpl
