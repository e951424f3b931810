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

#include "orpl/objectives/objective.hpp"

namespace orpl {

// -log P(a_{t+k-1} | f(phi(s_t..s_{t+k}), a_t..a_{t+k-2})) with the adaptive
// entropy regularizer.
template <typename S>
class InverseModel final : public Objective<S> {
 public:
  explicit InverseModel(ObjectiveConfig cfg);
  ObjectiveOutput<S> loss(Tape<S>&, ReprStores<S>&, const SubTrajectoryBatch<S>&, Rng&) const override;

 protected:
  void init_heads(ReprStores<S>& stores, Rng& rng) const override;

 private:
  TanhGaussianHead<S> head_;
};

// Conditioning for forward models: phi(s_t..s_{t+k-1}) and a_t..a_{t+k-1};
// targets r_{t+k-1} and s_{t+k}.
enum class ForwardTarget { kRaw, kLatent, kEnergy };

template <typename S>
class ForwardModel final : public Objective<S> {
 public:
  ForwardModel(ObjectiveConfig cfg, ForwardTarget target);
  ObjectiveOutput<S> loss(Tape<S>&, ReprStores<S>&, const SubTrajectoryBatch<S>&, Rng&) const override;
  ForwardTarget target() const { return target_; }

 protected:
  void init_heads(ReprStores<S>& stores, Rng& rng) const override;

 private:
  ForwardTarget target_;
  Mlp<S> f_, g_;
};

// Temporal contrastive learning with one bilinear matrix per offset. With
// momentum, queries are f(phi(s_t)) for a residual f and keys come from the
// EMA copy of phi.
template <typename S>
class TemporalContrastive final : public Objective<S> {
 public:
  TemporalContrastive(ObjectiveConfig cfg, bool momentum);
  ObjectiveOutput<S> loss(Tape<S>&, ReprStores<S>&, const SubTrajectoryBatch<S>&, Rng&) const override;
  void after_update(ReprStores<S>& stores) const override;
  double default_learning_rate() const override { return 3e-4; }
  bool momentum() const { return momentum_; }

 protected:
  void init_heads(ReprStores<S>& stores, Rng& rng) const override;

 private:
  bool momentum_;
  Mlp<S> f_;
  ReprNet<S> target_;
};

// Recurrent value-prediction: h_0 = phi(s_t), h_{i+1} = cell(h_i, a_{t+i}),
// rewards r_{t+i} (i < k) and returns G_{t+i} (i <= k) regressed from
// (h_i, a_{t+i}).
template <typename S>
class ValuePrediction final : public Objective<S> {
 public:
  explicit ValuePrediction(ObjectiveConfig cfg);
  ObjectiveOutput<S> loss(Tape<S>&, ReprStores<S>&, const SubTrajectoryBatch<S>&, Rng&) const override;

 protected:
  void init_heads(ReprStores<S>& stores, Rng& rng) const override;

 private:
  RecurrentCell<S> cell_;
  Mlp<S> reward_, value_;
};

// Deep bisimulation: (|phi_i - phi_j|_1 - sg(|r_i - r_j| + gamma W2))^2 over
// random pairs plus the latent Gaussian dynamics likelihood.
template <typename S>
class Bisimulation final : public Objective<S> {
 public:
  explicit Bisimulation(ObjectiveConfig cfg);
  ObjectiveOutput<S> loss(Tape<S>&, ReprStores<S>&, const SubTrajectoryBatch<S>&, Rng&) const override;
  // Pairing used by loss(): a random permutation, or the identity when
  // `identical_pairs` is set.
  bool identical_pairs = false;

 protected:
  void init_heads(ReprStores<S>& stores, Rng& rng) const override;

 private:
  Mlp<S> dynamics_;
};

// Predicts a_t (tanh-Gaussian) or standardized r_t from phi(s_t) at every
// window position where they exist.
template <typename S>
class Reconstruct final : public Objective<S> {
 public:
  enum class Target { kAction, kReward };
  Reconstruct(ObjectiveConfig cfg, Target target);
  ObjectiveOutput<S> loss(Tape<S>&, ReprStores<S>&, const SubTrajectoryBatch<S>&, Rng&) const override;
  Index min_window() const override { return 1; }

 protected:
  void init_heads(ReprStores<S>& stores, Rng& rng) const override;

 private:
  Target target_;
  TanhGaussianHead<S> action_head_;
  Mlp<S> reward_head_;
};

// Value-level helpers reused by the ablation skeleton.
template <typename S>
ObjectiveOutput<S> reconstruct_action_term(Tape<S>& tape, ReprStores<S>& stores, const TanhGaussianHead<S>& head,
                                           const std::vector<Var<S>>& phi, const SubTrajectoryBatch<S>& batch,
                                           Rng& rng);
template <typename S>
ObjectiveOutput<S> reconstruct_reward_term(Tape<S>& tape, ReprStores<S>& stores, const Mlp<S>& head,
                                           const std::vector<Var<S>>& phi, const SubTrajectoryBatch<S>& batch);

// Rows of `batch` whose item at window position i exists.
template <typename S>
std::vector<Index> available_rows(const SubTrajectoryBatch<S>& batch, Index position);

// Targets clamped into the open box; returns the clamped copy and counts.
template <typename S>
Matrix<S> clamped_actions(const Matrix<S>& actions, double& clamp_count);

}  // namespace orpl
