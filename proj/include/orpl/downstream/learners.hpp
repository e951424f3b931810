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

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "orpl/data/dataset.hpp"
#include "orpl/data/sampler.hpp"
#include "orpl/downstream/evaluate.hpp"
#include "orpl/downstream/frontend.hpp"
#include "orpl/downstream/replay.hpp"
#include "orpl/envs/env.hpp"
#include "orpl/numerics/checkpoint.hpp"
#include "orpl/numerics/tanh_gaussian.hpp"

namespace orpl {

struct LearnerConfig {
  Index batch = 256;
  std::vector<Index> hidden{256, 256};
  Activation activation = Activation::kRelu;
  double learning_rate = 3e-4;         // BC policy, critics, SAC actor and temperature
  double policy_learning_rate = 3e-5;  // BRAC actor
  double gamma = 0.99;
  double target_rate = 0.005;
  double kl_weight = 1.0;                 // BRAC behavior penalty
  std::int64_t behavior_steps = 20000;    // BRAC behavior-policy cloning
  double q_limit = 1e6;
  std::int64_t replay_capacity = 100000;  // SAC
  std::int64_t random_steps = 1000;       // SAC uniform-action warmup
  Index aux_batch = 64;
  // Poisons the gradients of this update (fault injection); -1 disables.
  std::int64_t nan_gradient_step = -1;

  void validate() const;
};

template <typename S>
struct TransitionBatch {
  ObservationBatch<S> obs;
  ObservationBatch<S> next_obs;
  Matrix<S> actions;  // clamped into the open box
  Matrix<S> rewards;  // raw, B x 1
};

// Common state of the downstream learners: a frontend, a tanh-Gaussian
// actor on its features, and divergence bookkeeping. Update `step` draws
// all of its randomness from streams keyed by (seed, step), so a run can be
// resumed from any checkpoint taken between updates.
template <typename S>
class Learner {
 public:
  Learner(Frontend<S> frontend, LearnerConfig cfg, Index action_dim, std::uint64_t seed);
  virtual ~Learner() = default;
  Learner(const Learner&) = delete;
  Learner& operator=(const Learner&) = delete;

  virtual std::string algorithm() const = 0;

  // Training step `step` (1-based). A no-op once the run has diverged.
  void update(std::int64_t step);

  // Deterministic action tanh(mean).
  Matrix<S> act(const ObservationBatch<S>& obs);
  BatchPolicy policy();

  Index history_length() const { return frontend_.history_length(); }
  bool diverged() const { return diverged_; }
  const std::string& divergence_reason() const { return reason_; }
  const std::map<std::string, double>& diagnostics() const { return diag_; }
  Frontend<S>& frontend() { return frontend_; }
  const LearnerConfig& config() const { return cfg_; }
  ParamStore<S>& actor() { return actor_; }
  const TanhGaussianHead<S>& actor_head() const { return head_; }

  void save(Checkpoint& ckpt) const;
  void load(const Checkpoint& ckpt);

  // Gradients of the loss that trains the frontend on update `step`, with
  // the auxiliary term scaled by `aux_scale` (task term scaled by
  // `task_scale`). Nothing is updated.
  std::map<std::string, Matrix<S>> frontend_gradients(std::int64_t step, double task_scale, double aux_scale);

 protected:
  enum Purpose : std::uint64_t { kBatch = 1, kNoise, kAux, kActor, kExplore, kReset, kBehavior };
  Rng stream(Purpose purpose, std::int64_t counter) const;

  virtual void do_update(std::int64_t step) = 0;
  // Loss whose gradient reaches the frontend on update `step`.
  virtual Var<S> frontend_task_loss(Tape<S>& tape, std::int64_t step) = 0;
  virtual std::vector<std::pair<std::string, ParamStore<S>*>> owned_stores() = 0;
  virtual void save_state(Checkpoint&) const {}
  virtual void load_state(const Checkpoint&) {}

  Var<S> auxiliary_term(Tape<S>& tape, std::int64_t step);
  virtual SubTrajectoryBatch<float> auxiliary_batch(Rng& rng) = 0;

  struct UpdateGroup {
    std::vector<ParamStore<S>*> stores;
    double learning_rate;
  };
  static void zero_grads(const std::vector<UpdateGroup>& groups);
  // Finite check (with fault injection) followed by Adam; false when the run
  // diverged.
  bool apply(std::int64_t step, double loss, const std::vector<UpdateGroup>& groups);
  void mark_diverged(const std::string& reason);

  ObservationBatch<S> observations(const std::vector<StepRef>& refs) const;

  Frontend<S> frontend_;
  LearnerConfig cfg_;
  Index action_dim_;
  std::uint64_t seed_;
  TanhGaussianHead<S> head_;
  ParamStore<S> actor_{"actor"};
  ParamStore<S> actor_temperature_{"actor_temperature"};
  std::map<std::string, double> diag_;

 private:
  bool diverged_ = false;
  std::string reason_;
};

// Uniform sampling over the transitions of a fixed dataset.
class TransitionIndex {
 public:
  explicit TransitionIndex(const TrajectoryDataset& ds);
  StepRef draw(Rng& rng) const;
  std::int64_t size() const { return counts_.back(); }

 private:
  const TrajectoryDataset* ds_;
  std::vector<std::int64_t> counts_;
};

// Behavioral cloning on the first N expert transitions.
template <typename S>
class BcLearner final : public Learner<S> {
 public:
  BcLearner(Frontend<S> frontend, const TrajectoryDataset& expert, std::int64_t n_transitions, LearnerConfig cfg,
            std::uint64_t seed);
  std::string algorithm() const override { return "bc"; }
  const TrajectoryDataset& training_data() const { return data_; }

 protected:
  void do_update(std::int64_t step) override;
  Var<S> frontend_task_loss(Tape<S>& tape, std::int64_t step) override;
  std::vector<std::pair<std::string, ParamStore<S>*>> owned_stores() override;
  SubTrajectoryBatch<float> auxiliary_batch(Rng& rng) override;

 private:
  TrajectoryDataset data_;
  TransitionIndex index_;
  std::optional<SubTrajectorySampler> aux_sampler_;
};

// Twin Q networks on [features, action] with a Polyak target copy.
template <typename S>
class TwinCritic {
 public:
  TwinCritic() = default;
  TwinCritic(Index feature_dim, Index action_dim, const LearnerConfig& cfg);
  void init(Rng& rng);
  // min(Q1, Q2), optionally through the target copy.
  Var<S> min_q(Tape<S>& tape, const Var<S>& z, const Var<S>& a, bool target);
  Matrix<S> min_target_value(const Matrix<S>& z, const Matrix<S>& a);
  // Sum of the two mean squared TD errors against fixed targets y.
  Var<S> loss(Tape<S>& tape, const Var<S>& z, const Var<S>& a, const Matrix<S>& y, double& max_abs_q);
  void update_target(double rate) { target_.ema_from(online_, static_cast<S>(rate)); }
  ParamStore<S>& online() { return online_; }
  ParamStore<S>& target() { return target_; }
  const Mlp<S>& q1() const { return q1_; }
  const Mlp<S>& q2() const { return q2_; }

 private:
  Mlp<S> q1_, q2_;
  ParamStore<S> online_{"critic"};
  ParamStore<S> target_{"critic_target"};
};

// Behavior-regularized actor-critic with the single-sample KL value penalty
// in the actor loss.
template <typename S>
class BracLearner final : public Learner<S> {
 public:
  BracLearner(Frontend<S> frontend, const TrajectoryDataset& data, LearnerConfig cfg, std::uint64_t seed);
  std::string algorithm() const override { return "brac"; }

  // Clones the behavior policy on the full dataset if that has not happened.
  void prepare_behavior();
  bool behavior_ready() const { return behavior_ready_; }

  TransitionBatch<S> sample_transitions(Rng& rng) const;
  // y = r + gamma * min target-Q(z', a').
  Matrix<S> td_targets(const TransitionBatch<S>& batch, const Matrix<S>& next_actions);
  // Next actions drawn from the current actor with fixed noise.
  Matrix<S> next_actions(const TransitionBatch<S>& batch, const Matrix<S>& noise);

  struct ActorLoss {
    Var<S> loss;
    Var<S> q_term;
    std::optional<Var<S>> kl_term;  // absent when kl_weight is 0
  };
  // Actor objective on fixed features z.
  ActorLoss actor_loss(Tape<S>& tape, const Matrix<S>& z, const Matrix<S>& noise);

  TwinCritic<S>& critic() { return critic_; }
  ParamStore<S>& behavior() { return behavior_; }
  const TanhGaussianHead<S>& behavior_head() const { return behavior_head_; }

 protected:
  void do_update(std::int64_t step) override;
  Var<S> frontend_task_loss(Tape<S>& tape, std::int64_t step) override;
  std::vector<std::pair<std::string, ParamStore<S>*>> owned_stores() override;
  void save_state(Checkpoint& ckpt) const override;
  void load_state(const Checkpoint& ckpt) override;
  SubTrajectoryBatch<float> auxiliary_batch(Rng& rng) override;

 private:
  Var<S> critic_loss(Tape<S>& tape, std::int64_t step, double& max_abs_q);

  const TrajectoryDataset* data_;
  TransitionIndex index_;
  std::optional<SubTrajectorySampler> aux_sampler_;
  TwinCritic<S> critic_;
  TanhGaussianHead<S> behavior_head_;
  ParamStore<S> behavior_{"behavior"};
  ParamStore<S> behavior_temperature_{"behavior_temperature"};
  bool behavior_ready_ = false;
};

// Observation-only view of an environment: the learner can reset and step
// it but has no access to the internal state.
class ObservationEnv {
 public:
  struct Step {
    Vec observation;
    double reward = 0.0;
    bool done = false;
  };
  explicit ObservationEnv(std::unique_ptr<Env> env) : env_(std::move(env)) {}
  Vec reset(Rng& rng) { return env_->reset(rng); }
  Step step(const Vec& action) {
    StepResult r = env_->step(action);
    return {std::move(r.next_state), r.reward, r.done};
  }
  const EnvSpec& spec() const { return env_->spec(); }
  bool done() const { return env_->done(); }
  int t() const { return env_->t(); }

 private:
  std::unique_ptr<Env> env_;
};

// Soft actor-critic with automatic temperature, one environment step and one
// gradient update per training step.
template <typename S>
class SacLearner final : public Learner<S> {
 public:
  SacLearner(Frontend<S> frontend, ObservationEnv env, LearnerConfig cfg, std::uint64_t seed);
  std::string algorithm() const override { return "sac"; }

  // Prefills the replay buffer with logged trajectories (off unless called).
  void warmstart(const TrajectoryDataset& data);

  const ReplayBuffer& replay() const { return replay_; }
  TwinCritic<S>& critic() { return critic_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t episodes() const { return episodes_; }
  // True between episodes, where checkpoints are exact.
  bool at_episode_boundary() const { return !in_episode_; }
  double alpha() const;

 protected:
  void do_update(std::int64_t step) override;
  Var<S> frontend_task_loss(Tape<S>& tape, std::int64_t step) override;
  std::vector<std::pair<std::string, ParamStore<S>*>> owned_stores() override;
  void save_state(Checkpoint& ckpt) const override;
  void load_state(const Checkpoint& ckpt) override;
  SubTrajectoryBatch<float> auxiliary_batch(Rng& rng) override;

 private:
  void env_step(std::int64_t step);
  Var<S> critic_loss(Tape<S>& tape, std::int64_t step, double& max_abs_q);

  ObservationEnv env_;
  ReplayBuffer replay_;
  TwinCritic<S> critic_;
  std::int64_t env_steps_ = 0;
  std::int64_t episodes_ = 0;
  bool in_episode_ = false;
  Matrix<float> ep_states_, ep_actions_, ep_rewards_;
};

extern template class Learner<float>;
extern template class Learner<double>;
extern template class BcLearner<float>;
extern template class BcLearner<double>;
extern template class TwinCritic<float>;
extern template class TwinCritic<double>;
extern template class BracLearner<float>;
extern template class BracLearner<double>;
extern template class SacLearner<float>;
extern template class SacLearner<double>;

}  // namespace orpl
