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

#include "orpl/downstream/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "orpl/numerics/errors.hpp"
#include "orpl/numerics/ops.hpp"

namespace orpl {

void LearnerConfig::validate() const {
  if (batch <= 0 || aux_batch <= 0) throw ConfigurationError("learner batch sizes must be positive");
  if (!(learning_rate > 0) || !(policy_learning_rate > 0)) throw ConfigurationError("learning rates must be positive");
  if (!(gamma >= 0 && gamma < 1)) throw ConfigurationError("gamma must lie in [0, 1)");
  if (!(target_rate > 0 && target_rate <= 1)) throw ConfigurationError("target rate must lie in (0, 1]");
  if (!(kl_weight >= 0)) throw ConfigurationError("kl_weight must be non-negative");
  if (behavior_steps < 0 || random_steps < 0) throw ConfigurationError("step counts must be non-negative");
  if (replay_capacity <= 0) throw ConfigurationError("replay capacity must be positive");
  if (!(q_limit > 0)) throw ConfigurationError("q_limit must be positive");
}

namespace {

template <typename S>
Var<S> elementwise_min(const Var<S>& a, const Var<S>& b) {
  // min(a, b) = (a + b - |a - b|) / 2
  return scale(sub(add(a, b), abs(sub(a, b))), S(0.5));
}

// Row-wise log N(u; mean, exp(log_std)^2), summed over columns.
template <typename S>
Var<S> gaussian_log_density(const Var<S>& u, const Var<S>& mean, const Var<S>& log_std) {
  const S c = static_cast<S>(0.5 * std::log(2.0 * std::numbers::pi));
  const Var<S> z = mul(sub(u, mean), exp(neg(log_std)));
  return row_sum(add_scalar(neg(add(scale(square(z), S(0.5)), log_std)), -c));
}

template <typename S>
Matrix<S> action_rows(const std::vector<StepRef>& refs, Index ad) {
  Matrix<S> a(static_cast<Index>(refs.size()), ad);
  for (std::size_t i = 0; i < refs.size(); ++i)
    a.row(static_cast<Index>(i)) = refs[i].actions->row(refs[i].t).template cast<S>();
  clamp_actions(a);
  return a;
}

template <typename S>
Matrix<S> reward_rows(const std::vector<StepRef>& refs) {
  Matrix<S> r(static_cast<Index>(refs.size()), 1);
  for (std::size_t i = 0; i < refs.size(); ++i) r(static_cast<Index>(i), 0) = static_cast<S>((*refs[i].rewards)(refs[i].t, 0));
  return r;
}

std::vector<StepRef> advance(std::vector<StepRef> refs) {
  for (auto& r : refs) ++r.t;
  return refs;
}

}  // namespace

// ---------------------------------------------------------------- Learner

template <typename S>
Learner<S>::Learner(Frontend<S> frontend, LearnerConfig cfg, Index action_dim, std::uint64_t seed)
    : frontend_(std::move(frontend)),
      cfg_(std::move(cfg)),
      action_dim_(action_dim),
      seed_(seed),
      head_(frontend_.dim(), action_dim, cfg_.hidden, cfg_.activation, "actor") {
  cfg_.validate();
  Rng rng = make_rng(seed, Stream::kInit, 0);
  head_.init(actor_, actor_temperature_, rng);
}

template <typename S>
Rng Learner<S>::stream(Purpose purpose, std::int64_t counter) const {
  return make_rng(split_seed(seed_, purpose), Stream::kDownstream, static_cast<std::uint64_t>(counter));
}

template <typename S>
void Learner<S>::update(std::int64_t step) {
  if (diverged_) return;
  try {
    do_update(step);
  } catch (const FinitenessError& e) {
    mark_diverged(e.what());
  }
}

template <typename S>
Matrix<S> Learner<S>::act(const ObservationBatch<S>& obs) {
  Tape<S> tape;
  for (auto* s : frontend_.trainable()) tape.freeze(*s);
  tape.freeze(actor_);
  const Var<S> z = frontend_.encode(tape, obs);
  return tanh_gaussian_mode(head_.distribution(tape, actor_, z));
}

template <typename S>
BatchPolicy Learner<S>::policy() {
  return [this](const ObservationBatch<float>& obs) -> Matrix<float> {
    if constexpr (std::is_same_v<S, float>) {
      return act(obs);
    } else {
      return act(obs.template cast<S>()).template cast<float>();
    }
  };
}

template <typename S>
ObservationBatch<S> Learner<S>::observations(const std::vector<StepRef>& refs) const {
  ObservationBatch<float> o = make_observations(refs, frontend_.history_length(), frontend_.history_stats());
  if constexpr (std::is_same_v<S, float>) {
    return o;
  } else {
    return o.template cast<S>();
  }
}

template <typename S>
void Learner<S>::zero_grads(const std::vector<UpdateGroup>& groups) {
  for (const auto& g : groups)
    for (auto* s : g.stores) s->zero_grad();
}

template <typename S>
bool Learner<S>::apply(std::int64_t step, double loss, const std::vector<UpdateGroup>& groups) {
  if (step == cfg_.nan_gradient_step) {
    for (const auto& g : groups)
      for (auto* s : g.stores)
        for (auto& [k, e] : s->entries())
          if (e.grad.size() > 0) e.grad(0, 0) = std::numeric_limits<S>::quiet_NaN();
  }
  if (!std::isfinite(loss)) {
    mark_diverged("non-finite loss at step " + std::to_string(step));
    return false;
  }
  for (const auto& g : groups)
    for (auto* s : g.stores)
      if (!s->grads_finite()) {
        mark_diverged("non-finite gradient in '" + s->name() + "' at step " + std::to_string(step));
        return false;
      }
  for (const auto& g : groups)
    for (auto* s : g.stores) s->adam_step(static_cast<S>(g.learning_rate));
  return true;
}

template <typename S>
void Learner<S>::mark_diverged(const std::string& reason) {
  if (diverged_) return;
  diverged_ = true;
  reason_ = reason;
}

template <typename S>
Var<S> Learner<S>::auxiliary_term(Tape<S>& tape, std::int64_t step) {
  Rng rng = stream(kAux, step);
  const SubTrajectoryBatch<float> b = auxiliary_batch(rng);
  if constexpr (std::is_same_v<S, float>) {
    return frontend_.auxiliary_loss(tape, b, rng).loss;
  } else {
    return frontend_.auxiliary_loss(tape, b.template cast<S>(), rng).loss;
  }
}

template <typename S>
std::map<std::string, Matrix<S>> Learner<S>::frontend_gradients(std::int64_t step, double task_scale,
                                                                 double aux_scale) {
  Tape<S> tape;
  Var<S> loss = scale(frontend_task_loss(tape, step), static_cast<S>(task_scale));
  if (frontend_.has_auxiliary()) loss = add(loss, scale(auxiliary_term(tape, step), static_cast<S>(aux_scale)));
  for (auto& [name, s] : owned_stores()) s->zero_grad();
  actor_.zero_grad();
  actor_temperature_.zero_grad();
  const auto trainable = frontend_.trainable();
  for (auto* s : trainable) s->zero_grad();
  tape.backward(loss);
  std::map<std::string, Matrix<S>> out;
  for (auto* s : trainable)
    for (const auto& [k, e] : s->entries()) out[s->name() + "/" + k] = e.grad;
  return out;
}

template <typename S>
void Learner<S>::save(Checkpoint& ckpt) const {
  auto* self = const_cast<Learner<S>*>(this);
  export_store(actor_, "actor", ckpt);
  export_store(actor_temperature_, "actor_temperature", ckpt);
  for (auto& [name, s] : self->owned_stores()) export_store(*s, name, ckpt);
  const ReprStores<S>& fs = frontend_.stores();
  export_store(fs.phi, "frontend/phi", ckpt);
  export_store(fs.heads, "frontend/heads", ckpt);
  export_store(fs.target, "frontend/target", ckpt);
  export_store(fs.temperature, "frontend/temperature", ckpt);
  put_scalar(ckpt, "learner/diverged", diverged_ ? 1.0 : 0.0);
  put_string(ckpt, "learner/reason", reason_);
  put_string(ckpt, "learner/algorithm", algorithm());
  save_state(ckpt);
}

template <typename S>
void Learner<S>::load(const Checkpoint& ckpt) {
  if (get_string(ckpt, "learner/algorithm") != algorithm())
    throw IntegrityError("checkpoint belongs to a different learner");
  import_store(actor_, "actor", ckpt);
  import_store(actor_temperature_, "actor_temperature", ckpt);
  for (auto& [name, s] : owned_stores()) import_store(*s, name, ckpt);
  ReprStores<S>& fs = frontend_.stores();
  import_store(fs.phi, "frontend/phi", ckpt);
  import_store(fs.heads, "frontend/heads", ckpt);
  import_store(fs.target, "frontend/target", ckpt);
  import_store(fs.temperature, "frontend/temperature", ckpt);
  diverged_ = get_scalar(ckpt, "learner/diverged") != 0.0;
  reason_ = get_string(ckpt, "learner/reason");
  load_state(ckpt);
}

// ---------------------------------------------------------------- data

TransitionIndex::TransitionIndex(const TrajectoryDataset& ds) : ds_(&ds), counts_{0} {
  for (const auto& t : ds.trajectories) counts_.push_back(counts_.back() + t.length());
  if (counts_.back() == 0) throw DataError("dataset has no transitions");
}

StepRef TransitionIndex::draw(Rng& rng) const {
  const std::int64_t k = uniform_int(rng, 0, counts_.back() - 1);
  const auto it = std::upper_bound(counts_.begin(), counts_.end(), k);
  const auto i = static_cast<std::size_t>(it - counts_.begin() - 1);
  const Trajectory& t = ds_->trajectories[i];
  return StepRef{&t.states, &t.actions, &t.rewards, static_cast<Index>(k - counts_[i])};
}

namespace {

std::vector<StepRef> draw_refs(const TransitionIndex& index, Index batch, Rng& rng) {
  std::vector<StepRef> refs;
  refs.reserve(static_cast<std::size_t>(batch));
  for (Index i = 0; i < batch; ++i) refs.push_back(index.draw(rng));
  return refs;
}

template <typename S>
std::optional<SubTrajectorySampler> make_aux_sampler(const Frontend<S>& f, const TrajectoryDataset& ds) {
  if (!f.has_auxiliary()) return std::nullopt;
  return SubTrajectorySampler(ds, f.objective()->config().window, f.objective()->config().gamma);
}

}  // namespace

// ---------------------------------------------------------------- BC

template <typename S>
BcLearner<S>::BcLearner(Frontend<S> frontend, const TrajectoryDataset& expert, std::int64_t n_transitions,
                        LearnerConfig cfg, std::uint64_t seed)
    : Learner<S>(std::move(frontend), std::move(cfg), expert.action_dim(), seed),
      data_(truncate_transitions(expert, n_transitions)),
      index_(data_),
      aux_sampler_(make_aux_sampler(this->frontend_, data_)) {
  if (data_.state_dim() != this->frontend_.state_dim())
    throw DimensionError("BC: dataset state dimension does not match the frontend");
}

template <typename S>
Var<S> BcLearner<S>::frontend_task_loss(Tape<S>& tape, std::int64_t step) {
  Rng rng = this->stream(this->kBatch, step);
  const auto refs = draw_refs(index_, this->cfg_.batch, rng);
  const Matrix<S> targets = action_rows<S>(refs, this->action_dim_);
  const Var<S> z = this->frontend_.encode(tape, this->observations(refs));
  const auto dist = this->head_.distribution(tape, this->actor_, z);
  Rng noise_rng = this->stream(this->kNoise, step);
  const Matrix<S> noise = randn<S>(targets.rows(), targets.cols(), noise_rng);
  const auto l = action_likelihood_loss(tape, this->head_, this->actor_temperature_, dist, targets, noise);
  this->diag_["nll"] = l.nll;
  this->diag_["entropy"] = l.entropy;
  this->diag_["alpha"] = l.alpha;
  return l.loss;
}

template <typename S>
void BcLearner<S>::do_update(std::int64_t step) {
  Tape<S> tape;
  Var<S> loss = frontend_task_loss(tape, step);
  if (this->frontend_.has_auxiliary()) loss = add(loss, this->auxiliary_term(tape, step));
  const std::vector<typename Learner<S>::UpdateGroup> groups = {
      {{&this->actor_, &this->actor_temperature_}, this->cfg_.learning_rate},
      {this->frontend_.trainable(), this->cfg_.learning_rate}};
  this->zero_grads(groups);
  tape.backward(loss);
  const double value = static_cast<double>(loss.item());
  this->diag_["loss"] = value;
  if (!this->apply(step, value, groups)) return;
  this->frontend_.after_update();
}

template <typename S>
std::vector<std::pair<std::string, ParamStore<S>*>> BcLearner<S>::owned_stores() {
  return {};
}

template <typename S>
SubTrajectoryBatch<float> BcLearner<S>::auxiliary_batch(Rng& rng) {
  return aux_sampler_->sample(this->cfg_.aux_batch, rng);
}

// ---------------------------------------------------------------- critic

template <typename S>
TwinCritic<S>::TwinCritic(Index feature_dim, Index action_dim, const LearnerConfig& cfg)
    : q1_(MLPSpec{feature_dim + action_dim, cfg.hidden, 1, cfg.activation}, "q1"),
      q2_(MLPSpec{feature_dim + action_dim, cfg.hidden, 1, cfg.activation}, "q2") {}

template <typename S>
void TwinCritic<S>::init(Rng& rng) {
  q1_.init(online_, rng);
  q2_.init(online_, rng);
  target_ = online_;
}

template <typename S>
Var<S> TwinCritic<S>::min_q(Tape<S>& tape, const Var<S>& z, const Var<S>& a, bool target) {
  ParamStore<S>& store = target ? target_ : online_;
  const Var<S> x = concat_cols({z, a});
  return elementwise_min(q1_.forward(tape, store, x), q2_.forward(tape, store, x));
}

template <typename S>
Matrix<S> TwinCritic<S>::min_target_value(const Matrix<S>& z, const Matrix<S>& a) {
  Tape<S> tape;
  tape.freeze(target_);
  return min_q(tape, tape.constant(z), tape.constant(a), true).value();
}

template <typename S>
Var<S> TwinCritic<S>::loss(Tape<S>& tape, const Var<S>& z, const Var<S>& a, const Matrix<S>& y, double& max_abs_q) {
  const Var<S> x = concat_cols({z, a});
  const Var<S> q1 = q1_.forward(tape, online_, x);
  const Var<S> q2 = q2_.forward(tape, online_, x);
  max_abs_q = static_cast<double>(std::max(q1.value().cwiseAbs().maxCoeff(), q2.value().cwiseAbs().maxCoeff()));
  const Var<S> target = tape.constant(y);
  return add(mean(square(sub(q1, target))), mean(square(sub(q2, target))));
}

// ---------------------------------------------------------------- BRAC

template <typename S>
BracLearner<S>::BracLearner(Frontend<S> frontend, const TrajectoryDataset& data, LearnerConfig cfg,
                            std::uint64_t seed)
    : Learner<S>(std::move(frontend), std::move(cfg), data.action_dim(), seed),
      data_(&data),
      index_(data),
      aux_sampler_(make_aux_sampler(this->frontend_, data)),
      critic_(this->frontend_.dim(), data.action_dim(), this->cfg_),
      behavior_head_(this->frontend_.dim(), data.action_dim(), this->cfg_.hidden, this->cfg_.activation, "behavior") {
  if (data.state_dim() != this->frontend_.state_dim())
    throw DimensionError("BRAC: dataset state dimension does not match the frontend");
  Rng rng = make_rng(seed, Stream::kInit, 1);
  critic_.init(rng);
  behavior_head_.init(behavior_, behavior_temperature_, rng);
}

template <typename S>
void BracLearner<S>::prepare_behavior() {
  if (behavior_ready_) return;
  for (std::int64_t s = 1; s <= this->cfg_.behavior_steps; ++s) {
    Rng rng = this->stream(this->kBehavior, s);
    const auto refs = draw_refs(index_, this->cfg_.batch, rng);
    const Matrix<S> targets = action_rows<S>(refs, this->action_dim_);
    Tape<S> tape;
    for (auto* st : this->frontend_.trainable()) tape.freeze(*st);
    const Var<S> z = this->frontend_.encode(tape, this->observations(refs));
    const auto dist = behavior_head_.distribution(tape, behavior_, tape.constant(z.value()));
    const Matrix<S> noise = randn<S>(targets.rows(), targets.cols(), rng);
    const auto l = action_likelihood_loss(tape, behavior_head_, behavior_temperature_, dist, targets, noise);
    behavior_.zero_grad();
    behavior_temperature_.zero_grad();
    tape.backward(l.loss);
    const double value = static_cast<double>(l.loss.item());
    if (!std::isfinite(value) || !behavior_.grads_finite() || !behavior_temperature_.grads_finite()) {
      this->mark_diverged("behavior cloning diverged at step " + std::to_string(s));
      return;
    }
    behavior_.adam_step(static_cast<S>(this->cfg_.learning_rate));
    behavior_temperature_.adam_step(static_cast<S>(this->cfg_.learning_rate));
    this->diag_["behavior_nll"] = l.nll;
  }
  behavior_ready_ = true;
}

template <typename S>
TransitionBatch<S> BracLearner<S>::sample_transitions(Rng& rng) const {
  const auto refs = draw_refs(index_, this->cfg_.batch, rng);
  TransitionBatch<S> b;
  b.obs = this->observations(refs);
  b.next_obs = this->observations(advance(refs));
  b.actions = action_rows<S>(refs, this->action_dim_);
  b.rewards = reward_rows<S>(refs);
  return b;
}

template <typename S>
Matrix<S> BracLearner<S>::next_actions(const TransitionBatch<S>& batch, const Matrix<S>& noise) {
  const Matrix<S> z_next = this->frontend_.encode_value(batch.next_obs);
  Tape<S> tape;
  tape.freeze(this->actor_);
  const auto dist = this->head_.distribution(tape, this->actor_, tape.constant(z_next));
  return tanh_gaussian_sample(dist, noise).action.value();
}

template <typename S>
Matrix<S> BracLearner<S>::td_targets(const TransitionBatch<S>& batch, const Matrix<S>& next_actions) {
  const Matrix<S> z_next = this->frontend_.encode_value(batch.next_obs);
  const Matrix<S> q = critic_.min_target_value(z_next, next_actions);
  return (batch.rewards.array() + static_cast<S>(this->cfg_.gamma) * q.array()).matrix();
}

template <typename S>
typename BracLearner<S>::ActorLoss BracLearner<S>::actor_loss(Tape<S>& tape, const Matrix<S>& z,
                                                               const Matrix<S>& noise) {
  tape.freeze(critic_.online());
  tape.freeze(behavior_);
  const Var<S> zc = tape.constant(z);
  const auto dist = this->head_.distribution(tape, this->actor_, zc);
  const Var<S> u = add(dist.mean, mul(exp(dist.log_std), tape.constant(noise)));
  const Var<S> a = tanh(u);
  ActorLoss out;
  out.q_term = neg(mean(critic_.min_q(tape, zc, a, false)));
  out.loss = out.q_term;
  if (this->cfg_.kl_weight > 0) {
    const auto bd = behavior_head_.distribution(tape, behavior_, zc);
    // The tanh Jacobians of both densities cancel in the log-ratio.
    out.kl_term = mean(sub(gaussian_log_density(u, dist.mean, dist.log_std),
                           gaussian_log_density(u, bd.mean, bd.log_std)));
    out.loss = add(out.loss, scale(*out.kl_term, static_cast<S>(this->cfg_.kl_weight)));
  }
  return out;
}

template <typename S>
Var<S> BracLearner<S>::critic_loss(Tape<S>& tape, std::int64_t step, double& max_abs_q) {
  Rng rng = this->stream(this->kBatch, step);
  const TransitionBatch<S> b = sample_transitions(rng);
  Rng noise_rng = this->stream(this->kNoise, step);
  const Matrix<S> noise = randn<S>(b.actions.rows(), b.actions.cols(), noise_rng);
  const Matrix<S> y = td_targets(b, next_actions(b, noise));
  const Var<S> z = this->frontend_.encode(tape, b.obs);
  return critic_.loss(tape, z, tape.constant(b.actions), y, max_abs_q);
}

template <typename S>
Var<S> BracLearner<S>::frontend_task_loss(Tape<S>& tape, std::int64_t step) {
  double max_abs_q = 0.0;
  return critic_loss(tape, step, max_abs_q);
}

template <typename S>
void BracLearner<S>::do_update(std::int64_t step) {
  prepare_behavior();
  if (this->diverged()) return;
  const double lr = this->cfg_.learning_rate;
  {
    Tape<S> tape;
    double max_abs_q = 0.0;
    Var<S> loss = critic_loss(tape, step, max_abs_q);
    if (this->frontend_.has_auxiliary()) loss = add(loss, this->auxiliary_term(tape, step));
    const std::vector<typename Learner<S>::UpdateGroup> groups = {{{&critic_.online()}, lr},
                                                                  {this->frontend_.trainable(), lr}};
    this->zero_grads(groups);
    tape.backward(loss);
    const double value = static_cast<double>(loss.item());
    this->diag_["critic_loss"] = value;
    this->diag_["max_abs_q"] = max_abs_q;
    if (max_abs_q > this->cfg_.q_limit) {
      this->mark_diverged("critic diverged: |Q| = " + std::to_string(max_abs_q) + " at step " + std::to_string(step));
      return;
    }
    if (!this->apply(step, value, groups)) return;
  }
  {
    // Actor features come from the updated frontend on the same batch.
    Rng rng = this->stream(this->kBatch, step);
    const TransitionBatch<S> b = sample_transitions(rng);
    const Matrix<S> z = this->frontend_.encode_value(b.obs);
    Rng noise_rng = this->stream(this->kActor, step);
    const Matrix<S> noise = randn<S>(z.rows(), this->action_dim_, noise_rng);
    Tape<S> tape;
    const ActorLoss l = actor_loss(tape, z, noise);
    const std::vector<typename Learner<S>::UpdateGroup> groups = {{{&this->actor_}, this->cfg_.policy_learning_rate}};
    this->zero_grads(groups);
    tape.backward(l.loss);
    const double value = static_cast<double>(l.loss.item());
    this->diag_["actor_loss"] = value;
    if (l.kl_term) this->diag_["kl"] = static_cast<double>(l.kl_term->item());
    if (!this->apply(step, value, groups)) return;
  }
  critic_.update_target(this->cfg_.target_rate);
  this->frontend_.after_update();
}

template <typename S>
std::vector<std::pair<std::string, ParamStore<S>*>> BracLearner<S>::owned_stores() {
  return {{"critic", &critic_.online()},
          {"critic_target", &critic_.target()},
          {"behavior", &behavior_},
          {"behavior_temperature", &behavior_temperature_}};
}

template <typename S>
void BracLearner<S>::save_state(Checkpoint& ckpt) const {
  put_scalar(ckpt, "brac/behavior_ready", behavior_ready_ ? 1.0 : 0.0);
}

template <typename S>
void BracLearner<S>::load_state(const Checkpoint& ckpt) {
  behavior_ready_ = get_scalar(ckpt, "brac/behavior_ready") != 0.0;
}

template <typename S>
SubTrajectoryBatch<float> BracLearner<S>::auxiliary_batch(Rng& rng) {
  return aux_sampler_->sample(this->cfg_.aux_batch, rng);
}

// ---------------------------------------------------------------- SAC

template <typename S>
SacLearner<S>::SacLearner(Frontend<S> frontend, ObservationEnv env, LearnerConfig cfg, std::uint64_t seed)
    : Learner<S>(std::move(frontend), std::move(cfg), env.spec().action_dim, seed),
      env_(std::move(env)),
      replay_(this->cfg_.replay_capacity, env_.spec().state_dim, env_.spec().action_dim),
      critic_(this->frontend_.dim(), env_.spec().action_dim, this->cfg_) {
  if (env_.spec().state_dim != this->frontend_.state_dim())
    throw DimensionError("SAC: observation dimension does not match the frontend");
  Rng rng = make_rng(seed, Stream::kInit, 1);
  critic_.init(rng);
}

template <typename S>
void SacLearner<S>::warmstart(const TrajectoryDataset& data) {
  if (data.state_dim() != env_.spec().state_dim || data.action_dim() != env_.spec().action_dim)
    throw DimensionError("SAC warmstart: dataset dimensions do not match the environment");
  for (const Trajectory& t : data.trajectories) {
    replay_.begin_episode(t.states.row(0).transpose().template cast<double>());
    for (Index i = 0; i < t.length(); ++i)
      replay_.add(t.actions.row(i).transpose().template cast<double>(), static_cast<double>(t.rewards(i, 0)),
                  t.states.row(i + 1).transpose().template cast<double>());
  }
}

template <typename S>
double SacLearner<S>::alpha() const {
  const std::string key = this->actor_temperature_.names().front();
  return std::exp(static_cast<double>(this->actor_temperature_.value(key)(0, 0)));
}

template <typename S>
void SacLearner<S>::env_step(std::int64_t step) {
  const EnvSpec& spec = env_.spec();
  if (!in_episode_) {
    Rng rng = this->stream(this->kReset, episodes_);
    const Vec obs = env_.reset(rng);
    ep_states_.setZero(spec.horizon + 1, spec.state_dim);
    ep_actions_.setZero(spec.horizon, spec.action_dim);
    ep_rewards_.setZero(spec.horizon, 1);
    ep_states_.row(0) = obs.cast<float>().transpose();
    replay_.begin_episode(obs);
    in_episode_ = true;
  }
  const int t = env_.t();
  Rng rng = this->stream(this->kExplore, step);
  Vec action(spec.action_dim);
  if (env_steps_ < this->cfg_.random_steps) {
    for (Index i = 0; i < spec.action_dim; ++i) action[i] = uniform(rng, -1.0, 1.0);
  } else {
    const auto obs = this->observations({StepRef{&ep_states_, &ep_actions_, &ep_rewards_, t}});
    Tape<S> tape;
    tape.freeze(this->actor_);
    for (auto* s : this->frontend_.trainable()) tape.freeze(*s);
    const auto dist = this->head_.distribution(tape, this->actor_, this->frontend_.encode(tape, obs));
    const Matrix<S> noise = randn<S>(1, spec.action_dim, rng);
    action = tanh_gaussian_sample(dist, noise).action.value().row(0).transpose().template cast<double>();
  }
  const ObservationEnv::Step r = env_.step(action);
  ep_actions_.row(t) = action.cast<float>().transpose();
  ep_rewards_(t, 0) = static_cast<float>(r.reward);
  ep_states_.row(t + 1) = r.observation.cast<float>().transpose();
  replay_.add(action, r.reward, r.observation);
  ++env_steps_;
  if (r.done) {
    in_episode_ = false;
    ++episodes_;
  }
}

template <typename S>
Var<S> SacLearner<S>::critic_loss(Tape<S>& tape, std::int64_t step, double& max_abs_q) {
  Rng rng = this->stream(this->kBatch, step);
  const auto refs = replay_.sample(this->cfg_.batch, rng);
  const ObservationBatch<S> obs = this->observations(refs);
  const Matrix<S> z_next = this->frontend_.encode_value(this->observations(advance(refs)));
  Rng noise_rng = this->stream(this->kNoise, step);
  const Matrix<S> noise = randn<S>(z_next.rows(), this->action_dim_, noise_rng);
  Matrix<S> y;
  {
    Tape<S> t;
    t.freeze(this->actor_);
    const auto dist = this->head_.distribution(t, this->actor_, t.constant(z_next));
    const auto s = tanh_gaussian_sample(dist, noise);
    const Matrix<S> a_next = s.action.value();
    const Matrix<S> logp = s.log_prob.value();
    const Matrix<S> q = critic_.min_target_value(z_next, a_next);
    const S alpha = static_cast<S>(this->alpha());
    y = (reward_rows<S>(refs).array() + static_cast<S>(this->cfg_.gamma) * (q.array() - alpha * logp.array())).matrix();
  }
  const Var<S> z = this->frontend_.encode(tape, obs);
  return critic_.loss(tape, z, tape.constant(action_rows<S>(refs, this->action_dim_)), y, max_abs_q);
}

template <typename S>
Var<S> SacLearner<S>::frontend_task_loss(Tape<S>& tape, std::int64_t step) {
  double max_abs_q = 0.0;
  return critic_loss(tape, step, max_abs_q);
}

template <typename S>
void SacLearner<S>::do_update(std::int64_t step) {
  env_step(step);
  if (replay_.size() < this->cfg_.batch) return;
  const double lr = this->cfg_.learning_rate;
  Matrix<S> z;
  {
    Tape<S> tape;
    double max_abs_q = 0.0;
    Var<S> loss = critic_loss(tape, step, max_abs_q);
    if (this->frontend_.has_auxiliary()) loss = add(loss, this->auxiliary_term(tape, step));
    const std::vector<typename Learner<S>::UpdateGroup> groups = {{{&critic_.online()}, lr},
                                                                  {this->frontend_.trainable(), lr}};
    this->zero_grads(groups);
    tape.backward(loss);
    const double value = static_cast<double>(loss.item());
    this->diag_["critic_loss"] = value;
    this->diag_["max_abs_q"] = max_abs_q;
    if (max_abs_q > this->cfg_.q_limit) {
      this->mark_diverged("critic diverged: |Q| = " + std::to_string(max_abs_q) + " at step " + std::to_string(step));
      return;
    }
    if (!this->apply(step, value, groups)) return;
  }
  {
    Rng rng = this->stream(this->kBatch, step);
    const auto refs = replay_.sample(this->cfg_.batch, rng);
    z = this->frontend_.encode_value(this->observations(refs));
    Rng noise_rng = this->stream(this->kActor, step);
    const Matrix<S> noise = randn<S>(z.rows(), this->action_dim_, noise_rng);
    Tape<S> tape;
    tape.freeze(critic_.online());
    const Var<S> zc = tape.constant(z);
    const auto dist = this->head_.distribution(tape, this->actor_, zc);
    const auto s = tanh_gaussian_sample(dist, noise);
    const S alpha = static_cast<S>(this->alpha());
    const Var<S> q = critic_.min_q(tape, zc, s.action, false);
    const Var<S> actor_loss = mean(sub(scale(s.log_prob, alpha), q));
    const S mean_logp = s.log_prob.value().mean();
    const Var<S> log_alpha = this->head_.log_alpha(tape, this->actor_temperature_);
    const Var<S> temp_loss = mul(log_alpha, tape.constant(-(mean_logp + this->head_.target_entropy())));
    const Var<S> loss = add(actor_loss, sum(temp_loss));
    const std::vector<typename Learner<S>::UpdateGroup> groups = {
        {{&this->actor_, &this->actor_temperature_}, lr}};
    this->zero_grads(groups);
    tape.backward(loss);
    const double value = static_cast<double>(actor_loss.item());
    this->diag_["actor_loss"] = value;
    this->diag_["entropy"] = -static_cast<double>(mean_logp);
    this->diag_["alpha"] = static_cast<double>(alpha);
    if (!this->apply(step, static_cast<double>(loss.item()), groups)) return;
  }
  critic_.update_target(this->cfg_.target_rate);
  this->frontend_.after_update();
}

template <typename S>
std::vector<std::pair<std::string, ParamStore<S>*>> SacLearner<S>::owned_stores() {
  return {{"critic", &critic_.online()}, {"critic_target", &critic_.target()}};
}

template <typename S>
void SacLearner<S>::save_state(Checkpoint& ckpt) const {
  if (in_episode_) throw ConfigurationError("SAC state can only be saved between episodes");
  replay_.save(ckpt, "sac/replay");
  put_scalar(ckpt, "sac/env_steps", static_cast<double>(env_steps_));
  put_scalar(ckpt, "sac/episodes", static_cast<double>(episodes_));
}

template <typename S>
void SacLearner<S>::load_state(const Checkpoint& ckpt) {
  replay_.load(ckpt, "sac/replay");
  env_steps_ = static_cast<std::int64_t>(get_scalar(ckpt, "sac/env_steps"));
  episodes_ = static_cast<std::int64_t>(get_scalar(ckpt, "sac/episodes"));
  in_episode_ = false;
}

template <typename S>
SubTrajectoryBatch<float> SacLearner<S>::auxiliary_batch(Rng& rng) {
  const auto& c = this->frontend_.objective()->config();
  return replay_.sample_windows(this->cfg_.aux_batch, c.window, c.gamma, this->frontend_.history_stats(), rng);
}

template class Learner<float>;
template class Learner<double>;
template class BcLearner<float>;
template class BcLearner<double>;
template class TwinCritic<float>;
template class TwinCritic<double>;
template class BracLearner<float>;
template class BracLearner<double>;
template class SacLearner<float>;
template class SacLearner<double>;

}  // namespace orpl
