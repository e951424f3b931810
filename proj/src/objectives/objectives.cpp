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

#include "orpl/objectives/objectives.hpp"

#include <cmath>

#include "orpl/numerics/errors.hpp"

namespace orpl {

namespace {

template <typename S>
Mlp<S> head_mlp(const ObjectiveConfig& c, Index in, Index out, const std::string& prefix) {
  return Mlp<S>(MLPSpec{in, c.head_hidden, out, c.activation}, prefix);
}

// Sum of per-dimension batch variances.
template <typename S>
double batch_variance(const Matrix<S>& x) {
  const auto centered = (x.rowwise() - x.colwise().mean()).template cast<double>();
  return centered.array().square().sum() / static_cast<double>(std::max<Index>(1, x.rows()));
}

template <typename S>
Matrix<S> stacked_window_values(const std::vector<Var<S>>& phi) {
  Index rows = 0;
  for (const auto& v : phi) rows += v.rows();
  Matrix<S> all(rows, phi.front().cols());
  Index r = 0;
  for (const auto& v : phi) {
    all.middleRows(r, v.rows()) = v.value();
    r += v.rows();
  }
  return all;
}

}  // namespace

template <typename S>
std::vector<Index> available_rows(const SubTrajectoryBatch<S>& batch, Index position) {
  std::vector<Index> rows;
  for (Index b = 0; b < batch.batch; ++b)
    if (position < batch.window - 1 || batch.tail_valid(b, 0) != S(0)) rows.push_back(b);
  return rows;
}

template <typename S>
Matrix<S> clamped_actions(const Matrix<S>& actions, double& clamp_count) {
  Matrix<S> a = actions;
  clamp_count += static_cast<double>(clamp_actions(a));
  return a;
}

template <typename S>
ObjectiveOutput<S> reconstruct_action_term(Tape<S>& tape, ReprStores<S>& stores, const TanhGaussianHead<S>& head,
                                           const std::vector<Var<S>>& phi, const SubTrajectoryBatch<S>& batch,
                                           Rng& rng) {
  std::vector<Var<S>> inputs;
  std::vector<Matrix<S>> targets;
  for (Index i = 0; i < batch.window; ++i) {
    const auto rows = available_rows(batch, i);
    if (rows.empty()) continue;
    const bool all = static_cast<Index>(rows.size()) == batch.batch;
    inputs.push_back(all ? phi[static_cast<std::size_t>(i)] : gather_rows(phi[static_cast<std::size_t>(i)], rows));
    Matrix<S> a(static_cast<Index>(rows.size()), batch.action_dim());
    for (std::size_t r = 0; r < rows.size(); ++r)
      a.row(static_cast<Index>(r)) = batch.actions[static_cast<std::size_t>(i)].row(rows[r]);
    targets.push_back(std::move(a));
  }
  Index n = 0;
  for (const auto& t : targets) n += t.rows();
  Matrix<S> target(n, batch.action_dim());
  Index r = 0;
  for (const auto& t : targets) {
    target.middleRows(r, t.rows()) = t;
    r += t.rows();
  }
  ObjectiveOutput<S> out;
  double clamps = 0;
  target = clamped_actions(target, clamps);
  auto dist = head.distribution(tape, stores.heads, concat_rows(inputs));
  auto ll = action_likelihood_loss(tape, head, stores.temperature, dist, target, randn<S>(n, batch.action_dim(), rng));
  out.loss = ll.loss;
  out.terms["action_nll"] = ll.nll;
  out.diagnostics["entropy"] = ll.entropy;
  out.diagnostics["alpha"] = ll.alpha;
  out.diagnostics["clamped_actions"] = clamps;
  return out;
}

template <typename S>
ObjectiveOutput<S> reconstruct_reward_term(Tape<S>& tape, ReprStores<S>& stores, const Mlp<S>& head,
                                           const std::vector<Var<S>>& phi, const SubTrajectoryBatch<S>& batch) {
  std::vector<Var<S>> inputs;
  std::vector<Var<S>> targets;
  for (Index i = 0; i < batch.window; ++i) {
    const auto rows = available_rows(batch, i);
    if (rows.empty()) continue;
    const bool all = static_cast<Index>(rows.size()) == batch.batch;
    Var<S> r = tape.constant(batch.rewards[static_cast<std::size_t>(i)]);
    inputs.push_back(all ? phi[static_cast<std::size_t>(i)] : gather_rows(phi[static_cast<std::size_t>(i)], rows));
    targets.push_back(all ? r : gather_rows(r, rows));
  }
  ObjectiveOutput<S> out;
  out.loss = mse(head.forward(tape, stores.heads, concat_rows(inputs)), concat_rows(targets));
  out.terms["reward_mse"] = static_cast<double>(out.loss.item());
  return out;
}

// Inverse model ------------------------------------------------------------

template <typename S>
InverseModel<S>::InverseModel(ObjectiveConfig cfg) : Objective<S>(std::move(cfg)) {
  const auto& c = this->cfg_;
  const Index in = c.window * c.repr_dim + std::max<Index>(0, c.window - 2) * c.action_dim;
  head_ = TanhGaussianHead<S>(in, c.action_dim, c.head_hidden, c.activation, "inverse/pi");
}

template <typename S>
void InverseModel<S>::init_heads(ReprStores<S>& stores, Rng& rng) const {
  head_.init(stores.heads, stores.temperature, rng);
}

template <typename S>
ObjectiveOutput<S> InverseModel<S>::loss(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                         Rng& rng) const {
  const Index W = batch.window;
  if (W < 2) throw WindowError("inverse model needs a window of at least 2");
  auto phi = this->embed_window(tape, stores, batch, this->cfg_.discrete ? &rng : nullptr);
  std::vector<Var<S>> parts = phi;
  for (Index i = 0; i + 2 < W; ++i) parts.push_back(tape.constant(batch.actions[static_cast<std::size_t>(i)]));
  double clamps = 0;
  Matrix<S> target = clamped_actions(batch.actions[static_cast<std::size_t>(W - 2)], clamps);
  auto dist = head_.distribution(tape, stores.heads, concat_cols(parts));
  auto ll = action_likelihood_loss(tape, head_, stores.temperature, dist, target,
                                   randn<S>(batch.batch, batch.action_dim(), rng));
  ObjectiveOutput<S> out;
  out.loss = ll.loss;
  out.terms["action_nll"] = ll.nll;
  out.diagnostics["entropy"] = ll.entropy;
  out.diagnostics["alpha"] = ll.alpha;
  out.diagnostics["clamped_actions"] = clamps;
  return out;
}

// Forward models -----------------------------------------------------------

template <typename S>
ForwardModel<S>::ForwardModel(ObjectiveConfig cfg, ForwardTarget target)
    : Objective<S>(std::move(cfg)), target_(target) {
  const auto& c = this->cfg_;
  const Index in = (c.window - 1) * (c.repr_dim + c.action_dim);
  const Index out = target == ForwardTarget::kRaw ? c.state_dim : c.repr_dim;
  f_ = head_mlp<S>(c, std::max<Index>(in, 1), out, "forward/f");
  g_ = head_mlp<S>(c, std::max<Index>(in, 1), 1, "forward/g");
}

template <typename S>
void ForwardModel<S>::init_heads(ReprStores<S>& stores, Rng& rng) const {
  const auto& c = this->cfg_;
  f_.init(stores.heads, rng);
  g_.init(stores.heads, rng);
  g_.zero_output_layer(stores.heads);
  if (target_ == ForwardTarget::kEnergy) {
    stores.heads.add("forward/W", Matrix<S>(randn<S>(c.repr_dim, c.repr_dim, rng) /
                                            static_cast<S>(std::sqrt(static_cast<double>(c.repr_dim)))));
  } else {
    const Index dim = target_ == ForwardTarget::kRaw ? c.state_dim : c.repr_dim;
    stores.heads.add("forward/log_std", Matrix<S>::Zero(1, dim));
  }
}

template <typename S>
ObjectiveOutput<S> ForwardModel<S>::loss(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                         Rng& rng) const {
  const Index W = batch.window;
  if (W < 2) throw WindowError("forward models need a window of at least 2");
  auto phi = this->embed_window(tape, stores, batch, this->cfg_.discrete ? &rng : nullptr);
  std::vector<Var<S>> parts(phi.begin(), phi.end() - 1);
  for (Index i = 0; i + 1 < W; ++i) parts.push_back(tape.constant(batch.actions[static_cast<std::size_t>(i)]));
  Var<S> x = concat_cols(parts);
  Var<S> reward_term = mse(g_.forward(tape, stores.heads, x), tape.constant(batch.rewards[static_cast<std::size_t>(W - 2)]));
  Var<S> pred = f_.forward(tape, stores.heads, x);
  Var<S> state_term;
  ObjectiveOutput<S> out;
  switch (target_) {
    case ForwardTarget::kRaw:
      state_term = mean(diag_gaussian_nll(tape.constant(batch.states[static_cast<std::size_t>(W - 1)]), pred,
                                          tape.param(stores.heads, "forward/log_std")));
      break;
    case ForwardTarget::kLatent: {
      state_term = mean(diag_gaussian_nll(phi.back(), pred, tape.param(stores.heads, "forward/log_std")));
      const double var = batch_variance(stacked_window_values(phi));
      out.diagnostics["phi_variance"] = var;
      out.diagnostics["collapse"] = var < 1e-8 ? 1.0 : 0.0;
      break;
    }
    case ForwardTarget::kEnergy:
      state_term = info_nce_log_mean_exp(pred, phi.back(), tape.param(stores.heads, "forward/W"));
      break;
  }
  out.loss = add(reward_term, state_term);
  out.terms["reward_mse"] = static_cast<double>(reward_term.item());
  out.terms[target_ == ForwardTarget::kEnergy ? "state_contrastive" : "state_nll"] =
      static_cast<double>(state_term.item());
  return out;
}

// Temporal contrastive -----------------------------------------------------

template <typename S>
TemporalContrastive<S>::TemporalContrastive(ObjectiveConfig cfg, bool momentum)
    : Objective<S>(std::move(cfg)), momentum_(momentum) {
  const auto& c = this->cfg_;
  f_ = head_mlp<S>(c, c.repr_dim, c.repr_dim, "tcl/f");
  target_ = ReprNet<S>(c.repr_spec(), "phi");
}

template <typename S>
void TemporalContrastive<S>::init_heads(ReprStores<S>& stores, Rng& rng) const {
  const auto& c = this->cfg_;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(c.repr_dim)));
  for (Index i = 1; i < c.window; ++i)
    stores.heads.add("tcl/W" + std::to_string(i), Matrix<S>(randn<S>(c.repr_dim, c.repr_dim, rng) * scale));
  if (momentum_) {
    f_.init(stores.heads, rng);
    f_.zero_output_layer(stores.heads);
    for (const auto& [k, e] : stores.phi.entries()) stores.target.add(k, e.value);
  }
}

template <typename S>
ObjectiveOutput<S> TemporalContrastive<S>::loss(Tape<S>& tape, ReprStores<S>& stores,
                                                const SubTrajectoryBatch<S>& batch, Rng& rng) const {
  const Index W = batch.window;
  if (W < 2) throw WindowError("temporal contrastive loss needs a window of at least 2");
  Rng* sampler = this->cfg_.discrete ? &rng : nullptr;
  ObjectiveOutput<S> out;
  std::vector<Var<S>> keys;
  Var<S> query;
  if (!momentum_) {
    keys = this->embed_window(tape, stores, batch, sampler);
    query = keys.front();
  } else {
    if (stores.target.num_scalars() != stores.phi.num_scalars())
      throw ConfigurationError("momentum target does not match phi");
    tape.freeze(stores.target);
    Var<S> q0 = this->phi_.forward(tape, stores.phi, tape.constant(batch.states[0]), sampler);
    query = add(q0, f_.forward(tape, stores.heads, q0));
    std::vector<Var<S>> rest;
    for (Index i = 0; i < W; ++i) rest.push_back(tape.constant(batch.states[static_cast<std::size_t>(i)]));
    Var<S> all = target_.forward(tape, stores.target, concat_rows(rest), nullptr);
    for (Index i = 0; i < W; ++i) keys.push_back(slice_rows(all, i * batch.batch, batch.batch));
  }
  Var<S> total;
  for (Index i = 1; i < W; ++i) {
    Var<S> term = info_nce_log_mean_exp(query, keys[static_cast<std::size_t>(i)],
                                        tape.param(stores.heads, "tcl/W" + std::to_string(i)));
    out.terms["offset_" + std::to_string(i)] = static_cast<double>(term.item());
    total = i == 1 ? term : add(total, term);
  }
  out.loss = total;
  return out;
}

template <typename S>
void TemporalContrastive<S>::after_update(ReprStores<S>& stores) const {
  if (momentum_) stores.target.ema_from(stores.phi, static_cast<S>(this->cfg_.ema_rate));
}

// Value prediction ---------------------------------------------------------

template <typename S>
ValuePrediction<S>::ValuePrediction(ObjectiveConfig cfg) : Objective<S>(std::move(cfg)) {
  const auto& c = this->cfg_;
  cell_ = RecurrentCell<S>("vpn/cell", c.repr_dim, c.action_dim);
  reward_ = head_mlp<S>(c, c.repr_dim + c.action_dim, 1, "vpn/reward");
  value_ = head_mlp<S>(c, c.repr_dim + c.action_dim, 1, "vpn/value");
}

template <typename S>
void ValuePrediction<S>::init_heads(ReprStores<S>& stores, Rng& rng) const {
  cell_.init(stores.heads, rng);
  reward_.init(stores.heads, rng);
  value_.init(stores.heads, rng);
  reward_.zero_output_layer(stores.heads);
  value_.zero_output_layer(stores.heads);
}

template <typename S>
ObjectiveOutput<S> ValuePrediction<S>::loss(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                            Rng& rng) const {
  const Index W = batch.window, k = W - 1;
  if (W < 2) throw WindowError("value prediction needs a window of at least 2");
  Var<S> h = this->phi_.forward(tape, stores.phi, tape.constant(batch.states[0]), this->cfg_.discrete ? &rng : nullptr);
  Var<S> reward_loss, value_loss;
  for (Index i = 0; i <= k; ++i) {
    const auto si = static_cast<std::size_t>(i);
    Var<S> a = tape.constant(batch.actions[si]);
    Var<S> x = concat_cols({h, a});
    Var<S> v = value_.forward(tape, stores.heads, x);
    Var<S> g = tape.constant(batch.returns[si]);
    Var<S> vterm;
    if (i < k) {
      vterm = mse(v, g);
      Var<S> rterm = mse(reward_.forward(tape, stores.heads, x), tape.constant(batch.rewards[si]));
      reward_loss = i == 0 ? rterm : add(reward_loss, rterm);
      h = cell_.forward(tape, stores.heads, h, a);
    } else {
      // The last value term needs the dataset action a_{t+k}.
      Var<S> sq = mul(square(sub(v, g)), tape.constant(batch.tail_valid));
      vterm = scale(sum(sq), S(1) / static_cast<S>(batch.batch));
    }
    value_loss = i == 0 ? vterm : add(value_loss, vterm);
  }
  ObjectiveOutput<S> out;
  out.loss = add(reward_loss, value_loss);
  out.terms["reward_mse"] = static_cast<double>(reward_loss.item());
  out.terms["value_mse"] = static_cast<double>(value_loss.item());
  out.diagnostics["truncated_targets"] = static_cast<double>(batch.batch) - static_cast<double>(batch.tail_valid.sum());
  return out;
}

// Bisimulation -------------------------------------------------------------

template <typename S>
Bisimulation<S>::Bisimulation(ObjectiveConfig cfg) : Objective<S>(std::move(cfg)) {
  const auto& c = this->cfg_;
  dynamics_ = head_mlp<S>(c, c.repr_dim + c.action_dim, 2 * c.repr_dim, "bisim/dynamics");
}

template <typename S>
void Bisimulation<S>::init_heads(ReprStores<S>& stores, Rng& rng) const {
  dynamics_.init(stores.heads, rng);
}

template <typename S>
ObjectiveOutput<S> Bisimulation<S>::loss(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                         Rng& rng) const {
  if (batch.window < 2) throw WindowError("bisimulation needs a window of at least 2");
  const Index B = batch.batch, d = this->cfg_.repr_dim;
  Rng* sampler = this->cfg_.discrete ? &rng : nullptr;
  Var<S> both = this->phi_.forward(tape, stores.phi, tape.constant(Matrix<S>(
      (Matrix<S>(2 * B, batch.state_dim()) << batch.states[0], batch.states[1]).finished())), sampler);
  Var<S> phi0 = slice_rows(both, 0, B), phi1 = slice_rows(both, B, B);

  std::vector<Index> perm(static_cast<std::size_t>(B));
  for (Index i = 0; i < B; ++i) perm[static_cast<std::size_t>(i)] = i;
  if (!identical_pairs) {
    for (Index i = B - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)],
                                                perm[static_cast<std::size_t>(uniform_int(rng, 0, i))]);
  }

  Var<S> stats = dynamics_.forward(tape, stores.heads, concat_cols({phi0, tape.constant(batch.actions[0])}));
  Var<S> mu = slice_cols(stats, 0, d);
  Var<S> sigma = add_scalar(softplus(slice_cols(stats, d, d)), S(1e-4));
  Var<S> transition = mean(diag_gaussian_nll(stop_gradient(phi1), mu, log(sigma)));

  Var<S> dist = row_sum(abs(sub(phi0, gather_rows(phi0, perm))));
  // The bisimulation target carries no gradient; it is evaluated on values.
  const Matrix<S>& r = batch.rewards[0];
  const Matrix<S>& m = mu.value();
  const Matrix<S>& sd = sigma.value();
  Matrix<S> target(B, 1);
  for (Index i = 0; i < B; ++i) {
    const Index j = perm[static_cast<std::size_t>(i)];
    const double w2 = std::sqrt((m.row(i) - m.row(j)).template cast<double>().squaredNorm() +
                                (sd.row(i) - sd.row(j)).template cast<double>().squaredNorm());
    target(i, 0) = static_cast<S>(std::abs(static_cast<double>(r(i, 0) - r(j, 0))) + this->cfg_.bisim_gamma * w2);
  }
  Var<S> bisim = mean(square(sub(dist, stop_gradient(tape.constant(target)))));

  ObjectiveOutput<S> out;
  out.loss = add(bisim, transition);
  out.terms["bisim"] = static_cast<double>(bisim.item());
  out.terms["transition"] = static_cast<double>(transition.item());
  const double var = batch_variance(both.value());
  out.diagnostics["phi_variance"] = var;
  out.diagnostics["collapse"] = var < 1e-8 ? 1.0 : 0.0;
  return out;
}

// Reconstruction -----------------------------------------------------------

template <typename S>
Reconstruct<S>::Reconstruct(ObjectiveConfig cfg, Target target) : Objective<S>(std::move(cfg)), target_(target) {
  const auto& c = this->cfg_;
  action_head_ = TanhGaussianHead<S>(c.repr_dim, c.action_dim, c.head_hidden, c.activation, "reconstruct/pi");
  reward_head_ = head_mlp<S>(c, c.repr_dim, 1, "reconstruct/reward");
}

template <typename S>
void Reconstruct<S>::init_heads(ReprStores<S>& stores, Rng& rng) const {
  if (target_ == Target::kAction) {
    action_head_.init(stores.heads, stores.temperature, rng);
  } else {
    reward_head_.init(stores.heads, rng);
    reward_head_.zero_output_layer(stores.heads);
  }
}

template <typename S>
ObjectiveOutput<S> Reconstruct<S>::loss(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                        Rng& rng) const {
  auto phi = this->embed_window(tape, stores, batch, this->cfg_.discrete ? &rng : nullptr);
  if (target_ == Target::kAction) return reconstruct_action_term(tape, stores, action_head_, phi, batch, rng);
  return reconstruct_reward_term(tape, stores, reward_head_, phi, batch);
}

#define ORPL_INSTANTIATE_OBJECTIVES(S)                                                                        \
  template class InverseModel<S>;                                                                             \
  template class ForwardModel<S>;                                                                             \
  template class TemporalContrastive<S>;                                                                      \
  template class ValuePrediction<S>;                                                                          \
  template class Bisimulation<S>;                                                                             \
  template class Reconstruct<S>;                                                                              \
  template std::vector<Index> available_rows(const SubTrajectoryBatch<S>&, Index);                            \
  template Matrix<S> clamped_actions(const Matrix<S>&, double&);                                              \
  template ObjectiveOutput<S> reconstruct_action_term(Tape<S>&, ReprStores<S>&, const TanhGaussianHead<S>&,   \
                                                      const std::vector<Var<S>>&, const SubTrajectoryBatch<S>&, \
                                                      Rng&);                                                  \
  template ObjectiveOutput<S> reconstruct_reward_term(Tape<S>&, ReprStores<S>&, const Mlp<S>&,                \
                                                      const std::vector<Var<S>>&, const SubTrajectoryBatch<S>&);

ORPL_INSTANTIATE_OBJECTIVES(float)
ORPL_INSTANTIATE_OBJECTIVES(double)

}  // namespace orpl
