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

#include "orpl/downstream/frontend.hpp"

#include <algorithm>

#include "orpl/numerics/errors.hpp"

namespace orpl {

FrontendMode parse_frontend_mode(const std::string& name) {
  if (name == "raw") return FrontendMode::kRaw;
  if (name == "frozen") return FrontendMode::kFrozen;
  if (name == "finetune") return FrontendMode::kFinetune;
  if (name == "auxiliary") return FrontendMode::kAuxiliary;
  throw ConfigurationError("unknown frontend mode '" + name + "'");
}

std::string to_string(FrontendMode mode) {
  switch (mode) {
    case FrontendMode::kRaw: return "raw";
    case FrontendMode::kFrozen: return "frozen";
    case FrontendMode::kFinetune: return "finetune";
    case FrontendMode::kAuxiliary: return "auxiliary";
  }
  return "unknown";
}

template <typename S>
ObservationBatch<S> ObservationBatch<S>::from_states(Matrix<S> states) {
  ObservationBatch<S> b;
  b.size = states.rows();
  b.rows.emplace_back(static_cast<std::size_t>(b.size));
  for (Index i = 0; i < b.size; ++i) b.rows[0][static_cast<std::size_t>(i)] = i;
  History<S> h;
  h.states.push_back(std::move(states));
  b.groups.push_back(std::move(h));
  return b;
}

template <typename S>
Matrix<S> ObservationBatch<S>::newest() const {
  if (groups.empty()) throw EmptyInputError("empty observation batch");
  Matrix<S> out(size, groups.front().states.back().cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Matrix<S>& s = groups[g].states.back();
    for (std::size_t j = 0; j < rows[g].size(); ++j) out.row(rows[g][j]) = s.row(static_cast<Index>(j));
  }
  return out;
}

ObservationBatch<float> make_observations(const std::vector<StepRef>& refs, Index history_length,
                                          const RewardStats& stats) {
  if (refs.empty()) throw EmptyInputError("make_observations: no references");
  const Index sd = refs.front().states->cols();
  if (history_length <= 1) {
    Matrix<float> s(static_cast<Index>(refs.size()), sd);
    for (std::size_t i = 0; i < refs.size(); ++i) s.row(static_cast<Index>(i)) = refs[i].states->row(refs[i].t);
    return ObservationBatch<float>::from_states(std::move(s));
  }
  const Index ad = refs.front().actions->cols();
  std::vector<std::vector<Index>> by_len(static_cast<std::size_t>(history_length + 1));
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Index len = std::min(history_length, refs[i].t + 1);
    by_len[static_cast<std::size_t>(len)].push_back(static_cast<Index>(i));
  }
  const float inv_std = static_cast<float>(1.0 / stats.std);
  ObservationBatch<float> out;
  out.size = static_cast<Index>(refs.size());
  for (Index len = 1; len <= history_length; ++len) {
    const auto& members = by_len[static_cast<std::size_t>(len)];
    if (members.empty()) continue;
    const Index n = static_cast<Index>(members.size());
    History<float> h;
    for (Index p = 0; p < len; ++p) {
      Matrix<float> s(n, sd);
      Matrix<float> a(n, ad), r(n, 1);
      for (Index j = 0; j < n; ++j) {
        const StepRef& ref = refs[static_cast<std::size_t>(members[static_cast<std::size_t>(j)])];
        const Index t = ref.t - (len - 1) + p;
        s.row(j) = ref.states->row(t);
        if (p + 1 < len) {
          a.row(j) = ref.actions->row(t);
          r(j, 0) = (static_cast<float>((*ref.rewards)(t, 0)) - static_cast<float>(stats.mean)) * inv_std;
        }
      }
      h.states.push_back(std::move(s));
      if (p + 1 < len) {
        h.actions.push_back(std::move(a));
        h.rewards.push_back(std::move(r));
      }
    }
    out.groups.push_back(std::move(h));
    out.rows.push_back(members);
  }
  return out;
}

template <typename S>
Frontend<S>::Frontend(Index state_dim) : mode_(FrontendMode::kRaw), state_dim_(state_dim) {
  if (state_dim <= 0) throw ConfigurationError("frontend needs a positive state_dim");
}

template <typename S>
Frontend<S>::Frontend(FrontendMode mode, std::shared_ptr<const Objective<S>> objective, ReprStores<S> stores,
                      double aux_weight, RewardStats history_stats)
    : mode_(mode),
      state_dim_(objective ? objective->config().state_dim : 0),
      objective_(std::move(objective)),
      stores_(std::move(stores)),
      aux_weight_(aux_weight),
      stats_(history_stats) {
  if (mode_ == FrontendMode::kRaw) throw ConfigurationError("use the state_dim constructor for a raw frontend");
  if (!objective_) throw ConfigurationError("a pretrained frontend needs an objective");
  if (stores_.phi.empty()) throw ConfigurationError("frontend parameters are not initialized");
  if (!(aux_weight_ >= 0.0)) throw ConfigurationError("auxiliary weight must be non-negative");
}

template <typename S>
Index Frontend<S>::dim() const {
  return mode_ == FrontendMode::kRaw ? state_dim_ : objective_->representation_dim();
}

template <typename S>
Index Frontend<S>::history_length() const {
  return objective_ && objective_->uses_history() ? objective_->config().window : 1;
}

template <typename S>
Var<S> Frontend<S>::encode(Tape<S>& tape, const ObservationBatch<S>& obs) {
  if (obs.groups.empty()) throw EmptyInputError("empty observation batch");
  if (mode_ == FrontendMode::kRaw) return tape.constant(obs.newest());
  if (mode_ == FrontendMode::kFrozen) {
    tape.freeze(stores_.phi);
    tape.freeze(stores_.heads);
    tape.freeze(stores_.temperature);
  }
  std::vector<Var<S>> parts;
  for (const auto& h : obs.groups) {
    parts.push_back(objective_->uses_history()
                        ? objective_->represent_history(tape, stores_, h)
                        : objective_->represent(tape, stores_, tape.constant(h.states.back())));
  }
  if (parts.size() == 1) {
    bool ordered = true;
    for (std::size_t j = 0; j < obs.rows[0].size(); ++j) ordered &= obs.rows[0][j] == static_cast<Index>(j);
    if (ordered) return parts[0];
  }
  std::vector<Index> inverse(static_cast<std::size_t>(obs.size));
  Index offset = 0;
  for (std::size_t g = 0; g < obs.rows.size(); ++g) {
    for (std::size_t j = 0; j < obs.rows[g].size(); ++j)
      inverse[static_cast<std::size_t>(obs.rows[g][j])] = offset + static_cast<Index>(j);
    offset += static_cast<Index>(obs.rows[g].size());
  }
  return gather_rows(concat_rows(parts), inverse);
}

template <typename S>
Matrix<S> Frontend<S>::encode_value(const ObservationBatch<S>& obs) {
  Tape<S> tape;
  tape.freeze(stores_.phi);
  tape.freeze(stores_.heads);
  tape.freeze(stores_.temperature);
  return encode(tape, obs).value();
}

template <typename S>
std::vector<ParamStore<S>*> Frontend<S>::trainable() {
  switch (mode_) {
    case FrontendMode::kRaw:
    case FrontendMode::kFrozen:
      return {};
    case FrontendMode::kFinetune:
      if (objective_->uses_history()) return {&stores_.phi, &stores_.heads};
      return {&stores_.phi};
    case FrontendMode::kAuxiliary:
      return stores_.trainable();
  }
  return {};
}

template <typename S>
ObjectiveOutput<S> Frontend<S>::auxiliary_loss(Tape<S>& tape, const SubTrajectoryBatch<S>& batch, Rng& rng) {
  if (mode_ != FrontendMode::kAuxiliary) throw ConfigurationError("frontend has no auxiliary objective");
  ObjectiveOutput<S> out = objective_->loss(tape, stores_, batch, rng);
  out.loss = scale(out.loss, static_cast<S>(aux_weight_));
  return out;
}

template <typename S>
void Frontend<S>::after_update() {
  if (mode_ == FrontendMode::kAuxiliary) objective_->after_update(stores_);
}

template struct ObservationBatch<float>;
template struct ObservationBatch<double>;
template class Frontend<float>;
template class Frontend<double>;

}  // namespace orpl
