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

#include <memory>
#include <string>
#include <vector>

#include "orpl/data/dataset.hpp"
#include "orpl/objectives/objective.hpp"

namespace orpl {

enum class FrontendMode { kRaw, kFrozen, kFinetune, kAuxiliary };

FrontendMode parse_frontend_mode(const std::string& name);
std::string to_string(FrontendMode mode);

// Observations for a batch, grouped by history length. Group g holds the
// histories of batch rows rows[g] in that order.
template <typename S>
struct ObservationBatch {
  Index size = 0;
  std::vector<History<S>> groups;
  std::vector<std::vector<Index>> rows;

  static ObservationBatch from_states(Matrix<S> states);
  // Newest observation of every row, in batch order.
  Matrix<S> newest() const;

  template <typename T>
  ObservationBatch<T> cast() const {
    ObservationBatch<T> out;
    out.size = size;
    out.rows = rows;
    for (const auto& h : groups) {
      History<T> c;
      for (const auto& m : h.states) c.states.push_back(m.template cast<T>());
      for (const auto& m : h.actions) c.actions.push_back(m.template cast<T>());
      for (const auto& m : h.rewards) c.rewards.push_back(m.template cast<T>());
      out.groups.push_back(std::move(c));
    }
    return out;
  }
};

// Step t of a stored trajectory; rewards are raw.
struct StepRef {
  const Matrix<float>* states = nullptr;
  const Matrix<float>* actions = nullptr;
  const Matrix<float>* rewards = nullptr;
  Index t = 0;
};

// Histories ending at each reference, min(history_length, t + 1) states
// long. History rewards are standardized with `stats`.
ObservationBatch<float> make_observations(const std::vector<StepRef>& refs, Index history_length,
                                          const RewardStats& stats);

// Maps observations to the features a downstream learner reads.
template <typename S>
class Frontend {
 public:
  // Identity on observations.
  explicit Frontend(Index state_dim);
  // `stores` holds pretrained parameters for frozen/finetune, fresh ones
  // for auxiliary.
  Frontend(FrontendMode mode, std::shared_ptr<const Objective<S>> objective, ReprStores<S> stores,
           double aux_weight = 1.0, RewardStats history_stats = {});

  FrontendMode mode() const { return mode_; }
  Index dim() const;
  Index state_dim() const { return state_dim_; }
  Index history_length() const;
  const RewardStats& history_stats() const { return stats_; }

  Var<S> encode(Tape<S>& tape, const ObservationBatch<S>& obs);
  Matrix<S> encode_value(const ObservationBatch<S>& obs);

  // Stores the downstream optimizer updates (empty for raw and frozen).
  std::vector<ParamStore<S>*> trainable();
  bool has_auxiliary() const { return mode_ == FrontendMode::kAuxiliary; }
  // aux_weight * objective loss on a sub-trajectory batch.
  ObjectiveOutput<S> auxiliary_loss(Tape<S>& tape, const SubTrajectoryBatch<S>& batch, Rng& rng);
  void after_update();

  const Objective<S>* objective() const { return objective_.get(); }
  ReprStores<S>& stores() { return stores_; }
  const ReprStores<S>& stores() const { return stores_; }
  double aux_weight() const { return aux_weight_; }

 private:
  FrontendMode mode_;
  Index state_dim_;
  std::shared_ptr<const Objective<S>> objective_;
  ReprStores<S> stores_;
  double aux_weight_ = 1.0;
  RewardStats stats_;
};

extern template class Frontend<float>;
extern template class Frontend<double>;

}  // namespace orpl
