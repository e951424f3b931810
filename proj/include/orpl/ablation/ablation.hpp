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
#include <string>
#include <vector>

#include "orpl/data/masking.hpp"
#include "orpl/objectives/objectives.hpp"

namespace orpl {

// Raw factor values as written by a user.
struct AblationFactors {
  bool reconstruct_action = false;
  bool reconstruct_reward = false;
  bool predict_action = false;
  bool predict_reward = false;
  bool input_action = true;
  bool input_reward = true;
  bool input_embed = false;
  bool bidirectional = false;
  bool finetune = false;
  bool auxiliary_loss = false;
  bool momentum = false;
  bool discrete_embedding = false;
  bool context_embedding = false;

  static const std::vector<std::string>& names();
  bool& operator[](const std::string& name);
  bool operator[](const std::string& name) const;
  bool operator==(const AblationFactors&) const = default;
};

// A closed factor configuration: predict_action, predict_reward, momentum
// and context_embedding each switch input_embed on. The switch is recorded.
class AblationConfig {
 public:
  explicit AblationConfig(AblationFactors factors = {}, Index k_plus_1 = 8, Index repr_dim = 256);

  const AblationFactors& factors() const { return factors_; }
  bool operator[](const std::string& name) const { return factors_[name]; }
  Index k_plus_1() const { return k_plus_1_; }
  Index repr_dim() const { return repr_dim_; }
  // Factors that requested input_embed while it was off.
  const std::vector<std::string>& normalized_by() const { return normalized_by_; }
  bool normalized() const { return !normalized_by_.empty(); }

  // Keys are the factor names plus k_plus_1 and repr_dim; values are
  // true/false or integers.
  static AblationConfig from_section(const std::map<std::string, std::string>& section);
  std::map<std::string, std::string> to_section() const;
  std::string describe() const;

 private:
  AblationFactors factors_;
  Index k_plus_1_;
  Index repr_dim_;
  std::vector<std::string> normalized_by_;
};

// Block count for discrete embeddings: 16 for d = 256, otherwise the largest
// divisor of d not above sqrt(d).
Index discrete_block_count(Index repr_dim);

// Token order within each timestep.
struct SequenceLayout {
  Index window = 0;
  std::vector<TokenStream> streams;  // per timestep, state first

  Index tokens_per_step() const { return static_cast<Index>(streams.size()); }
  Index num_tokens() const { return window * tokens_per_step(); }
  // -1 when the stream is not part of the input.
  Index token_index(Index step, TokenStream s) const;
  std::vector<Index> positions() const;
};

SequenceLayout sequence_layout(const AblationConfig& cfg, Index window);

TransformerSpec acl_trunk_spec(Index repr_dim, Index window);

template <typename S>
struct InputSequence {
  SequenceLayout layout;
  Index batch = 0;
  // Masked items before projection, [stream][step], B x item_dim.
  std::array<std::vector<Var<S>>, kNumStreams> items;
  // Projected tokens, (num_tokens * batch) x width, token-major.
  Var<S> tokens;
};

// InfoNCE of context vectors against every state key, cross-entropy form:
// row r of `contexts` has its positive at key row r. `rows` selects the
// masked state positions. Returns a constant zero when `rows` is empty.
template <typename S>
Var<S> acl_loss(const Var<S>& contexts, const Var<S>& keys, const Var<S>& w, const std::vector<Index>& rows);

template <typename S>
class AclObjective final : public Objective<S> {
 public:
  AclObjective(ObjectiveConfig cfg, AblationConfig ablation, TransformerSpec trunk, MaskRates rates = {});

  const AblationConfig& ablation() const { return ablation_; }
  const TransformerSpec& trunk_spec() const { return trunk_.spec(); }
  Index state_token_dim() const;

  ObjectiveOutput<S> loss(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                          Rng& rng) const override;
  ObjectiveOutput<S> loss_with_plan(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                    const MaskPlan& plan, Rng& rng) const;
  void after_update(ReprStores<S>& stores) const override;

  Index min_window() const override { return 1; }

  // `phi` holds one B x d embedding per step (ignored for raw inputs).
  InputSequence<S> build_input_sequence(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                        const MaskPlan& plan, const std::vector<Var<S>>& phi) const;
  // Transformer outputs for every token, (num_tokens * batch) x d.
  Var<S> contexts(Tape<S>& tape, ReprStores<S>& stores, const InputSequence<S>& seq) const;
  // Rows of the state tokens in a contexts matrix, step-major.
  Var<S> state_contexts(const Var<S>& all, const SequenceLayout& layout, Index batch) const;

  Var<S> represent_history(Tape<S>& tape, ReprStores<S>& stores, const History<S>& history) const override;
  bool uses_history() const override { return ablation_.factors().context_embedding; }

 protected:
  void init_heads(ReprStores<S>& stores, Rng& rng) const override;

 private:
  Var<S> token_rows(const Var<S>& all, const SequenceLayout& layout, Index batch, TokenStream s) const;

  AblationConfig ablation_;
  MaskRates rates_;
  Transformer<S> trunk_;
  ReprNet<S> target_;
  std::array<Linear<S>, kNumStreams> proj_;
  Mlp<S> momentum_f_;
  TanhGaussianHead<S> predict_action_head_;
  Linear<S> predict_reward_head_;
  TanhGaussianHead<S> reconstruct_action_head_;
  Mlp<S> reconstruct_reward_head_;
};

// Objective registry over every pretraining objective name. For "acl" the
// window, representation size and discrete flag come from the ablation
// config; `trunk` overrides the default transformer.
template <typename S>
std::unique_ptr<Objective<S>> make_objective(const std::string& name, ObjectiveConfig cfg,
                                             const AblationConfig& ablation = AblationConfig{},
                                             const TransformerSpec* trunk = nullptr);

extern template class AclObjective<float>;
extern template class AclObjective<double>;

}  // namespace orpl
