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

#include "orpl/ablation/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "orpl/numerics/errors.hpp"

namespace orpl {

namespace {

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigurationError("ablation." + key + ": expected a boolean, got '" + value + "'");
}

Index parse_positive(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || n <= 0)
    throw ConfigurationError("ablation." + key + ": expected a positive integer, got '" + value + "'");
  return static_cast<Index>(n);
}

}  // namespace

const std::vector<std::string>& AblationFactors::names() {
  static const std::vector<std::string> n = {
      "reconstruct_action", "reconstruct_reward", "predict_action", "predict_reward", "input_action",
      "input_reward",       "input_embed",        "bidirectional",  "finetune",       "auxiliary_loss",
      "momentum",           "discrete_embedding", "context_embedding"};
  return n;
}

bool& AblationFactors::operator[](const std::string& name) {
  if (name == "reconstruct_action") return reconstruct_action;
  if (name == "reconstruct_reward") return reconstruct_reward;
  if (name == "predict_action") return predict_action;
  if (name == "predict_reward") return predict_reward;
  if (name == "input_action") return input_action;
  if (name == "input_reward") return input_reward;
  if (name == "input_embed") return input_embed;
  if (name == "bidirectional") return bidirectional;
  if (name == "finetune") return finetune;
  if (name == "auxiliary_loss") return auxiliary_loss;
  if (name == "momentum") return momentum;
  if (name == "discrete_embedding") return discrete_embedding;
  if (name == "context_embedding") return context_embedding;
  throw ConfigurationError("unknown ablation factor '" + name + "'");
}

bool AblationFactors::operator[](const std::string& name) const {
  return (*const_cast<AblationFactors*>(this))[name];
}

AblationConfig::AblationConfig(AblationFactors factors, Index k_plus_1, Index repr_dim)
    : factors_(factors), k_plus_1_(k_plus_1), repr_dim_(repr_dim) {
  if (k_plus_1 < 1) throw ConfigurationError("k_plus_1 must be at least 1");
  if (repr_dim < 1) throw ConfigurationError("repr_dim must be positive");
  for (const char* f : {"predict_action", "predict_reward", "momentum", "context_embedding"}) {
    if (factors_[f] && !factors_.input_embed) normalized_by_.push_back(f);
  }
  if (!normalized_by_.empty()) factors_.input_embed = true;
}

AblationConfig AblationConfig::from_section(const std::map<std::string, std::string>& section) {
  AblationFactors f;
  Index k = 8, d = 256;
  for (const auto& [key, value] : section) {
    if (key == "k_plus_1") {
      k = parse_positive(key, value);
    } else if (key == "repr_dim") {
      d = parse_positive(key, value);
    } else {
      f[key] = parse_bool(key, value);
    }
  }
  return AblationConfig(f, k, d);
}

std::map<std::string, std::string> AblationConfig::to_section() const {
  std::map<std::string, std::string> out;
  for (const auto& n : AblationFactors::names()) out[n] = factors_[n] ? "true" : "false";
  out["k_plus_1"] = std::to_string(k_plus_1_);
  out["repr_dim"] = std::to_string(repr_dim_);
  return out;
}

std::string AblationConfig::describe() const {
  const AblationConfig defaults(AblationFactors{}, k_plus_1_, repr_dim_);
  std::ostringstream os;
  bool first = true;
  for (const auto& n : AblationFactors::names()) {
    if (factors_[n] == defaults.factors()[n]) continue;
    os << (first ? "" : ",") << n << "=" << (factors_[n] ? "T" : "F");
    first = false;
  }
  if (first) os << "default";
  return os.str();
}

Index discrete_block_count(Index repr_dim) {
  if (repr_dim == 256) return 16;
  Index b = static_cast<Index>(std::floor(std::sqrt(static_cast<double>(repr_dim))));
  while (b > 1 && repr_dim % b != 0) --b;
  return std::max<Index>(b, 1);
}

Index SequenceLayout::token_index(Index step, TokenStream s) const {
  for (Index j = 0; j < tokens_per_step(); ++j)
    if (streams[static_cast<std::size_t>(j)] == s) return step * tokens_per_step() + j;
  return -1;
}

std::vector<Index> SequenceLayout::positions() const {
  std::vector<Index> p;
  for (Index i = 0; i < window; ++i)
    for (Index j = 0; j < tokens_per_step(); ++j) p.push_back(i);
  return p;
}

SequenceLayout sequence_layout(const AblationConfig& cfg, Index window) {
  SequenceLayout l;
  l.window = window;
  l.streams.push_back(TokenStream::kState);
  if (cfg.factors().input_action) l.streams.push_back(TokenStream::kAction);
  if (cfg.factors().input_reward) l.streams.push_back(TokenStream::kReward);
  return l;
}

TransformerSpec acl_trunk_spec(Index repr_dim, Index window) {
  TransformerSpec t;
  t.input_dim = 256;
  t.preprocess_dim = 256;
  t.num_heads = 4;
  t.head_dim = 128;
  t.ff_dim = 256;
  t.output_dim = repr_dim;
  t.max_positions = window;
  return t;
}

template <typename S>
Var<S> acl_loss(const Var<S>& contexts, const Var<S>& keys, const Var<S>& w, const std::vector<Index>& rows) {
  Tape<S>& t = contexts.tape();
  if (rows.empty()) return t.constant(S(0));
  if (contexts.rows() != keys.rows()) throw DimensionError("acl_loss: contexts and keys differ in row count");
  Var<S> q = gather_rows(contexts, rows);
  Var<S> logits = matmul(matmul(q, transpose(w)), transpose(keys));
  Matrix<S> onehot = Matrix<S>::Zero(static_cast<Index>(rows.size()), keys.rows());
  for (std::size_t r = 0; r < rows.size(); ++r) onehot(static_cast<Index>(r), rows[r]) = S(1);
  Var<S> positive = row_sum(mul(logits, t.constant(std::move(onehot))));
  return mean(sub(logsumexp_rows(logits), positive));
}

// ACL ----------------------------------------------------------------------

template <typename S>
AclObjective<S>::AclObjective(ObjectiveConfig cfg, AblationConfig ablation, TransformerSpec trunk, MaskRates rates)
    : Objective<S>(std::move(cfg)), ablation_(std::move(ablation)), rates_(rates) {
  const auto& c = this->cfg_;
  const auto& f = ablation_.factors();
  if (c.window != ablation_.k_plus_1() || c.repr_dim != ablation_.repr_dim() || c.discrete != f.discrete_embedding)
    throw ConfigurationError("acl objective config disagrees with its ablation config");
  trunk.output_dim = c.repr_dim;
  trunk.causal = !f.bidirectional;
  trunk.max_positions = std::max(trunk.max_positions, c.window);
  trunk_ = Transformer<S>(trunk, "acl/trunk");
  target_ = ReprNet<S>(c.repr_spec(), "phi");
  proj_[0] = Linear<S>("acl/proj/state", state_token_dim(), trunk.input_dim);
  proj_[1] = Linear<S>("acl/proj/action", c.action_dim, trunk.input_dim);
  proj_[2] = Linear<S>("acl/proj/reward", 1, trunk.input_dim);
  momentum_f_ = Mlp<S>(MLPSpec{c.repr_dim, c.head_hidden, c.repr_dim, c.activation}, "acl/momentum_f");
  predict_action_head_ = TanhGaussianHead<S>(c.repr_dim, c.action_dim, {}, c.activation, "acl/predict_action");
  predict_reward_head_ = Linear<S>("acl/predict_reward", c.repr_dim, 1);
  reconstruct_action_head_ =
      TanhGaussianHead<S>(c.repr_dim, c.action_dim, c.head_hidden, c.activation, "acl/reconstruct_action");
  reconstruct_reward_head_ =
      Mlp<S>(MLPSpec{c.repr_dim, c.head_hidden, 1, c.activation}, "acl/reconstruct_reward");
}

template <typename S>
Index AclObjective<S>::state_token_dim() const {
  return ablation_.factors().input_embed ? this->cfg_.repr_dim : this->cfg_.state_dim;
}

namespace {
const char* const kDropKeys[kNumStreams] = {"acl/drop/state", "acl/drop/action", "acl/drop/reward"};
}

template <typename S>
void AclObjective<S>::init_heads(ReprStores<S>& stores, Rng& rng) const {
  const auto& c = this->cfg_;
  const auto& f = ablation_.factors();
  const SequenceLayout layout = sequence_layout(ablation_, c.window);
  for (TokenStream s : layout.streams) {
    const auto& p = proj_[static_cast<std::size_t>(s)];
    p.init(stores.heads, rng);
    stores.heads.add(kDropKeys[static_cast<int>(s)], Matrix<S>(randn<S>(1, p.in_dim(), rng) * S(0.02)));
  }
  trunk_.init(stores.heads, rng);
  stores.heads.add("acl/W", Matrix<S>(randn<S>(c.repr_dim, c.repr_dim, rng) /
                                      static_cast<S>(std::sqrt(static_cast<double>(c.repr_dim)))));
  if (f.momentum) {
    momentum_f_.init(stores.heads, rng);
    momentum_f_.zero_output_layer(stores.heads);
    for (const auto& [k, e] : stores.phi.entries()) stores.target.add(k, e.value);
  }
  if (f.predict_action) predict_action_head_.init(stores.heads, stores.temperature, rng);
  if (f.predict_reward) {
    predict_reward_head_.init(stores.heads, rng);
    predict_reward_head_.zero(stores.heads);
  }
  if (f.reconstruct_action) reconstruct_action_head_.init(stores.heads, stores.temperature, rng);
  if (f.reconstruct_reward) {
    reconstruct_reward_head_.init(stores.heads, rng);
    reconstruct_reward_head_.zero_output_layer(stores.heads);
  }
}

template <typename S>
InputSequence<S> AclObjective<S>::build_input_sequence(Tape<S>& tape, ReprStores<S>& stores,
                                                        const SubTrajectoryBatch<S>& batch, const MaskPlan& plan,
                                                        const std::vector<Var<S>>& phi) const {
  const Index B = batch.batch, W = batch.window;
  if (plan.batch != B || plan.window != W) throw DimensionError("mask plan does not match the batch shape");
  InputSequence<S> seq;
  seq.layout = sequence_layout(ablation_, W);
  seq.batch = B;
  const bool embed = ablation_.factors().input_embed;
  if (embed && static_cast<Index>(phi.size()) != W) throw DimensionError("one phi embedding per step expected");

  for (TokenStream s : seq.layout.streams) {
    const int si = static_cast<int>(s);
    Var<S> token = tape.param(stores.heads, kDropKeys[si]);
    for (Index i = 0; i < W; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      Var<S> x = s == TokenStream::kState ? (embed ? phi[ui] : tape.constant(batch.states[ui]))
                 : s == TokenStream::kAction ? tape.constant(batch.actions[ui])
                                             : tape.constant(batch.rewards[ui]);
      std::vector<Index> idx(static_cast<std::size_t>(B));
      Matrix<S> keep = Matrix<S>::Ones(B, 1), drop = Matrix<S>::Zero(B, 1);
      bool switched = false;
      for (Index b = 0; b < B; ++b) {
        idx[static_cast<std::size_t>(b)] = b;
        const bool available = s == TokenStream::kState || i < W - 1 || batch.tail_valid(b, 0) != S(0);
        if (!available) {
          keep(b, 0) = 0;
          continue;
        }
        switch (plan.label(s, b, i)) {
          case MaskLabel::kDrop:
            keep(b, 0) = 0;
            drop(b, 0) = 1;
            break;
          case MaskLabel::kSwitch:
            idx[static_cast<std::size_t>(b)] = plan.donor[si](b, i);
            switched = true;
            break;
          default:
            break;
        }
      }
      Var<S> g = switched ? gather_rows(x, idx) : x;
      Var<S> masked = mul(g, tape.constant(std::move(keep)));
      if (!drop.isZero()) masked = add(masked, matmul(tape.constant(std::move(drop)), token));
      seq.items[static_cast<std::size_t>(si)].push_back(masked);
    }
  }

  std::vector<Var<S>> tokens;
  for (Index i = 0; i < W; ++i)
    for (TokenStream s : seq.layout.streams) {
      const auto si = static_cast<std::size_t>(s);
      tokens.push_back(proj_[si].forward(tape, stores.heads, seq.items[si][static_cast<std::size_t>(i)]));
    }
  seq.tokens = concat_rows(tokens);
  return seq;
}

template <typename S>
Var<S> AclObjective<S>::contexts(Tape<S>& tape, ReprStores<S>& stores, const InputSequence<S>& seq) const {
  const auto pos = seq.layout.positions();
  return trunk_.forward(tape, stores.heads, seq.tokens, seq.layout.num_tokens(), seq.batch, pos,
                        !ablation_.factors().bidirectional);
}

template <typename S>
Var<S> AclObjective<S>::token_rows(const Var<S>& all, const SequenceLayout& layout, Index batch,
                                   TokenStream s) const {
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(layout.window * batch));
  for (Index i = 0; i < layout.window; ++i) {
    const Index l = layout.token_index(i, s);
    for (Index b = 0; b < batch; ++b) rows.push_back(l * batch + b);
  }
  return gather_rows(all, rows);
}

template <typename S>
Var<S> AclObjective<S>::state_contexts(const Var<S>& all, const SequenceLayout& layout, Index batch) const {
  if (layout.tokens_per_step() == 1) return all;
  return token_rows(all, layout, batch, TokenStream::kState);
}

template <typename S>
ObjectiveOutput<S> AclObjective<S>::loss(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                         Rng& rng) const {
  const MaskPlan plan = sample_mask_plan(batch.batch, batch.window, rng, rates_);
  return loss_with_plan(tape, stores, batch, plan, rng);
}

template <typename S>
ObjectiveOutput<S> AclObjective<S>::loss_with_plan(Tape<S>& tape, ReprStores<S>& stores,
                                                   const SubTrajectoryBatch<S>& batch, const MaskPlan& plan,
                                                   Rng& rng) const {
  const auto& f = ablation_.factors();
  const Index B = batch.batch, W = batch.window;
  if (W < 1 || W > trunk_.spec().max_positions) throw WindowError("acl window exceeds the transformer positions");
  auto phi = this->embed_window(tape, stores, batch, this->cfg_.discrete ? &rng : nullptr);
  const MaskedBatch<S> flags = apply_mask(batch, plan, true);
  const InputSequence<S> seq = build_input_sequence(tape, stores, batch, plan, phi);
  const Var<S> ctx = contexts(tape, stores, seq);

  ObjectiveOutput<S> out;
  auto predicted_rows = [&](TokenStream s) {
    std::vector<Index> rows;
    const auto& p = flags.predicted[static_cast<std::size_t>(s)];
    for (Index i = 0; i < W; ++i)
      for (Index b = 0; b < B; ++b)
        if (p[static_cast<std::size_t>(i)](b, 0) != S(0)) rows.push_back(i * B + b);
    return rows;
  };

  // State contrastive term.
  Var<S> query = state_contexts(ctx, seq.layout, B);
  Var<S> keys;
  if (f.momentum) {
    if (stores.target.num_scalars() != stores.phi.num_scalars())
      throw ConfigurationError("momentum target does not match phi");
    tape.freeze(stores.target);
    query = add(query, momentum_f_.forward(tape, stores.heads, query));
    std::vector<Var<S>> states;
    for (const auto& s : batch.states) states.push_back(tape.constant(s));
    keys = target_.forward(tape, stores.target, concat_rows(states), nullptr);
  } else {
    keys = concat_rows(phi);
  }
  const auto state_rows = predicted_rows(TokenStream::kState);
  Var<S> total = acl_loss(query, keys, tape.param(stores.heads, "acl/W"), state_rows);
  out.terms["state_contrastive"] = static_cast<double>(total.item());
  out.diagnostics["masked_states"] = static_cast<double>(state_rows.size());
  out.diagnostics["starved"] = state_rows.empty() ? 1.0 : 0.0;

  if (f.reconstruct_action) {
    auto t = reconstruct_action_term(tape, stores, reconstruct_action_head_, phi, batch, rng);
    total = add(total, t.loss);
    out.terms["reconstruct_action"] = t.terms["action_nll"];
    out.diagnostics["clamped_actions"] += t.diagnostics["clamped_actions"];
  }
  if (f.reconstruct_reward) {
    auto t = reconstruct_reward_term(tape, stores, reconstruct_reward_head_, phi, batch);
    total = add(total, t.loss);
    out.terms["reconstruct_reward"] = t.terms["reward_mse"];
  }
  if (f.predict_action) {
    const auto rows = predicted_rows(TokenStream::kAction);
    if (!rows.empty()) {
      const TokenStream src = f.input_action ? TokenStream::kAction : TokenStream::kState;
      Var<S> x = gather_rows(token_rows(ctx, seq.layout, B, src), rows);
      Matrix<S> target(static_cast<Index>(rows.size()), batch.action_dim());
      for (std::size_t r = 0; r < rows.size(); ++r)
        target.row(static_cast<Index>(r)) =
            batch.actions[static_cast<std::size_t>(rows[r] / B)].row(rows[r] % B);
      double clamps = 0;
      target = clamped_actions(target, clamps);
      auto dist = predict_action_head_.distribution(tape, stores.heads, x);
      auto ll = action_likelihood_loss(tape, predict_action_head_, stores.temperature, dist, target,
                                       randn<S>(target.rows(), target.cols(), rng));
      total = add(total, ll.loss);
      out.terms["predict_action"] = ll.nll;
      out.diagnostics["clamped_actions"] += clamps;
    }
  }
  if (f.predict_reward) {
    const auto rows = predicted_rows(TokenStream::kReward);
    if (!rows.empty()) {
      const TokenStream src = f.input_reward ? TokenStream::kReward : TokenStream::kState;
      Var<S> x = gather_rows(token_rows(ctx, seq.layout, B, src), rows);
      Matrix<S> target(static_cast<Index>(rows.size()), 1);
      for (std::size_t r = 0; r < rows.size(); ++r)
        target(static_cast<Index>(r), 0) = batch.rewards[static_cast<std::size_t>(rows[r] / B)](rows[r] % B, 0);
      Var<S> term = mse(predict_reward_head_.forward(tape, stores.heads, x), tape.constant(std::move(target)));
      total = add(total, term);
      out.terms["predict_reward"] = static_cast<double>(term.item());
    }
  }
  out.loss = total;
  return out;
}

template <typename S>
void AclObjective<S>::after_update(ReprStores<S>& stores) const {
  if (ablation_.factors().momentum) stores.target.ema_from(stores.phi, static_cast<S>(this->cfg_.ema_rate));
}

template <typename S>
Var<S> AclObjective<S>::represent_history(Tape<S>& tape, ReprStores<S>& stores, const History<S>& history) const {
  if (!ablation_.factors().context_embedding) return Objective<S>::represent_history(tape, stores, history);
  const Index n = static_cast<Index>(history.states.size());
  if (n == 0) throw EmptyInputError("empty observation history");
  if (static_cast<Index>(history.actions.size()) != n - 1 || static_cast<Index>(history.rewards.size()) != n - 1)
    throw DimensionError("history needs one action and reward per non-final state");
  const Index L = std::min(n, ablation_.k_plus_1());
  const Index first = n - L;
  const Index B = history.states.back().rows();
  const SequenceLayout layout = sequence_layout(ablation_, L);
  std::vector<Var<S>> tokens;
  std::vector<Index> positions;
  for (Index i = 0; i < L; ++i) {
    const auto h = static_cast<std::size_t>(first + i);
    for (TokenStream s : layout.streams) {
      if (s != TokenStream::kState && i == L - 1) break;
      Var<S> item = s == TokenStream::kState
                        ? this->phi_.forward(tape, stores.phi, tape.constant(history.states[h]), nullptr)
                    : s == TokenStream::kAction ? tape.constant(history.actions[h])
                                                : tape.constant(history.rewards[h]);
      tokens.push_back(proj_[static_cast<std::size_t>(s)].forward(tape, stores.heads, item));
      positions.push_back(i);
    }
  }
  const Index T = static_cast<Index>(tokens.size());
  Var<S> out = trunk_.forward(tape, stores.heads, concat_rows(tokens), T, B, positions,
                              !ablation_.factors().bidirectional);
  return slice_rows(out, (T - 1) * B, B);
}

// Registry -----------------------------------------------------------------

template <typename S>
std::unique_ptr<Objective<S>> make_objective(const std::string& name, ObjectiveConfig cfg,
                                             const AblationConfig& ablation, const TransformerSpec* trunk) {
  cfg.name = name;
  if (name == "inverse") return std::make_unique<InverseModel<S>>(cfg);
  if (name == "forward_raw") return std::make_unique<ForwardModel<S>>(cfg, ForwardTarget::kRaw);
  if (name == "forward_latent") return std::make_unique<ForwardModel<S>>(cfg, ForwardTarget::kLatent);
  if (name == "forward_energy") return std::make_unique<ForwardModel<S>>(cfg, ForwardTarget::kEnergy);
  if (name == "tcl") return std::make_unique<TemporalContrastive<S>>(cfg, false);
  if (name == "momentum_tcl") return std::make_unique<TemporalContrastive<S>>(cfg, true);
  if (name == "vpn") return std::make_unique<ValuePrediction<S>>(cfg);
  if (name == "bisim") return std::make_unique<Bisimulation<S>>(cfg);
  if (name == "reconstruct_action")
    return std::make_unique<Reconstruct<S>>(cfg, Reconstruct<S>::Target::kAction);
  if (name == "reconstruct_reward")
    return std::make_unique<Reconstruct<S>>(cfg, Reconstruct<S>::Target::kReward);
  if (name == "acl") {
    cfg.window = ablation.k_plus_1();
    cfg.repr_dim = ablation.repr_dim();
    cfg.discrete = ablation.factors().discrete_embedding;
    if (cfg.discrete) cfg.discrete_blocks = discrete_block_count(cfg.repr_dim);
    TransformerSpec t = trunk ? *trunk : acl_trunk_spec(cfg.repr_dim, cfg.window);
    return std::make_unique<AclObjective<S>>(cfg, ablation, t);
  }
  throw ConfigurationError("unknown objective '" + name + "'");
}

template class AclObjective<float>;
template class AclObjective<double>;
template Var<float> acl_loss(const Var<float>&, const Var<float>&, const Var<float>&, const std::vector<Index>&);
template Var<double> acl_loss(const Var<double>&, const Var<double>&, const Var<double>&, const std::vector<Index>&);
template std::unique_ptr<Objective<float>> make_objective(const std::string&, ObjectiveConfig, const AblationConfig&,
                                                          const TransformerSpec*);
template std::unique_ptr<Objective<double>> make_objective(const std::string&, ObjectiveConfig,
                                                           const AblationConfig&, const TransformerSpec*);

}  // namespace orpl
