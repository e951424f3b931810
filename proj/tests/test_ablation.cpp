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

#include <cmath>

#include "doctest.h"
#include "orpl/numerics/grad_check.hpp"
#include "support.hpp"

using namespace orpl;
using Md = Matrix<double>;
using testing::micro_trunk;
using testing::random_batch;
using testing::small_config;

namespace {

std::unique_ptr<AclObjective<double>> make_acl(const AblationFactors& f, Index window, Index d = 4) {
  ObjectiveConfig c = small_config("acl", window);
  const TransformerSpec t = micro_trunk(window);
  auto base = make_objective<double>("acl", c, AblationConfig(f, window, d), &t);
  return std::unique_ptr<AclObjective<double>>(dynamic_cast<AclObjective<double>*>(base.release()));
}

void set_label(MaskPlan& p, TokenStream s, Index b, Index i, MaskLabel l, Index donor = 0) {
  p.labels[static_cast<int>(s)](b, i) = static_cast<std::uint8_t>(l);
  p.donor[static_cast<int>(s)](b, i) = donor;
}

double grad_error(const AclObjective<double>& obj, ReprStores<double>& stores, const SubTrajectoryBatch<double>& b) {
  auto loss = [&](bool g) {
    Tape<double> t;
    Rng r = make_rng(17, Stream::kPretrain, 0);
    auto out = obj.loss(t, stores, b, r);
    if (g) t.backward(out.loss);
    return out.loss.item();
  };
  auto trainable = stores.trainable();
  const auto rep = grad_check(loss, trainable);
  CAPTURE(rep.worst_parameter);
  return rep.max_relative_error;
}

}  // namespace

TEST_CASE("ablation defaults") {
  const AblationConfig c;
  const auto& f = c.factors();
  CHECK(f.input_action);
  CHECK(f.input_reward);
  for (const auto& n : AblationFactors::names())
    if (n != "input_action" && n != "input_reward") CHECK_FALSE(f[n]);
  CHECK(AblationFactors::names().size() == 13);
  CHECK(c.k_plus_1() == 8);
  CHECK(c.repr_dim() == 256);
  CHECK_FALSE(c.normalized());
  CHECK(c.describe() == "default");
}

TEST_CASE("ablation closure switches input_embed on and records it") {
  for (const char* name : {"predict_action", "predict_reward", "momentum", "context_embedding"}) {
    CAPTURE(name);
    AblationFactors f;
    f[name] = true;
    const AblationConfig c(f);
    CHECK(c.factors().input_embed);
    REQUIRE(c.normalized_by().size() == 1);
    CHECK(c.normalized_by()[0] == name);
    f.input_embed = true;
    CHECK_FALSE(AblationConfig(f).normalized());
  }
  for (const char* name : {"reconstruct_action", "reconstruct_reward", "bidirectional", "finetune",
                           "auxiliary_loss", "discrete_embedding"}) {
    AblationFactors f;
    f[name] = true;
    CHECK_FALSE(AblationConfig(f).factors().input_embed);
  }
}

TEST_CASE("ablation section parsing") {
  auto c = AblationConfig::from_section({{"momentum", "true"}, {"input_reward", "false"}, {"k_plus_1", "4"}});
  CHECK(c.factors().momentum);
  CHECK(c.factors().input_embed);
  CHECK_FALSE(c.factors().input_reward);
  CHECK(c.k_plus_1() == 4);
  CHECK(AblationConfig::from_section(c.to_section()).factors() == c.factors());
  CHECK_THROWS_AS(AblationConfig::from_section({{"momentun", "true"}}), ConfigurationError);
  CHECK_THROWS_AS(AblationConfig::from_section({{"momentum", "maybe"}}), ConfigurationError);
  CHECK_THROWS_AS(AblationConfig::from_section({{"k_plus_1", "0"}}), ConfigurationError);
  CHECK_THROWS_AS(AblationConfig::from_section({{"repr_dim", "8x"}}), ConfigurationError);
}

TEST_CASE("input sequence token counts") {
  AblationFactors f;
  f.input_action = false;
  f.input_reward = false;
  CHECK(sequence_layout(AblationConfig(f), 8).num_tokens() == 8);
  const auto l = sequence_layout(AblationConfig{}, 8);
  CHECK(l.num_tokens() == 24);
  CHECK(l.token_index(0, TokenStream::kState) == 0);
  CHECK(l.token_index(0, TokenStream::kAction) == 1);
  CHECK(l.token_index(0, TokenStream::kReward) == 2);
  CHECK(l.token_index(7, TokenStream::kState) == 21);
  const auto pos = l.positions();
  CHECK(pos.size() == 24);
  CHECK(pos[23] == 7);
  CHECK(pos[3] == 1);
  f.input_reward = true;
  CHECK(sequence_layout(AblationConfig(f), 8).token_index(2, TokenStream::kAction) == -1);
}

TEST_CASE("input_embed changes the state token width") {
  auto batch = random_batch(3, 4, 3, 2, 1);
  for (bool embed : {false, true}) {
    AblationFactors f;
    f.input_embed = embed;
    auto acl = make_acl(f, 4, 5);
    ReprStores<double> stores;
    Rng rng = make_rng(1, Stream::kInit, 0);
    acl->init(stores, rng);
    Tape<double> t;
    Rng r = make_rng(2, Stream::kPretrain, 0);
    auto phi = acl->embed_window(t, stores, batch, nullptr);
    auto seq = acl->build_input_sequence(t, stores, batch, untouched_plan(3, 4), phi);
    CHECK(seq.items[0][0].cols() == (embed ? 5 : 3));
    CHECK(acl->state_token_dim() == (embed ? 5 : 3));
    CHECK(seq.tokens.rows() == 12 * 3);
    CHECK(seq.tokens.cols() == 6);
    (void)r;
  }
}

TEST_CASE("token masking agrees with value-level masking") {
  AblationFactors f;
  auto acl = make_acl(f, 4);
  ReprStores<double> stores;
  Rng rng = make_rng(3, Stream::kInit, 0);
  acl->init(stores, rng);
  auto batch = random_batch(6, 4, 3, 2, 9);
  Rng prng = make_rng(4, Stream::kPretrain, 0);
  const MaskPlan plan = sample_mask_plan(6, 4, prng);
  Tape<double> t;
  auto seq = acl->build_input_sequence(t, stores, batch, plan, {});
  const auto masked = apply_mask(batch, plan, true);
  std::array<Md, kNumStreams> tokens = {stores.heads.value("acl/drop/state"), stores.heads.value("acl/drop/action"),
                                        stores.heads.value("acl/drop/reward")};
  const auto expected = substitute_drop_tokens(masked, tokens);
  for (int s = 0; s < kNumStreams; ++s)
    for (Index i = 0; i < 4; ++i) CHECK(seq.items[s][i].value() == expected[s][i]);
}

TEST_CASE("acl loss with identical candidates is log of the candidate count") {
  auto acl = make_acl(AblationFactors{}, 1);
  ReprStores<double> stores;
  Rng rng = make_rng(5, Stream::kInit, 0);
  acl->init(stores, rng);
  auto batch = random_batch(5, 1, 3, 2, 2);
  for (Index b = 1; b < 5; ++b) batch.states[0].row(b) = batch.states[0].row(0);
  MaskPlan plan = untouched_plan(5, 1);
  set_label(plan, TokenStream::kState, 2, 0, MaskLabel::kDrop);
  Tape<double> t;
  auto out = acl->loss_with_plan(t, stores, batch, plan, rng);
  CHECK(out.loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(out.diagnostics.at("masked_states") == 1.0);
}

TEST_CASE("acl with nothing masked is starved and zero") {
  auto acl = make_acl(AblationFactors{}, 4);
  ReprStores<double> stores;
  Rng rng = make_rng(5, Stream::kInit, 0);
  acl->init(stores, rng);
  Tape<double> t;
  auto out = acl->loss_with_plan(t, stores, random_batch(3, 4, 3, 2, 5), untouched_plan(3, 4), rng);
  CHECK(out.loss.item() == 0.0);
  CHECK(out.flag("starved"));
}

TEST_CASE("default ablation loss equals the plain acl loss") {
  auto acl = make_acl(AblationFactors{}, 4);
  ReprStores<double> stores;
  Rng rng = make_rng(5, Stream::kInit, 0);
  acl->init(stores, rng);
  auto batch = random_batch(4, 4, 3, 2, 6);
  Rng prng = make_rng(6, Stream::kPretrain, 0);
  MaskPlan plan = sample_mask_plan(4, 4, prng);
  for (int s : {1, 2}) plan.labels[s].setZero();

  Tape<double> t;
  Rng r1 = make_rng(1, Stream::kPretrain, 1);
  const double full = acl->loss_with_plan(t, stores, batch, plan, r1).loss.item();

  Tape<double> u;
  auto phi = acl->embed_window(u, stores, batch, nullptr);
  auto seq = acl->build_input_sequence(u, stores, batch, plan, phi);
  auto ctx = acl->state_contexts(acl->contexts(u, stores, seq), seq.layout, 4);
  std::vector<Index> rows;
  for (Index i = 0; i < 4; ++i)
    for (Index b = 0; b < 4; ++b)
      if (plan.label(TokenStream::kState, b, i) != MaskLabel::kUntouched) rows.push_back(i * 4 + b);
  const double plain = acl_loss(ctx, concat_rows(phi), u.param(stores.heads, "acl/W"), rows).item();
  CHECK(full == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("ablation gradients match finite differences") {
  std::vector<AblationFactors> configs(1);
  Rng pick = make_rng(2024, Stream::kInit, 7);
  for (int c = 0; c < 4; ++c) {
    AblationFactors f;
    for (const auto& n : AblationFactors::names()) f[n] = uniform_int(pick, 0, 1) == 1;
    f.discrete_embedding = false;  // sampled codes have no finite-difference derivative
    configs.push_back(f);
  }
  AblationFactors all;
  for (const char* n : {"reconstruct_action", "reconstruct_reward", "predict_action", "predict_reward", "momentum",
                        "bidirectional"})
    all[n] = true;
  configs.push_back(all);
  for (const auto& f : configs) {
    const AblationConfig cfg(f, 4, 4);
    CAPTURE(cfg.describe());
    auto acl = make_acl(f, 4);
    ReprStores<double> stores;
    Rng rng = make_rng(8, Stream::kInit, 0);
    acl->init(stores, rng);
    // Zero-initialized biases put unavailable (all-zero) tokens exactly on a
    // ReLU kink; move to a generic point first.
    for (auto& [k, e] : stores.heads.entries()) e.value += randn<double>(e.value.rows(), e.value.cols(), rng) * 0.05;
    CHECK(grad_error(*acl, stores, random_batch(4, 4, 3, 2, 12)) < 1e-4);
  }
}

TEST_CASE("causal contexts ignore later tokens, bidirectional ones do not") {
  for (bool bidir : {false, true}) {
    AblationFactors f;
    f.bidirectional = bidir;
    auto acl = make_acl(f, 4);
    ReprStores<double> stores;
    Rng rng = make_rng(1, Stream::kInit, 0);
    acl->init(stores, rng);
    auto batch = random_batch(3, 4, 3, 2, 3);
    Tape<double> t;
    auto seq = acl->build_input_sequence(t, stores, batch, untouched_plan(3, 4), {});
    const Md before = acl->contexts(t, stores, seq).value();
    const Index p = 4, B = 3;
    Md zeroed = seq.tokens.value();
    zeroed.bottomRows(zeroed.rows() - (p + 1) * B).setZero();
    InputSequence<double> cut = seq;
    cut.tokens = t.constant(zeroed);
    const Md after = acl->contexts(t, stores, cut).value();
    const bool same = before.topRows((p + 1) * B) == after.topRows((p + 1) * B);
    CHECK(same == !bidir);
  }
}

TEST_CASE("disabled terms contribute nothing to shared gradients") {
  auto batch = random_batch(4, 4, 3, 2, 13);
  Rng prng = make_rng(2, Stream::kPretrain, 0);
  const MaskPlan plan = sample_mask_plan(4, 4, prng);
  for (const char* factor : {"reconstruct_reward", "predict_reward"}) {
    CAPTURE(factor);
    AblationFactors on;
    on[factor] = true;
    on.input_embed = true;
    AblationFactors off;
    off.input_embed = true;
    std::map<std::string, Md> grads[2];
    int slot = 0;
    for (const auto& f : {on, off}) {
      auto acl = make_acl(f, 4);
      ReprStores<double> stores;
      Rng rng = make_rng(3, Stream::kInit, 0);
      acl->init(stores, rng);
      for (auto* s : stores.all()) s->zero_grad();
      Tape<double> t;
      Rng r = make_rng(3, Stream::kPretrain, 0);
      auto out = acl->loss_with_plan(t, stores, batch, plan, r);
      t.backward(out.loss);
      for (const auto& [k, e] : stores.phi.entries()) grads[slot]["phi/" + k] = e.grad;
      for (const auto& [k, e] : stores.heads.entries())
        if (k.rfind("acl/trunk", 0) == 0 || k.rfind("acl/proj", 0) == 0) grads[slot][k] = e.grad;
      ++slot;
    }
    REQUIRE(grads[0].size() == grads[1].size());
    for (const auto& [k, g] : grads[1]) CHECK(grads[0].at(k) == g);
  }
}

TEST_CASE("momentum acl keeps the target out of the gradient") {
  AblationFactors f;
  f.momentum = true;
  auto acl = make_acl(f, 4);
  ReprStores<double> stores;
  Rng rng = make_rng(3, Stream::kInit, 0);
  acl->init(stores, rng);
  for (auto* s : stores.all()) s->zero_grad();
  Tape<double> t;
  t.backward(acl->loss(t, stores, random_batch(4, 4, 3, 2, 2), rng).loss);
  for (const auto& [k, e] : stores.target.entries()) CHECK(e.grad.isZero(0.0));
  for (auto& [k, e] : stores.target.entries()) e.value.setZero();
  for (auto& [k, e] : stores.phi.entries()) e.value.setOnes();
  acl->after_update(stores);
  for (const auto& [k, e] : stores.target.entries()) CHECK(e.value.isApproxToConstant(0.05, 1e-15));
}

TEST_CASE("downstream representation hand-off") {
  auto batch = random_batch(2, 4, 3, 2, 4);
  SUBCASE("phi by default") {
    auto acl = make_acl(AblationFactors{}, 4, 8);
    ReprStores<double> stores;
    Rng rng = make_rng(3, Stream::kInit, 0);
    acl->init(stores, rng);
    Tape<double> t;
    auto z = acl->represent(t, stores, t.constant(batch.states[0]));
    CHECK(z.cols() == 8);
    CHECK_FALSE(acl->uses_history());
  }
  SUBCASE("discrete codes are deterministic one-hot blocks") {
    AblationFactors f;
    f.discrete_embedding = true;
    auto acl = make_acl(f, 4, 16);
    ReprStores<double> stores;
    Rng rng = make_rng(3, Stream::kInit, 0);
    acl->init(stores, rng);
    Tape<double> t;
    const Md z1 = acl->represent(t, stores, t.constant(batch.states[0])).value();
    const Md z2 = acl->represent(t, stores, t.constant(batch.states[0])).value();
    CHECK(z1 == z2);
    for (Index b = 0; b < 2; ++b) CHECK(z1.row(b).sum() == 4.0);
    CHECK((z1.array() * (1.0 - z1.array())).isZero(0.0));
    CHECK(discrete_block_count(256) == 16);
  }
  SUBCASE("context embedding reads the transformer") {
    AblationFactors f;
    f.context_embedding = true;
    auto acl = make_acl(f, 4);
    ReprStores<double> stores;
    Rng rng = make_rng(3, Stream::kInit, 0);
    acl->init(stores, rng);
    CHECK(acl->uses_history());
    History<double> h;
    h.states.push_back(batch.states[0]);
    Tape<double> t;
    auto cold = acl->represent_history(t, stores, h);
    CHECK(cold.rows() == 2);
    CHECK(cold.cols() == 4);
    CHECK(cold.value().allFinite());

    // A history longer than k+1 only uses its trailing window.
    History<double> longer, trimmed;
    for (Index i = 0; i < 6; ++i) {
      longer.states.push_back(random_batch(2, 1, 3, 2, 40 + i).states[0]);
      if (i < 5) {
        longer.actions.push_back(Md::Constant(2, 2, 0.1 * i));
        longer.rewards.push_back(Md::Constant(2, 1, 0.2 * i));
      }
    }
    trimmed.states.assign(longer.states.begin() + 2, longer.states.end());
    trimmed.actions.assign(longer.actions.begin() + 2, longer.actions.end());
    trimmed.rewards.assign(longer.rewards.begin() + 2, longer.rewards.end());
    CHECK(acl->represent_history(t, stores, longer).value() == acl->represent_history(t, stores, trimmed).value());
    trimmed.actions.pop_back();
    CHECK_THROWS_AS(acl->represent_history(t, stores, trimmed), DimensionError);
  }
}

TEST_CASE("discrete training codes are sampled") {
  AblationFactors f;
  f.discrete_embedding = true;
  auto acl = make_acl(f, 2, 16);
  ReprStores<double> stores;
  Rng rng = make_rng(3, Stream::kInit, 0);
  acl->init(stores, rng);
  auto batch = random_batch(16, 2, 3, 2, 4);
  Tape<double> t;
  Rng a = make_rng(1, Stream::kPretrain, 0), b = make_rng(2, Stream::kPretrain, 0);
  const Md za = acl->phi().forward(t, stores.phi, t.constant(batch.states[0]), &a).value();
  const Md zb = acl->phi().forward(t, stores.phi, t.constant(batch.states[0]), &b).value();
  CHECK(za != zb);
}

TEST_CASE("straight-through sampling statistics") {
  Rng rng = make_rng(77, Stream::kPretrain, 0);
  Md logits(1, 8);
  logits << 0.3, -1.0, 1.2, 0.0, 2.0, -0.5, 0.5, 0.1;
  Md probs(1, 8);
  for (int blk = 0; blk < 2; ++blk) {
    const auto l = logits.middleCols(4 * blk, 4).array();
    probs.middleCols(4 * blk, 4) = (l.exp() / l.exp().sum()).matrix();
  }
  const int n = 100000;
  Md counts = Md::Zero(1, 8);
  for (int i = 0; i < n; ++i) {
    const auto c = choose_blocks<double>(logits, 2, &rng);
    counts(0, c(0, 0)) += 1;
    counts(0, 4 + c(0, 1)) += 1;
  }
  for (Index j = 0; j < 8; ++j) CHECK(std::abs(counts(0, j) / n - probs(0, j)) < 0.01);

  Md saturated = Md::Zero(1, 8);
  saturated(0, 2) = 1e6;
  saturated(0, 5) = 1e6;
  for (int i = 0; i < 100; ++i) {
    const auto c = choose_blocks<double>(saturated, 2, &rng);
    CHECK(c(0, 0) == 2);
    CHECK(c(0, 1) == 1);
  }

  ParamStore<double> ps("st");
  ps.add("l", logits);
  ps.zero_grad();
  Tape<double> t;
  auto y = straight_through_sample(t.param(ps, "l"), 2, &rng);
  t.backward(sum(mul(y, t.constant(Md(Eigen::RowVectorXd::LinSpaced(8, 1.0, 8.0))))));
  CHECK(ps.grad("l").norm() > 0.0);
  Tape<double> u;
  const Md argmax1 = straight_through_sample(u.constant(logits), 2, nullptr).value();
  const Md argmax2 = straight_through_sample(u.constant(logits), 2, nullptr).value();
  CHECK(argmax1 == argmax2);
  CHECK(argmax1(0, 2) == 1.0);
  CHECK(argmax1(0, 4) == 1.0);
}

TEST_CASE("objective registry") {
  for (const auto& name : objective_names()) {
    CAPTURE(name);
    const TransformerSpec t = micro_trunk(8);
    auto obj = make_objective<double>(name, small_config(name, 3), AblationConfig(AblationFactors{}, 8, 4), &t);
    CHECK(obj->config().name == name);
    ReprStores<double> stores;
    Rng rng = make_rng(1, Stream::kInit, 0);
    obj->init(stores, rng);
    Tape<double> tape;
    auto out = obj->loss(tape, stores, random_batch(3, obj->config().window, 3, 2, 3), rng);
    CHECK(std::isfinite(out.loss.item()));
  }
  CHECK_THROWS_AS(make_objective<double>("curl", small_config("curl", 2)), ConfigurationError);
  CHECK(make_objective<double>("tcl", small_config("tcl", 2))->learning_rate() == 3e-4);
  CHECK(make_objective<double>("vpn", small_config("vpn", 2))->learning_rate() == 1e-4);
}
