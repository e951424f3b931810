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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only
// when every criterion passes.
//
//   acceptance [--only 1,2,9] [--workdir DIR]

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <boost/math/distributions/normal.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "orpl/ablation/ablation.hpp"
#include "orpl/data/masking.hpp"
#include "orpl/downstream/evaluate.hpp"
#include "orpl/envs/policy.hpp"
#include "orpl/harness/report.hpp"
#include "orpl/numerics/grad_check.hpp"
#include "orpl/numerics/transformer.hpp"
#include "orpl/objectives/objectives.hpp"
#include "orpl/objectives/repr_net.hpp"
#include "support.hpp"

using namespace orpl;
namespace fs = std::filesystem;
using Md = Matrix<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fix(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path g_workdir;

fs::path config_path(const std::string& name) { return fs::path(ORPL_SOURCE_DIR) / "configs" / "acceptance" / name; }

// ---------------------------------------------------------------- 1
double objective_grad_error(const Objective<double>& obj, ReprStores<double>& stores,
                            const SubTrajectoryBatch<double>& batch) {
  auto loss = [&](bool g) {
    Tape<double> t;
    Rng r = make_rng(11, Stream::kPretrain, 0);
    auto out = obj.loss(t, stores, batch, r);
    if (g) t.backward(out.loss);
    return out.loss.item();
  };
  auto trainable = stores.trainable();
  return grad_check(loss, trainable).max_relative_error;
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  int checked = 0;
  auto record = [&](const std::string& name, double err) {
    ++checked;
    if (err > worst || !std::isfinite(err)) worst = std::isfinite(err) ? err : INFINITY, worst_name = name;
  };
  const Index sd = 3, ad = 2;
  for (const auto& name : objective_names()) {
    for (Index window : {2, 4}) {
      ObjectiveConfig c = testing::small_config(name, window);
      const TransformerSpec trunk = testing::micro_trunk(window);
      auto obj = make_objective<double>(name, c, AblationConfig(AblationFactors{}, window, c.repr_dim), &trunk);
      ReprStores<double> stores;
      Rng rng = make_rng(5, Stream::kInit, window);
      obj->init(stores, rng);
      // Move zero-initialized heads off ReLU kinks hit by all-zero tokens.
      for (auto& [k, e] : stores.heads.entries()) e.value += randn<double>(e.value.rows(), e.value.cols(), rng) * 0.05;
      record(name + "/W" + std::to_string(window),
             objective_grad_error(*obj, stores, testing::random_batch(4, window, sd, ad, 21 + window)));
    }
  }
  Rng pick = make_rng(2024, Stream::kInit, 7);
  for (int i = 0; i < 4; ++i) {
    AblationFactors f;
    for (const auto& n : AblationFactors::names()) f[n] = uniform_int(pick, 0, 1) == 1;
    f.discrete_embedding = false;  // sampled codes are piecewise constant
    const Index window = 4;
    const AblationConfig cfg(f, window, 4);
    ObjectiveConfig c = testing::small_config("acl", window);
    const TransformerSpec trunk = testing::micro_trunk(window);
    auto obj = make_objective<double>("acl", c, cfg, &trunk);
    ReprStores<double> stores;
    Rng rng = make_rng(8, Stream::kInit, i);
    obj->init(stores, rng);
    for (auto& [k, e] : stores.heads.entries()) e.value += randn<double>(e.value.rows(), e.value.cols(), rng) * 0.05;
    record("acl[" + cfg.describe() + "]", objective_grad_error(*obj, stores, testing::random_batch(4, window, sd, ad, 12)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-4 && secs < 120.0, std::to_string(checked) + " losses, max rel err " + sci(worst) + " (" +
                                            worst_name + "), " + fix(secs, 1) + " s < 120 s"};
}

// ---------------------------------------------------------------- 2
double loss_value(const Objective<double>& obj, ReprStores<double>& stores, const SubTrajectoryBatch<double>& b) {
  Tape<double> t;
  Rng r = make_rng(11, Stream::kPretrain, 0);
  return obj.loss(t, stores, b, r).loss.item();
}

Outcome contrastive_closed_forms() {
  bool ok = true;
  std::ostringstream d;
  {
    Tape<double> t;
    Rng rng = make_rng(2, Stream::kInit, 0);
    const double v = info_nce_log_mean_exp(t.constant(randn<double>(6, 3, rng)), t.constant(randn<double>(6, 3, rng)),
                                           t.constant(Md::Zero(3, 3)))
                         .item();
    ok &= std::abs(v) < 1e-12;
    d << "uniform info_nce " << sci(std::abs(v));
  }
  {
    auto obj = make_objective<double>("tcl", testing::small_config("tcl", 4), AblationConfig{}, nullptr);
    ReprStores<double> stores;
    Rng rng = make_rng(5, Stream::kInit, 0);
    obj->init(stores, rng);
    for (int i = 1; i < 4; ++i) stores.heads.value("tcl/W" + std::to_string(i)).setZero();
    const double v = loss_value(*obj, stores, testing::random_batch(8, 4, 3, 2, 3));
    ok &= std::abs(v) < 1e-12;
    d << ", tcl " << sci(std::abs(v));
  }
  {
    auto obj = make_objective<double>("forward_energy", testing::small_config("forward_energy", 3), AblationConfig{},
                                      nullptr);
    ReprStores<double> stores;
    Rng rng = make_rng(5, Stream::kInit, 0);
    obj->init(stores, rng);
    stores.heads.value("forward/W").setZero();
    auto batch = testing::random_batch(8, 3, 3, 2, 3);
    for (auto& r : batch.rewards) r.setZero();
    const double v = loss_value(*obj, stores, batch);
    ok &= std::abs(v) < 1e-12;
    d << ", energy " << sci(std::abs(v));
  }
  {
    const TransformerSpec trunk = testing::micro_trunk(1);
    auto base = make_objective<double>("acl", testing::small_config("acl", 1), AblationConfig(AblationFactors{}, 1, 4),
                                       &trunk);
    auto* acl = dynamic_cast<AclObjective<double>*>(base.get());
    ReprStores<double> stores;
    Rng rng = make_rng(5, Stream::kInit, 0);
    acl->init(stores, rng);
    auto batch = testing::random_batch(5, 1, 3, 2, 2);
    for (Index b = 1; b < 5; ++b) batch.states[0].row(b) = batch.states[0].row(0);
    MaskPlan plan = untouched_plan(5, 1);
    plan.labels[static_cast<int>(TokenStream::kState)](2, 0) = static_cast<std::uint8_t>(MaskLabel::kDrop);
    Tape<double> t;
    const double v = acl->loss_with_plan(t, stores, batch, plan, rng).loss.item();
    ok &= std::abs(v - std::log(5.0)) < 1e-12;
    d << ", acl identical candidates |L-log 5| " << sci(std::abs(v - std::log(5.0)));
  }
  {
    Tape<double> t;
    auto q = t.constant(Md::Identity(2, 2));
    const double v = info_nce_log_mean_exp(q, q, t.constant(Md::Identity(2, 2))).item();
    const double expect = -1.0 + std::log((std::exp(1.0) + 1.0) / 2.0);
    ok &= std::abs(v - expect) < 1e-6;
    d << ", B=2 tcl " << fix(v, 9) << " vs " << fix(expect, 9);
  }
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 3
Outcome masking_statistics() {
  Rng rng = make_rng(8, Stream::kPretrain, 0);
  std::array<double, 4> counts{};
  double total = 0;
  while (total < 1e5) {
    const MaskPlan p = sample_mask_plan(64, 8, rng);
    for (int s = 0; s < kNumStreams; ++s)
      for (Index i = 0; i < p.labels[s].size(); ++i) {
        counts[p.labels[s].data()[i]] += 1;
        total += 1;
      }
  }
  const std::array<double, 4> expect{0.40, 0.30, 0.15, 0.15};
  bool ok = true;
  double worst = 0;
  for (int i = 0; i < 4; ++i) {
    worst = std::max(worst, std::abs(counts[i] / total - expect[i]));
    ok &= std::abs(counts[i] / total - expect[i]) < 0.01;
  }
  return {ok, "drop/switch/keep/untouched " + fix(counts[1] / total, 4) + "/" + fix(counts[2] / total, 4) + "/" +
                  fix(counts[3] / total, 4) + "/" + fix(counts[0] / total, 4) + " over " +
                  std::to_string(static_cast<long>(total)) + " positions, max dev " + fix(worst, 4)};
}

// ---------------------------------------------------------------- 4
Outcome momentum_contract() {
  bool ok = true;
  std::ostringstream d;
  double max_target_grad = 0.0;
  bool ema_exact = true;
  auto check_momentum = [&](Objective<double>& obj, const SubTrajectoryBatch<double>& batch) {
    ReprStores<double> stores;
    Rng rng = make_rng(5, Stream::kInit, 0);
    obj.init(stores, rng);
    for (auto* s : stores.all()) s->zero_grad();
    Tape<double> t;
    Rng r = make_rng(1, Stream::kPretrain, 0);
    t.backward(obj.loss(t, stores, batch, r).loss);
    for (const auto& [k, e] : stores.target.entries()) max_target_grad = std::max(max_target_grad, e.grad.cwiseAbs().maxCoeff());
    for (auto& [k, e] : stores.target.entries()) e.value.setZero();
    for (auto& [k, e] : stores.phi.entries()) e.value.setOnes();
    obj.after_update(stores);
    for (const auto& [k, e] : stores.target.entries()) ema_exact &= (e.value.array() == 0.05).all();
  };
  auto mtcl = make_objective<double>("momentum_tcl", testing::small_config("momentum_tcl", 3), AblationConfig{}, nullptr);
  check_momentum(*mtcl, testing::random_batch(4, 3, 3, 2, 8));
  AblationFactors f;
  f.momentum = true;
  const TransformerSpec trunk = testing::micro_trunk(4);
  auto macl = make_objective<double>("acl", testing::small_config("acl", 4), AblationConfig(f, 4, 4), &trunk);
  check_momentum(*macl, testing::random_batch(4, 4, 3, 2, 2));
  ok &= max_target_grad == 0.0 && ema_exact;
  d << "max |target grad| " << max_target_grad << ", EMA (0,1)@0.05 " << (ema_exact ? "= 0.05 exactly" : "inexact");

  auto plain = make_objective<double>("tcl", testing::small_config("tcl", 4), AblationConfig{}, nullptr);
  auto mom = make_objective<double>("momentum_tcl", testing::small_config("momentum_tcl", 4), AblationConfig{}, nullptr);
  ReprStores<double> a, b;
  Rng r1 = make_rng(9, Stream::kInit, 0), r2 = make_rng(9, Stream::kInit, 0);
  plain->init(a, r1);
  mom->init(b, r2);
  const auto batch = testing::random_batch(6, 4, 3, 2, 4);
  const double gap = std::abs(loss_value(*plain, a, batch) - loss_value(*mom, b, batch));
  ok &= gap < 1e-6;
  d << ", init gap momentum_tcl vs tcl " << sci(gap);
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 5
Outcome transformer_causality() {
  Rng rng = make_rng(55, Stream::kInit, 0);
  int prefix_ok = 0, sensitive = 0;
  const int configs = 100;
  for (int c = 0; c < configs; ++c) {
    TransformerSpec spec;
    spec.input_dim = uniform_int(rng, 1, 6);
    // ReLU widths of a few units can be entirely dead, which makes any output
    // locally constant; sample widths where that is not generic.
    spec.preprocess_dim = uniform_int(rng, 4, 16);
    spec.num_heads = uniform_int(rng, 1, 3);
    spec.head_dim = uniform_int(rng, 1, 4);
    spec.ff_dim = uniform_int(rng, 4, 16);
    spec.output_dim = uniform_int(rng, 1, 6);
    const Index len = uniform_int(rng, 2, 8);
    spec.max_positions = len;
    const Index batch = uniform_int(rng, 1, 3);
    Transformer<double> net(spec, "tf");
    ParamStore<double> ps;
    net.init(ps, rng);
    // Generic (nonzero) biases so no unit sits identically at zero.
    for (auto& [k, e] : ps.entries()) e.value += randn<double>(e.value.rows(), e.value.cols(), rng) * 0.1;
    std::vector<Md> tokens;
    for (Index i = 0; i < len; ++i) tokens.push_back(randn<double>(batch, spec.input_dim, rng));
    const auto base = transformer_forward(net, ps, tokens, true);
    bool good = true;
    for (Index j = 1; j < len; ++j) {
      auto pert = tokens;
      pert[j] += randn<double>(batch, spec.input_dim, rng);
      const auto out = transformer_forward(net, ps, pert, true);
      for (Index i = 0; i < j; ++i) good &= (out[i] == base[i]);
    }
    prefix_ok += good;
    auto pert = tokens;
    pert[len - 1] += randn<double>(batch, spec.input_dim, rng);
    const auto b0 = transformer_forward(net, ps, tokens, false);
    const auto b1 = transformer_forward(net, ps, pert, false);
    sensitive += (b0[0] - b1[0]).norm() > 1e-12;
  }
  // The same probes through the ACL skeleton's bidirectional factor.
  bool acl_ok = true;
  for (bool bidir : {false, true}) {
    AblationFactors f;
    f.bidirectional = bidir;
    const TransformerSpec trunk = testing::micro_trunk(4);
    auto base = make_objective<double>("acl", testing::small_config("acl", 4), AblationConfig(f, 4, 4), &trunk);
    auto* acl = dynamic_cast<AclObjective<double>*>(base.get());
    ReprStores<double> stores;
    Rng r = make_rng(1, Stream::kInit, 0);
    acl->init(stores, r);
    for (auto& [k, e] : stores.heads.entries()) e.value += randn<double>(e.value.rows(), e.value.cols(), r) * 0.1;
    auto batch = testing::random_batch(3, 4, 3, 2, 3);
    Tape<double> t;
    auto seq = acl->build_input_sequence(t, stores, batch, untouched_plan(3, 4), {});
    const Md before = acl->contexts(t, stores, seq).value();
    const Index keep = 2 * 3 * 3;  // tokens of the first two timesteps
    Md changed = seq.tokens.value();
    changed.bottomRows(changed.rows() - keep) += randn<double>(changed.rows() - keep, changed.cols(), r);
    InputSequence<double> cut = seq;
    cut.tokens = t.constant(changed);
    const Md after = acl->contexts(t, stores, cut).value();
    const bool same = before.topRows(keep) == after.topRows(keep);
    acl_ok &= same == !bidir;
  }
  return {prefix_ok == configs && sensitive == configs && acl_ok,
          "causal prefix bit-identical on " + std::to_string(prefix_ok) + "/" + std::to_string(configs) +
              " configs, bidirectional sensitive on " + std::to_string(sensitive) + "/" + std::to_string(configs) +
              ", acl factor probe " + (acl_ok ? "ok" : "failed")};
}

// ---------------------------------------------------------------- 6
Outcome straight_through() {
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
    Tape<double> t;
    const Md y = straight_through_sample(t.constant(logits), 2, &rng).value();
    counts += y;
  }
  double worst = 0;
  for (Index j = 0; j < 8; ++j) worst = std::max(worst, std::abs(counts(0, j) / n - probs(0, j)));

  ParamStore<double> ps("st");
  ps.add("l", logits);
  ps.zero_grad();
  Tape<double> t;
  auto y = straight_through_sample(t.param(ps, "l"), 2, &rng);
  t.backward(sum(mul(y, t.constant(Md(Eigen::RowVectorXd::LinSpaced(8, 1.0, 8.0))))));
  const double gnorm = ps.grad("l").norm();

  bool deterministic = true;
  Tape<double> u;
  const Md first = straight_through_sample(u.constant(logits), 2, nullptr).value();
  for (int i = 0; i < 100; ++i) deterministic &= straight_through_sample(u.constant(logits), 2, nullptr).value() == first;
  deterministic &= first(0, 2) == 1.0 && first(0, 4) == 1.0;
  return {worst < 0.01 && gnorm > 0.0 && deterministic,
          "max freq dev " + fix(worst, 4) + " over 1e5 draws, grad norm " + sci(gnorm) + ", argmax " +
              (deterministic ? "deterministic" : "NOT deterministic")};
}

// ---------------------------------------------------------------- 7
double quantile_w2_squared(double m1, double s1, double m2, double s2) {
  // 1-D optimal transport couples equal quantiles.
  boost::math::normal_distribution<double> n1(m1, s1), n2(m2, s2);
  const int n = 20000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = (i + 0.5) / n;
    const double dq = boost::math::quantile(n1, u) - boost::math::quantile(n2, u);
    acc += dq * dq;
  }
  return acc / n;
}

Outcome bisimulation_w2() {
  Rng rng = make_rng(7, Stream::kInit, 0);
  double worst = 0.0;
  for (int p = 0; p < 100; ++p) {
    const Index d = uniform_int(rng, 1, 4);
    Eigen::VectorXd m1(d), s1(d), m2(d), s2(d);
    double oracle = 0.0;
    for (Index i = 0; i < d; ++i) {
      m1(i) = 2.0 * uniform(rng) - 1.0;
      m2(i) = 2.0 * uniform(rng) - 1.0;
      s1(i) = 0.05 + 1.5 * uniform(rng);
      s2(i) = 0.05 + 1.5 * uniform(rng);
      oracle += quantile_w2_squared(m1(i), s1(i), m2(i), s2(i));
    }
    worst = std::max(worst, std::abs(w2_diag_gaussian(m1, s1, m2, s2) - std::sqrt(oracle)));
  }
  Bisimulation<double> obj(testing::small_config("bisim", 2));
  obj.identical_pairs = true;
  ReprStores<double> stores;
  Rng r = make_rng(5, Stream::kInit, 0);
  obj.init(stores, r);
  Tape<double> t;
  const double self = obj.loss(t, stores, testing::random_batch(5, 2, 3, 2, 7), r).terms.at("bisim");
  return {worst < 1e-3 && self == 0.0,
          "max |closed form - quantile OT| " + sci(worst) + " over 100 pairs, identical-pair loss " + sci(self)};
}

// ---------------------------------------------------------------- 8
RunRecord fake(const std::string& id, std::uint64_t seed, RunStatus status, std::optional<double> score) {
  RunRecord r;
  r.config_id = id;
  r.label = id;
  r.config_ini = "[experiment]\ntrack = imitation\nenv = point_mass_2d\ntier = medium\nobjective = acl\nfrontend = frozen\n";
  r.seed = seed;
  r.status = status;
  r.final_score = score;
  return r;
}

Outcome protocol_arithmetic() {
  bool ok = true;
  std::ostringstream d;
  double worst_expert = 0, worst_random = 0;
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    ControllerPolicy expert(scripted_expert(name));
    Rng unused(0);
    const EvalResult e = evaluate_policy(batch_policy(expert, unused), *env, 11);
    UniformRandomPolicy random(env->spec().action_dim);
    Rng r(3);
    const EvalResult a = evaluate_policy(batch_policy(random, r), *env, 11);
    worst_expert = std::max(worst_expert, std::abs(e.mean_score - 100.0));
    worst_random = std::max(worst_random, std::abs(a.mean_score));
  }
  ok &= worst_expert <= 5.0 && worst_random <= 10.0;
  d << "anchors |expert-100| <= " << fix(worst_expert) << ", |random| <= " << fix(worst_random);

  const AggregateReport r = aggregate({fake("a", 0, RunStatus::kCompleted, 10.0), fake("a", 1, RunStatus::kCompleted, 20.0),
                                       fake("a", 2, RunStatus::kCompleted, 30.0)});
  const double se = r.configs[0].std_error;
  ok &= std::abs(se - 5.7735) < 1e-4 && std::abs(se - 10.0 / std::sqrt(3.0)) < 1e-6;
  d << ", stderr[10,20,30] " << fix(se, 6);

  std::vector<CurvePoint> curve;
  for (int i = 0; i < 30; ++i) curve.push_back({(i + 1) * 100, i * i * 0.5, {}});
  double expect = 0;
  for (int i = 20; i < 30; ++i) expect += i * i * 0.5;
  expect /= 10;
  std::vector<CurvePoint> short_curve(curve.begin(), curve.begin() + 4);
  const bool last10 = final_score(curve, 10) == expect && final_score(short_curve, 10) == (0 + 0.5 + 2 + 4.5) / 4;
  ok &= last10;
  d << ", last-10 " << (last10 ? "ok" : "wrong");

  const AggregateReport x = aggregate({fake("b", 0, RunStatus::kCompleted, 10.0), fake("b", 1, RunStatus::kDiverged, {}),
                                       fake("b", 2, RunStatus::kCompleted, 20.0), fake("b", 3, RunStatus::kDiverged, {}),
                                       fake("b", 4, RunStatus::kCompleted, 30.0)});
  const bool excl = x.configs[0].n_completed == 3 && x.configs[0].n_diverged == 2 && *x.configs[0].mean == 20.0;
  ok &= excl;
  d << ", 2/5 diverged -> n=" << x.configs[0].n_completed << " div=" << x.configs[0].n_diverged;
  return {ok, d.str()};
}

// ---------------------------------------------------------------- 9
struct ArmResult {
  std::vector<double> scores;
  int diverged = 0;
  double seconds = 0;
};

ArmResult run_arm(const std::string& config, const fs::path& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path(config));
  cfg.out = out;
  RunOptions opt;
  opt.generate = true;
  const auto t0 = std::chrono::steady_clock::now();
  ArmResult a;
  for (const auto& r : run_experiment(cfg, opt)) {
    if (r.status == RunStatus::kCompleted) a.scores.push_back(*r.final_score);
    else ++a.diverged;
  }
  a.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return a;
}

double mean_of(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return x.empty() ? NAN : s / x.size();
}

Outcome directional_check() {
  const fs::path out = g_workdir / "c9";
  const ArmResult il_acl = run_arm("imitation_acl.ini", out);
  const ArmResult il_raw = run_arm("imitation_raw.ini", out);
  const ArmResult rl_acl = run_arm("offline_acl.ini", out);
  const ArmResult rl_raw = run_arm("offline_raw.ini", out);
  const auto p_il = welch_one_sided_p(il_acl.scores, il_raw.scores);
  const auto p_rl = welch_one_sided_p(rl_acl.scores, rl_raw.scores);
  const double il_secs = il_acl.seconds + il_raw.seconds;
  auto arm = [](const char* name, const ArmResult& a, const ArmResult& b, const std::optional<double>& p) {
    return std::string(name) + " acl " + fix(mean_of(a.scores)) + " vs raw " + fix(mean_of(b.scores)) + " (n " +
           std::to_string(a.scores.size()) + "/" + std::to_string(b.scores.size()) + ", p " +
           (p ? fix(*p, 4) : std::string("n/a")) + ")";
  };
  const bool il_ok = p_il && mean_of(il_acl.scores) >= mean_of(il_raw.scores) && *p_il < 0.1 && il_secs < 1800.0;
  const bool rl_ok = p_rl && mean_of(rl_acl.scores) >= mean_of(rl_raw.scores) && *p_rl < 0.1;
  return {il_ok && rl_ok, arm("imitation", il_acl, il_raw, p_il) + " in " + fix(il_secs / 60.0, 1) + " min; " +
                              arm("offline medium-expert", rl_acl, rl_raw, p_rl) + " in " +
                              fix((rl_acl.seconds + rl_raw.seconds) / 60.0, 1) + " min"};
}

// ---------------------------------------------------------------- CLI helpers
pid_t spawn_cli(const std::vector<std::string>& args, const fs::path& log) {
  const pid_t pid = fork();
  if (pid == 0) {
    const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd >= 0) {
      ::dup2(fd, 1);
      ::dup2(fd, 2);
    }
    std::vector<char*> argv;
    std::string cli = ORPL_CLI_PATH;
    argv.push_back(cli.data());
    std::vector<std::string> copy = args;
    for (auto& a : copy) argv.push_back(a.data());
    argv.push_back(nullptr);
    ::execv(cli.c_str(), argv.data());
    ::_exit(127);
  }
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

int run_cli(const std::vector<std::string>& args, const fs::path& log) { return wait_exit(spawn_cli(args, log)); }

std::string read_file(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t curve_rows(const fs::path& p) {
  if (!fs::exists(p)) return 0;
  std::ifstream is(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++n;
  return n == 0 ? 0 : n - 1;
}

// ---------------------------------------------------------------- 10
Outcome divergence_handling() {
  const fs::path out = g_workdir / "c10";
  const fs::path log = g_workdir / "c10.log";
  const std::string cfg = config_path("imitation_raw.ini").string();
  const std::vector<std::string> common{"-q", "train", "--config", cfg, "--out", out.string(), "--seeds", "0,1,2",
                                        "--set", "budget.downstream_steps=2000", "--generate"};
  auto healthy = common;
  const int ok_code = run_cli(healthy, log);
  auto faulty = common;
  faulty.insert(faulty.end(), {"--set", "learner.nan_gradient_step=700"});
  const int bad_code = run_cli(faulty, log);

  const auto records = load_records({out});
  int diverged = 0, diverged_with_score = 0;
  for (const auto& r : records)
    if (r.status == RunStatus::kDiverged) {
      ++diverged;
      diverged_with_score += r.final_score.has_value();
    }
  const AggregateReport rep = aggregate(records);
  bool excluded = false;
  for (const auto& c : rep.configs)
    if (c.n_diverged == 3) excluded = c.n_completed == 0 && !c.mean && c.final_scores.empty();
  const int agg_code = run_cli({"-q", "aggregate", out.string()}, log);
  const bool ok = ok_code == 0 && bad_code == 3 && diverged == 3 && diverged_with_score == 0 && excluded && agg_code == 0;
  return {ok, "healthy exit " + std::to_string(ok_code) + ", NaN-injected exit " + std::to_string(bad_code) + ", " +
                  std::to_string(diverged) + "/3 records diverged with " + std::to_string(diverged_with_score) +
                  " scores, aggregate " + (excluded ? "excludes them" : "does NOT exclude them")};
}

// ---------------------------------------------------------------- 11
Outcome determinism_and_resume() {
  const std::string cfg = config_path("imitation_acl.ini").string();
  ExperimentConfig parsed = ExperimentConfig::from_file(cfg);
  parsed.out = g_workdir / "c9";
  const fs::path reference = run_directory(parsed, 0) / "curve.csv";
  if (!fs::exists(reference)) {
    // Criterion 9 was skipped: produce the reference run here.
    parsed.seeds = {0};
    RunOptions opt;
    opt.generate = true;
    run_experiment(parsed, opt);
  }
  const std::string ref = read_file(reference);
  const std::size_t total_rows = curve_rows(reference);

  const fs::path log = g_workdir / "c11.log";
  const fs::path again = g_workdir / "c11_repeat";
  const int rc1 = run_cli({"-q", "train", "--config", cfg, "--seed", "0", "--out", again.string(), "--generate"}, log);
  parsed.out = again;
  const bool identical = rc1 == 0 && read_file(run_directory(parsed, 0) / "curve.csv") == ref;

  const fs::path killed = g_workdir / "c11_killed";
  parsed.out = killed;
  const fs::path curve = run_directory(parsed, 0) / "curve.csv";
  const pid_t pid = spawn_cli({"-q", "train", "--config", cfg, "--seed", "0", "--out", killed.string()}, log);
  const std::size_t kill_at = total_rows / 3;
  while (curve_rows(curve) < kill_at) {
    int status = 0;
    if (::waitpid(pid, &status, WNOHANG) == pid) return {false, "training subprocess exited before the kill point"};
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  ::kill(pid, SIGKILL);
  const int killed_code = wait_exit(pid);
  const std::size_t rows_at_kill = curve_rows(curve);
  const int rc2 = run_cli({"-q", "train", "--config", cfg, "--seed", "0", "--out", killed.string(), "--resume"}, log);
  const bool resumed = rc2 == 0 && read_file(curve) == ref;
  const bool mid_run = killed_code == 128 + SIGKILL && rows_at_kill < total_rows;
  return {identical && resumed && mid_run,
          std::string("repeat run curve ") + (identical ? "bit-identical" : "DIFFERS") + "; SIGKILL after " +
              std::to_string(rows_at_kill) + "/" + std::to_string(total_rows) + " evals, resumed curve " +
              (resumed ? "bit-identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_workdir = fs::current_path() / "acceptance_work";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else if (a == "--workdir" && i + 1 < argc) {
      g_workdir = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--workdir DIR]\n";
      return 2;
    }
  }
  fs::remove_all(g_workdir);
  fs::create_directories(g_workdir);
  ::setenv("ORPL_DATA_ROOT", (g_workdir / "data").c_str(), 1);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"contrastive closed forms", contrastive_closed_forms},
      {"masking statistics", masking_statistics},
      {"momentum contract", momentum_contract},
      {"transformer causality", transformer_causality},
      {"straight-through estimator", straight_through},
      {"bisimulation W2", bisimulation_w2},
      {"protocol arithmetic", protocol_arithmetic},
      {"desk-scale directional check", directional_check},
      {"divergence handling", divergence_handling},
      {"determinism and resume", determinism_and_resume}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << criteria[i].first << ": " << o.detail << " ("
              << fix(secs, 1) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
