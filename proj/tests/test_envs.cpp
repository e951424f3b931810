#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "orpl/envs/normalizer.hpp"
#include "orpl/envs/tiers.hpp"
#include "orpl/numerics/errors.hpp"

using namespace orpl;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

const ScoreNormalizer& mc_normalizer() {
  static const ScoreNormalizer n = [] {
    std::map<std::string, ReferenceReturns> refs;
    for (const auto& e : env_names()) refs[e] = compute_reference_returns(e, 1000, 777);
    return ScoreNormalizer(refs);
  }();
  return n;
}

}  // namespace

TEST_CASE("point mass zero action at rest") {
  PointMass2D env;
  Vec s = Vec::Zero(4);
  Vec next = env.transition(s, Vec::Zero(2));
  CHECK(next == Vec::Zero(4));
  CHECK(env.reward(s, Vec::Zero(2), next) == doctest::Approx(-2.0));
}

TEST_CASE("point mass Euler step from rest") {
  PointMass2D env;
  Vec next = env.transition(Vec::Zero(4), vec({1.0, 0.0}));
  CHECK(next[0] == 0.0);
  CHECK(next[1] == 0.0);
  CHECK(next[2] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(next[3] == 0.0);
  // Position integrates the previous velocity.
  Vec s = vec({0.0, 0.0, 0.2, -0.4});
  Vec n2 = env.transition(s, Vec::Zero(2));
  CHECK(n2[0] == doctest::Approx(0.01));
  CHECK(n2[1] == doctest::Approx(-0.02));
}

TEST_CASE("episodes last exactly the horizon") {
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    Rng rng = make_rng(1, Stream::kEval, 0);
    UniformRandomPolicy pi(env->spec().action_dim);
    EpisodeResult r = run_episode(*env, pi, rng);
    CHECK(r.length == env->spec().horizon);
    CHECK(std::isfinite(r.total_return));
    CHECK_THROWS_AS(env->step(Vec::Zero(env->spec().action_dim)), EpisodeOverError);
  }
}

TEST_CASE("out-of-box actions are clamped and counted") {
  PointMass2D env;
  Rng rng = make_rng(2, Stream::kEval, 0);
  env.reset(rng);
  Vec before = env.state();
  env.step(vec({3.0, -0.5}));
  CHECK(env.clamp_count() == 1);
  CHECK(env.state() == env.transition(before, vec({1.0, -0.5})));
  CHECK_THROWS_AS(env.step(Vec::Zero(3)), DimensionError);
}

TEST_CASE("transitions are deterministic") {
  for (const auto& name : env_names()) {
    auto a = make_env(name), b = make_env(name);
    Rng ra = make_rng(3, Stream::kEval, 0), rb = make_rng(3, Stream::kEval, 0);
    Vec oa = a->reset(ra), ob = b->reset(rb);
    CHECK(oa == ob);
    for (int t = 0; t < 50; ++t) {
      Vec act = Vec::Constant(a->spec().action_dim, std::sin(0.3 * t));
      CHECK(a->step(act).next_state == b->step(act).next_state);
    }
  }
}

TEST_CASE("state dims") {
  CHECK(make_env("point_mass_2d")->spec().state_dim == 4);
  CHECK(make_env("double_integrator_4d")->spec().state_dim == 8);
  CHECK(make_env("swingup_1d")->spec().state_dim == 3);
  CHECK_THROWS_AS(make_env("hopper"), ConfigurationError);
}

TEST_CASE("scripted expert beats the 0.9 quantile of random returns") {
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    UniformRandomPolicy random(env->spec().action_dim);
    std::vector<double> returns;
    for (int i = 0; i < 1000; ++i) {
      Rng rng = make_rng(4, Stream::kEval, static_cast<std::uint64_t>(i));
      returns.push_back(run_episode(*env, random, rng).total_return);
    }
    std::sort(returns.begin(), returns.end());
    const double q90 = returns[900];
    ControllerPolicy expert(scripted_expert(name));
    Rng rng = make_rng(4, Stream::kEval, 5000);
    CHECK(run_episode(*env, expert, rng).total_return >= q90);
  }
}

TEST_CASE("mask wrapper zeroes exactly one coordinate") {
  for (bool resample : {false, true}) {
    MaskWrapper env(make_env("double_integrator_4d"), 2, resample);
    std::vector<int> hits(8, 0);
    for (int ep = 0; ep < 200; ++ep) {
      Rng rng = make_rng(6, Stream::kEval, static_cast<std::uint64_t>(ep));
      Vec obs = env.reset(rng);
      const Index m = env.masked_dim();
      ++hits[static_cast<std::size_t>(m)];
      for (int t = 0; t < 5; ++t) {
        CHECK(obs[m] == 0.0);
        Vec full = env.base().observe(env.state());
        for (Index i = 0; i < obs.size(); ++i)
          if (i != m) CHECK(obs[i] == full[i]);
        obs = env.step(Vec::Constant(4, 0.7)).next_state;
      }
    }
    if (resample) {
      for (int h : hits) CHECK(h > 10);
    } else {
      CHECK(hits[2] == 200);
    }
  }
  CHECK_THROWS_AS(MaskWrapper(make_env("swingup_1d"), 3, false), ConfigurationError);
}

TEST_CASE("normalize_score anchors") {
  ScoreNormalizer n({{"toy", {-50.0, 150.0}}});
  CHECK(n.normalize("toy", -50.0) == 0.0);
  CHECK(n.normalize("toy", 150.0) == 100.0);
  CHECK(n.normalize("toy", 50.0) == 50.0);
  CHECK_THROWS_AS(n.normalize("other", 0.0), MissingReferenceError);
  CHECK_THROWS_AS(ScoreNormalizer({{"bad", {1.0, 1.0}}}), ConfigurationError);
}

TEST_CASE("expert and medium tiers hit their score bands") {
  const auto& norm = mc_normalizer();
  CollectedData expert = collect_dataset("point_mass_2d", Tier::kExpert, 10000, 11);
  CHECK(expert.trajectories.size() == 50);
  double s = 0;
  for (double r : expert.returns) s += norm.normalize("point_mass_2d", r);
  CHECK(s / 50.0 >= 80.0);
  for (const auto& name : env_names()) {
    CollectedData med = collect_dataset(name, Tier::kMedium, 40 * 200, 12);
    double m = 0;
    for (double r : med.returns) m += norm.normalize(name, r);
    m /= static_cast<double>(med.returns.size());
    INFO(name, " medium score ", m);
    CHECK(m >= 20.0);
    CHECK(m <= 60.0);
  }
}

TEST_CASE("tier ordering and gaps hold on every env") {
  for (const auto& name : env_names()) {
    TierReport rep = measure_tiers(name, mc_normalizer(), 40, 13);
    INFO(name, " expert ", rep.tiers[Tier::kExpert].mean_score, " medium-expert ",
         rep.tiers[Tier::kMediumExpert].mean_score, " medium ", rep.tiers[Tier::kMedium].mean_score);
    CHECK_NOTHROW(enforce_tier_gaps(rep));
  }
  TierReport fake;
  fake.env = "toy";
  fake.tiers[Tier::kExpert] = {100, 30, 100};
  fake.tiers[Tier::kMediumExpert] = {70, 30, 70};
  fake.tiers[Tier::kMedium] = {40, 30, 40};
  CHECK_THROWS_AS(enforce_tier_gaps(fake), DataError);
}

TEST_CASE("collection is bit-identical under a fixed seed") {
  for (Tier tier : {Tier::kExpert, Tier::kMediumReplay}) {
    CollectedData a = collect_dataset("swingup_1d", tier, 1000, 21);
    CollectedData b = collect_dataset("swingup_1d", tier, 1000, 21);
    REQUIRE(a.trajectories.size() == b.trajectories.size());
    for (std::size_t i = 0; i < a.trajectories.size(); ++i) CHECK(a.trajectories[i] == b.trajectories[i]);
  }
  CollectedData c = collect_dataset("swingup_1d", Tier::kExpert, 1000, 22);
  CollectedData d = collect_dataset("swingup_1d", Tier::kExpert, 1000, 21);
  CHECK_FALSE(c.trajectories[0] == d.trajectories[0]);
  CHECK_THROWS_AS(collect_dataset("swingup_1d", Tier::kExpert, 10, 1), ConfigurationError);
}

TEST_CASE("medium-replay mixes improving snapshots") {
  CollectedData d = collect_dataset("point_mass_2d", Tier::kMediumReplay, 50 * 200, 31);
  const TierRecipe r = tier_recipe("point_mass_2d");
  CHECK(replay_random_prob(r, 0) == 1.0);
  CHECK(replay_random_prob(r, r.replay_snapshots - 1) == doctest::Approx(r.medium_random_prob));
  std::vector<double> sums(5, 0.0);
  std::vector<int> counts(5, 0);
  for (std::size_t i = 0; i < d.returns.size(); ++i) {
    sums[static_cast<std::size_t>(d.source[i])] += d.returns[i];
    ++counts[static_cast<std::size_t>(d.source[i])];
  }
  for (int c : counts) CHECK(c == 10);
  CHECK(sums[4] / counts[4] > sums[0] / counts[0]);
}

TEST_CASE("tier names round trip") {
  for (Tier t : {Tier::kExpert, Tier::kMedium, Tier::kMediumExpert, Tier::kMediumReplay})
    CHECK(parse_tier(to_string(t)) == t);
  CHECK_THROWS_AS(parse_tier("novice"), ConfigurationError);
}
