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

#include "orpl/envs/tiers.hpp"

#include <algorithm>
#include <cmath>

#include "orpl/numerics/errors.hpp"

namespace orpl {

Tier parse_tier(const std::string& name) {
  if (name == "expert") return Tier::kExpert;
  if (name == "medium") return Tier::kMedium;
  if (name == "medium-expert") return Tier::kMediumExpert;
  if (name == "medium-replay") return Tier::kMediumReplay;
  throw ConfigurationError("unknown tier '" + name + "'");
}

std::string to_string(Tier tier) {
  switch (tier) {
    case Tier::kExpert: return "expert";
    case Tier::kMedium: return "medium";
    case Tier::kMediumExpert: return "medium-expert";
    case Tier::kMediumReplay: return "medium-replay";
  }
  return "unknown";
}

TierRecipe tier_recipe(const std::string& env_name) {
  TierRecipe r;
  if (env_name == "point_mass_2d") {
    r.medium_random_prob = 0.8;
  } else if (env_name == "double_integrator_4d") {
    r.medium_random_prob = 0.9;
  } else if (env_name == "swingup_1d") {
    r.medium_random_prob = 0.5;
  } else {
    throw ConfigurationError("no tier recipe for '" + env_name + "'");
  }
  return r;
}

double replay_random_prob(const TierRecipe& recipe, int snapshot) {
  const int n = recipe.replay_snapshots;
  if (snapshot < 0 || snapshot >= n) throw ConfigurationError("replay snapshot out of range");
  if (n == 1) return recipe.medium_random_prob;
  const double frac = static_cast<double>(snapshot) / (n - 1);
  return 1.0 - (1.0 - recipe.medium_random_prob) * frac;
}

namespace {

Trajectory rollout(Env& env, Policy& policy, Rng& rng, double& total) {
  const int T = env.spec().horizon;
  Trajectory tr;
  tr.states.resize(T + 1, env.spec().state_dim);
  tr.actions.resize(T, env.spec().action_dim);
  tr.rewards.resize(T, 1);
  Vec obs = env.reset(rng);
  total = 0.0;
  for (int t = 0; t < T; ++t) {
    tr.states.row(t) = obs.cast<float>().transpose();
    Vec a = policy.act(obs, rng);
    tr.actions.row(t) = a.cast<float>().transpose();
    StepResult s = env.step(a);
    tr.rewards(t, 0) = static_cast<float>(s.reward);
    total += s.reward;
    obs = std::move(s.next_state);
  }
  tr.states.row(T) = obs.cast<float>().transpose();
  return tr;
}

}  // namespace

CollectedData collect_dataset(const std::string& env_name, Tier tier, std::int64_t n_transitions,
                              std::uint64_t seed) {
  auto env = make_env(env_name);
  const int T = env->spec().horizon;
  if (n_transitions < T) throw ConfigurationError("collect_dataset: n_transitions below the horizon");
  const std::int64_t episodes = (n_transitions + T - 1) / T;
  const TierRecipe recipe = tier_recipe(env_name);
  const Index ad = env->spec().action_dim;
  Controller expert = scripted_expert(env_name);

  // Policy index for each episode, assigned in contiguous blocks.
  auto source_of = [&](std::int64_t j) -> int {
    switch (tier) {
      case Tier::kExpert: return 0;
      case Tier::kMedium: return 0;
      case Tier::kMediumExpert: return j < episodes / 2 ? 0 : 1;
      case Tier::kMediumReplay:
        return static_cast<int>(std::min<std::int64_t>(j * recipe.replay_snapshots / episodes,
                                                       recipe.replay_snapshots - 1));
    }
    return 0;
  };
  auto make_policy = [&](int source) -> NoisyControllerPolicy {
    switch (tier) {
      case Tier::kExpert: return {expert, ad, 0.0, recipe.expert_noise};
      case Tier::kMedium: return {expert, ad, recipe.medium_random_prob, recipe.medium_noise};
      case Tier::kMediumExpert:
        return source == 0 ? NoisyControllerPolicy(expert, ad, recipe.medium_random_prob, recipe.medium_noise)
                           : NoisyControllerPolicy(expert, ad, 0.0, recipe.expert_noise);
      case Tier::kMediumReplay:
        return {expert, ad, replay_random_prob(recipe, source), recipe.medium_noise};
    }
    throw ConfigurationError("unreachable tier");
  };

  CollectedData out;
  for (std::int64_t j = 0; j < episodes; ++j) {
    const int src = source_of(j);
    NoisyControllerPolicy policy = make_policy(src);
    Rng rng = make_rng(seed, Stream::kDataset, static_cast<std::uint64_t>(j));
    double total = 0.0;
    out.trajectories.push_back(rollout(*env, policy, rng, total));
    out.returns.push_back(total);
    out.source.push_back(src);
  }
  return out;
}

TierReport measure_tiers(const std::string& env_name, const ScoreNormalizer& norm, std::int64_t episodes,
                         std::uint64_t seed) {
  const int T = make_env(env_name)->spec().horizon;
  TierReport report{env_name, {}};
  for (Tier tier : {Tier::kExpert, Tier::kMediumExpert, Tier::kMedium, Tier::kMediumReplay}) {
    CollectedData d = collect_dataset(env_name, tier, episodes * T, seed);
    double s = 0.0, s2 = 0.0;
    for (double r : d.returns) {
      s += r;
      s2 += r * r;
    }
    const double n = static_cast<double>(d.returns.size());
    TierStats st;
    st.mean_return = s / n;
    st.std_return = n > 1 ? std::sqrt(std::max(0.0, (s2 - n * st.mean_return * st.mean_return) / (n - 1))) : 0.0;
    st.mean_score = norm.normalize(env_name, st.mean_return);
    report.tiers[tier] = st;
  }
  return report;
}

void enforce_tier_gaps(const TierReport& report) {
  const TierStats& e = report.tiers.at(Tier::kExpert);
  const TierStats& me = report.tiers.at(Tier::kMediumExpert);
  const TierStats& m = report.tiers.at(Tier::kMedium);
  const double spread = std::max(e.std_return, m.std_return);
  if (e.mean_return - m.mean_return < 3.0 * spread)
    throw DataError(report.env + ": expert/medium return gap below 3 std");
  if (e.mean_score - me.mean_score < 10.0 || me.mean_score - m.mean_score < 10.0)
    throw DataError(report.env + ": tier scores are not separated by 10 points");
}

}  // namespace orpl
