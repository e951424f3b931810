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

#include "orpl/envs/policy.hpp"

#include <cmath>

#include "orpl/numerics/errors.hpp"

namespace orpl {

namespace {

Vec clip(Vec a) { return a.cwiseMax(-1.0).cwiseMin(1.0); }

Controller integrator_expert(Index n, double goal) {
  return [n, goal](const Vec& obs) {
    Vec x = obs.head(n), v = obs.tail(n);
    return clip(4.0 * (Vec::Constant(n, goal) - x) - 1.0 * v);
  };
}

// Energy pumping far from upright, PD near it.
Vec swingup_expert(const Vec& obs) {
  const double theta = std::atan2(obs[1], obs[0]);
  const double omega = obs[2];
  Vec a(1);
  if (obs[0] > 0.85) {
    a[0] = -(3.0 * theta + 1.0 * omega);
  } else {
    const double energy = 0.5 * omega * omega + Swingup1D::kGravity * (obs[0] - 1.0);
    a[0] = -2.0 * energy * omega;
    if (std::abs(omega) < 1e-3 && obs[0] < -0.99) a[0] = 1.0;
  }
  return clip(a);
}

}  // namespace

Vec UniformRandomPolicy::act(const Vec&, Rng& rng) {
  Vec a(dim_);
  for (Index i = 0; i < dim_; ++i) a[i] = uniform(rng, -1.0, 1.0);
  return a;
}

Controller scripted_expert(const std::string& env_name) {
  if (env_name == "point_mass_2d") return integrator_expert(2, 1.0);
  if (env_name == "double_integrator_4d") return integrator_expert(4, 0.5);
  if (env_name == "swingup_1d") return swingup_expert;
  throw ConfigurationError("no scripted expert for '" + env_name + "'");
}

Vec NoisyControllerPolicy::act(const Vec& obs, Rng& rng) {
  // Always consume the same number of draws so streams stay aligned.
  const double coin = uniform(rng);
  Vec random(dim_), noise(dim_);
  for (Index i = 0; i < dim_; ++i) random[i] = uniform(rng, -1.0, 1.0);
  for (Index i = 0; i < dim_; ++i) noise[i] = normal(rng);
  if (coin < random_prob_) return random;
  return clip(controller_(obs) + noise_ * noise);
}

EpisodeResult run_episode(Env& env, Policy& policy, Rng& rng) {
  Vec obs = env.reset(rng);
  EpisodeResult r;
  while (!env.done()) {
    StepResult s = env.step(policy.act(obs, rng));
    r.total_return += s.reward;
    ++r.length;
    obs = std::move(s.next_state);
  }
  return r;
}

}  // namespace orpl
