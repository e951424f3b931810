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

#include <functional>
#include <memory>
#include <string>

#include "orpl/envs/env.hpp"

namespace orpl {

// Observation -> action in [-1, 1]^action_dim.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Vec act(const Vec& obs, Rng& rng) = 0;
};

class UniformRandomPolicy final : public Policy {
 public:
  explicit UniformRandomPolicy(Index action_dim) : dim_(action_dim) {}
  Vec act(const Vec& obs, Rng& rng) override;

 private:
  Index dim_;
};

// Deterministic hand-written controller for one environment.
using Controller = std::function<Vec(const Vec& obs)>;
Controller scripted_expert(const std::string& env_name);

// With probability `random_prob` per step a uniform action, otherwise the
// controller's action plus N(0, noise^2), clipped to the box.
class NoisyControllerPolicy final : public Policy {
 public:
  NoisyControllerPolicy(Controller controller, Index action_dim, double random_prob, double noise)
      : controller_(std::move(controller)), dim_(action_dim), random_prob_(random_prob), noise_(noise) {}
  Vec act(const Vec& obs, Rng& rng) override;

 private:
  Controller controller_;
  Index dim_;
  double random_prob_;
  double noise_;
};

class ControllerPolicy final : public Policy {
 public:
  explicit ControllerPolicy(Controller c) : controller_(std::move(c)) {}
  Vec act(const Vec& obs, Rng&) override { return controller_(obs); }

 private:
  Controller controller_;
};

struct EpisodeResult {
  double total_return = 0.0;
  int length = 0;
};

// Runs one full episode from env.reset(rng).
EpisodeResult run_episode(Env& env, Policy& policy, Rng& rng);

}  // namespace orpl
