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

#include <Eigen/Dense>

#include "orpl/numerics/rng.hpp"

namespace orpl {

using Vec = Eigen::VectorXd;

struct EnvSpec {
  std::string name;
  Index state_dim = 0;
  Index action_dim = 0;
  int horizon = 200;
  double dt = 0.05;
};

struct StepResult {
  Vec next_state;
  double reward = 0.0;
  bool done = false;
};

// Deterministic continuous-control task with box actions in [-1, 1].
// Episodes last exactly spec().horizon steps.
class Env {
 public:
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }

  // Samples an initial state and resets the step counter.
  Vec reset(Rng& rng);
  // Out-of-box actions are clamped and counted.
  StepResult step(const Vec& action);

  const Vec& state() const { return state_; }
  int t() const { return t_; }
  bool done() const { return t_ >= spec_.horizon; }
  long clamp_count() const { return clamps_; }

  // Pure transition used by step(); exposed for testing.
  virtual Vec transition(const Vec& state, const Vec& action) const = 0;
  virtual double reward(const Vec& state, const Vec& action, const Vec& next_state) const = 0;

  // Observation emitted for an internal state (identity unless overridden).
  virtual Vec observe(const Vec& state) const { return state; }
  virtual std::unique_ptr<Env> clone() const = 0;
  virtual Vec initial_state(Rng& rng) const = 0;

 protected:
  explicit Env(EnvSpec spec) : spec_(std::move(spec)) {}

 private:
  EnvSpec spec_;
  Vec state_;
  int t_ = 0;
  long clamps_ = 0;
  bool started_ = false;
};

// Point mass in 2D: state (x, v), x' = x + dt v, v' = v + dt (a - c v).
class PointMass2D final : public Env {
 public:
  static constexpr double kDamping = 4.0;
  PointMass2D();
  Vec transition(const Vec& s, const Vec& a) const override;
  double reward(const Vec& s, const Vec& a, const Vec& next) const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<PointMass2D>(*this); }
  Vec goal() const { return Vec::Ones(2); }
  Vec initial_state(Rng& rng) const override;
};

// Same dynamics in 4D (state 8, action 4).
class DoubleIntegrator4D final : public Env {
 public:
  static constexpr double kDamping = 4.0;
  DoubleIntegrator4D();
  Vec transition(const Vec& s, const Vec& a) const override;
  double reward(const Vec& s, const Vec& a, const Vec& next) const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<DoubleIntegrator4D>(*this); }
  Vec goal() const { return Vec::Constant(4, 0.5); }
  Vec initial_state(Rng& rng) const override;
};

// Torque-limited pendulum. Internal state (theta, omega) with theta = 0
// upright; the 3-D observation is (cos theta, sin theta, omega).
class Swingup1D final : public Env {
 public:
  static constexpr double kGravity = 4.0;  // g / l
  static constexpr double kTorque = 2.0;
  static constexpr double kFriction = 0.1;
  static constexpr double kMaxSpeed = 8.0;
  Swingup1D();
  Vec transition(const Vec& s, const Vec& a) const override;
  double reward(const Vec& s, const Vec& a, const Vec& next) const override;
  Vec observe(const Vec& state) const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<Swingup1D>(*this); }
  Vec initial_state(Rng& rng) const override;
};

// Zeroes one observation coordinate. With resample set, the coordinate is
// redrawn uniformly at every reset.
class MaskWrapper final : public Env {
 public:
  MaskWrapper(std::unique_ptr<Env> base, Index masked_dim, bool resample);
  MaskWrapper(const MaskWrapper& other);

  Vec transition(const Vec& s, const Vec& a) const override { return base_->transition(s, a); }
  double reward(const Vec& s, const Vec& a, const Vec& next) const override { return base_->reward(s, a, next); }
  Vec observe(const Vec& state) const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<MaskWrapper>(*this); }

  Index masked_dim() const { return masked_dim_; }
  bool resample() const { return resample_; }
  const Env& base() const { return *base_; }
  Vec initial_state(Rng& rng) const override;

 private:
  std::unique_ptr<Env> base_;
  mutable Index masked_dim_;
  bool resample_;
};

std::vector<std::string> env_names();
// Throws ConfigurationError for unknown names.
std::unique_ptr<Env> make_env(const std::string& name);

}  // namespace orpl
