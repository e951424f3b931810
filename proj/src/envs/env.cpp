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

#include "orpl/envs/env.hpp"

#include <cmath>
#include <numbers>

#include "orpl/numerics/errors.hpp"

namespace orpl {

Vec Env::reset(Rng& rng) {
  state_ = initial_state(rng);
  t_ = 0;
  started_ = true;
  return observe(state_);
}

StepResult Env::step(const Vec& action) {
  if (!started_) throw EpisodeOverError(spec_.name + ": step before reset");
  if (t_ >= spec_.horizon) throw EpisodeOverError(spec_.name + ": step after horizon");
  if (action.size() != spec_.action_dim) throw DimensionError(spec_.name + ": action dimension mismatch");
  if (!action.allFinite()) throw FinitenessError(spec_.name + ": non-finite action");
  Vec a = action;
  for (Index i = 0; i < a.size(); ++i) {
    if (a[i] > 1.0 || a[i] < -1.0) {
      a[i] = std::clamp(a[i], -1.0, 1.0);
      ++clamps_;
    }
  }
  Vec next = transition(state_, a);
  StepResult r;
  r.reward = reward(state_, a, next);
  state_ = std::move(next);
  ++t_;
  r.next_state = observe(state_);
  r.done = t_ >= spec_.horizon;
  return r;
}

namespace {

Vec damped_integrator(const Vec& s, const Vec& a, double dt, double damping) {
  const Index n = a.size();
  Vec next(2 * n);
  next.head(n) = s.head(n) + dt * s.tail(n);
  next.tail(n) = s.tail(n) + dt * (a - damping * s.tail(n));
  return next;
}

}  // namespace

PointMass2D::PointMass2D() : Env(EnvSpec{"point_mass_2d", 4, 2, 200, 0.05}) {}

Vec PointMass2D::transition(const Vec& s, const Vec& a) const {
  return damped_integrator(s, a, spec().dt, kDamping);
}

double PointMass2D::reward(const Vec&, const Vec&, const Vec& next) const {
  return -(next.head(2) - goal()).squaredNorm();
}

Vec PointMass2D::initial_state(Rng& rng) const {
  Vec s = Vec::Zero(4);
  s[0] = uniform(rng, -0.1, 0.1);
  s[1] = uniform(rng, -0.1, 0.1);
  return s;
}

DoubleIntegrator4D::DoubleIntegrator4D() : Env(EnvSpec{"double_integrator_4d", 8, 4, 200, 0.05}) {}

Vec DoubleIntegrator4D::transition(const Vec& s, const Vec& a) const {
  return damped_integrator(s, a, spec().dt, kDamping);
}

double DoubleIntegrator4D::reward(const Vec&, const Vec&, const Vec& next) const {
  return -(next.head(4) - goal()).squaredNorm();
}

Vec DoubleIntegrator4D::initial_state(Rng& rng) const {
  Vec s = Vec::Zero(8);
  for (int i = 0; i < 4; ++i) s[i] = uniform(rng, -0.1, 0.1);
  return s;
}

Swingup1D::Swingup1D() : Env(EnvSpec{"swingup_1d", 3, 1, 200, 0.05}) {}

Vec Swingup1D::transition(const Vec& s, const Vec& a) const {
  const double dt = spec().dt;
  const double acc = kGravity * std::sin(s[0]) + kTorque * a[0] - kFriction * s[1];
  Vec next(2);
  next[1] = std::clamp(s[1] + dt * acc, -kMaxSpeed, kMaxSpeed);
  next[0] = std::remainder(s[0] + dt * next[1], 2.0 * std::numbers::pi);
  return next;
}

double Swingup1D::reward(const Vec&, const Vec& a, const Vec& next) const {
  return std::cos(next[0]) - 0.01 * a.squaredNorm();
}

Vec Swingup1D::observe(const Vec& s) const {
  Vec o(3);
  o << std::cos(s[0]), std::sin(s[0]), s[1];
  return o;
}

Vec Swingup1D::initial_state(Rng& rng) const {
  Vec s(2);
  s[0] = std::remainder(std::numbers::pi + uniform(rng, -0.1, 0.1), 2.0 * std::numbers::pi);
  s[1] = uniform(rng, -0.05, 0.05);
  return s;
}

MaskWrapper::MaskWrapper(std::unique_ptr<Env> base, Index masked_dim, bool resample)
    : Env(base->spec()), base_(std::move(base)), masked_dim_(masked_dim), resample_(resample) {
  if (masked_dim_ < 0 || masked_dim_ >= spec().state_dim)
    throw ConfigurationError("MaskWrapper: masked_dim out of range");
}

MaskWrapper::MaskWrapper(const MaskWrapper& other)
    : Env(other.spec()), base_(other.base_->clone()), masked_dim_(other.masked_dim_), resample_(other.resample_) {}

Vec MaskWrapper::observe(const Vec& state) const {
  Vec o = base_->observe(state);
  o[masked_dim_] = 0.0;
  return o;
}

Vec MaskWrapper::initial_state(Rng& rng) const {
  if (resample_) masked_dim_ = uniform_int(rng, 0, spec().state_dim - 1);
  return base_->initial_state(rng);
}

std::vector<std::string> env_names() { return {"point_mass_2d", "double_integrator_4d", "swingup_1d"}; }

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "point_mass_2d") return std::make_unique<PointMass2D>();
  if (name == "double_integrator_4d") return std::make_unique<DoubleIntegrator4D>();
  if (name == "swingup_1d") return std::make_unique<Swingup1D>();
  throw ConfigurationError("unknown environment '" + name + "'");
}

}  // namespace orpl
