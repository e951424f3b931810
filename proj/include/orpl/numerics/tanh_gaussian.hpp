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

#include <string>
#include <vector>

#include "orpl/numerics/layers.hpp"

namespace orpl {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
// Dataset actions are pulled this far inside (-1, 1) before atanh.
inline constexpr double kActionClampMargin = 1e-6;

// Gaussian over the pre-squash variable; actions are tanh of it.
template <typename S>
struct TanhGaussian {
  Var<S> mean;
  Var<S> log_std;
};

template <typename S>
struct TanhSample {
  Var<S> action;
  Var<S> log_prob;  // rows x 1
};

// Policy/prediction head producing a tanh-squashed Gaussian, plus the
// adaptive entropy temperature log_alpha (kept in its own store so it has
// its own Adam state).
template <typename S>
class TanhGaussianHead {
 public:
  TanhGaussianHead() = default;
  TanhGaussianHead(Index input_dim, Index action_dim, std::vector<Index> hidden, Activation activation,
                   std::string prefix);

  void init(ParamStore<S>& params, ParamStore<S>& temperature, Rng& rng, double initial_alpha = 1.0) const;

  TanhGaussian<S> distribution(Tape<S>& tape, ParamStore<S>& params, const Var<S>& x) const;
  Var<S> log_alpha(Tape<S>& tape, ParamStore<S>& temperature) const { return tape.param(temperature, alpha_key_); }

  Index input_dim() const { return net_.spec().input_dim; }
  Index action_dim() const { return action_dim_; }
  S target_entropy() const { return -static_cast<S>(action_dim_); }
  const Mlp<S>& net() const { return net_; }

 private:
  Mlp<S> net_;
  Index action_dim_ = 0;
  std::string alpha_key_;
};

// Clamps into (-1 + margin, 1 - margin); returns how many entries moved.
template <typename S>
Index clamp_actions(Matrix<S>& actions);

// Log-density of fixed actions, including the -sum log(1 - a^2) tanh
// correction. Throws DomainError when any |a| >= 1.
template <typename S>
Var<S> tanh_gaussian_log_prob(const TanhGaussian<S>& dist, const Matrix<S>& actions);

// Reparameterized sample tanh(mean + exp(log_std) * noise).
template <typename S>
TanhSample<S> tanh_gaussian_sample(const TanhGaussian<S>& dist, const Matrix<S>& noise);

template <typename S>
Matrix<S> tanh_gaussian_mode(const TanhGaussian<S>& dist) {
  return dist.mean.value().array().tanh().matrix();
}

// Single-embedding convenience: log p(action | embedding).
template <typename S>
S tanh_gaussian_logprob(const TanhGaussianHead<S>& head, ParamStore<S>& params, const Matrix<S>& embedding,
                        const Matrix<S>& action);

// Negative log-likelihood of `targets` with the additive adaptive entropy
// regularizer: mean(-log p(target)) + alpha * mean(log pi(sample)) plus the
// temperature loss -log_alpha * (log pi(sample) + target_entropy). alpha is
// held constant inside the first two terms.
template <typename S>
struct ActionLikelihoodLoss {
  Var<S> loss;
  double nll = 0;
  double entropy = 0;
  double alpha = 0;
};

template <typename S>
ActionLikelihoodLoss<S> action_likelihood_loss(Tape<S>& tape, const TanhGaussianHead<S>& head,
                                               ParamStore<S>& temperature, const TanhGaussian<S>& dist,
                                               const Matrix<S>& targets, const Matrix<S>& noise);

extern template class TanhGaussianHead<float>;
extern template class TanhGaussianHead<double>;

}  // namespace orpl
