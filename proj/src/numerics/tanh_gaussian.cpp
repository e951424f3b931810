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

#include "orpl/numerics/tanh_gaussian.hpp"

#include <cmath>
#include <numbers>

namespace orpl {

template <typename S>
TanhGaussianHead<S>::TanhGaussianHead(Index input_dim, Index action_dim, std::vector<Index> hidden,
                                      Activation activation, std::string prefix)
    : net_(MLPSpec{input_dim, std::move(hidden), 2 * action_dim, activation}, prefix),
      action_dim_(action_dim),
      alpha_key_(prefix + "/log_alpha") {}

template <typename S>
void TanhGaussianHead<S>::init(ParamStore<S>& params, ParamStore<S>& temperature, Rng& rng,
                               double initial_alpha) const {
  net_.init(params, rng);
  temperature.add(alpha_key_, Matrix<S>::Constant(1, 1, static_cast<S>(std::log(initial_alpha))));
}

template <typename S>
TanhGaussian<S> TanhGaussianHead<S>::distribution(Tape<S>& tape, ParamStore<S>& params, const Var<S>& x) const {
  Var<S> out = net_.forward(tape, params, x);
  return {slice_cols(out, 0, action_dim_),
          clamp(slice_cols(out, action_dim_, action_dim_), S(kLogStdMin), S(kLogStdMax))};
}

template <typename S>
Index clamp_actions(Matrix<S>& actions) {
  const S hi = S(1) - S(kActionClampMargin);
  Index moved = 0;
  for (Index i = 0; i < actions.size(); ++i) {
    S& a = actions.data()[i];
    if (a > hi) {
      a = hi;
      ++moved;
    } else if (a < -hi) {
      a = -hi;
      ++moved;
    }
  }
  return moved;
}

template <typename S>
Var<S> tanh_gaussian_log_prob(const TanhGaussian<S>& dist, const Matrix<S>& actions) {
  Tape<S>& t = dist.mean.tape();
  if (actions.rows() != dist.mean.rows() || actions.cols() != dist.mean.cols())
    throw DimensionError("tanh_gaussian_log_prob: action shape mismatch");
  if ((actions.array().abs() >= S(1)).any()) throw DomainError("tanh-Gaussian action outside (-1, 1)");
  const Index d = actions.cols();
  Matrix<S> pre = actions.array().atanh().matrix();
  Matrix<S> correction = (S(1) - actions.array().square()).log().matrix().rowwise().sum();
  Var<S> z = mul(sub(t.constant(std::move(pre)), dist.mean), exp(neg(dist.log_std)));
  Var<S> per_dim = add(scale(square(z), S(-0.5)), neg(dist.log_std));
  const S norm = S(0.5) * static_cast<S>(d) * std::log(S(2) * std::numbers::pi_v<S>);
  return sub(add_scalar(row_sum(per_dim), -norm), t.constant(std::move(correction)));
}

template <typename S>
TanhSample<S> tanh_gaussian_sample(const TanhGaussian<S>& dist, const Matrix<S>& noise) {
  Tape<S>& t = dist.mean.tape();
  if (noise.rows() != dist.mean.rows() || noise.cols() != dist.mean.cols())
    throw DimensionError("tanh_gaussian_sample: noise shape mismatch");
  const Index d = noise.cols();
  Var<S> eps = t.constant(noise);
  Var<S> pre = add(dist.mean, mul(exp(dist.log_std), eps));
  const S edge = S(1) - static_cast<S>(kActionClampMargin);
  Var<S> action = clamp(tanh(pre), -edge, edge);
  // log(1 - tanh(x)^2) = 2 (log 2 - x - softplus(-2x))
  Var<S> log_det = scale(add_scalar(neg(add(pre, softplus(scale(pre, S(-2))))), std::log(S(2))), S(2));
  const S norm = S(0.5) * static_cast<S>(d) * std::log(S(2) * std::numbers::pi_v<S>);
  Matrix<S> quad = (S(-0.5) * noise.array().square()).matrix().rowwise().sum();
  Var<S> base = add(sub(t.constant(std::move(quad)), row_sum(dist.log_std)), t.constant(Matrix<S>::Constant(1, 1, -norm)));
  return {action, sub(base, row_sum(log_det))};
}

template <typename S>
S tanh_gaussian_logprob(const TanhGaussianHead<S>& head, ParamStore<S>& params, const Matrix<S>& embedding,
                        const Matrix<S>& action) {
  if (embedding.cols() != head.input_dim()) throw DimensionError("tanh_gaussian_logprob: embedding width");
  if (action.cols() != head.action_dim()) throw DimensionError("tanh_gaussian_logprob: action width");
  Tape<S> tape;
  tape.freeze(params);
  auto dist = head.distribution(tape, params, tape.constant(embedding));
  Var<S> lp = tanh_gaussian_log_prob(dist, action);
  if (!lp.value().allFinite()) throw FinitenessError("tanh_gaussian_logprob: non-finite density");
  return lp.value().sum();
}

template <typename S>
ActionLikelihoodLoss<S> action_likelihood_loss(Tape<S>& tape, const TanhGaussianHead<S>& head,
                                               ParamStore<S>& temperature, const TanhGaussian<S>& dist,
                                               const Matrix<S>& targets, const Matrix<S>& noise) {
  Var<S> nll = neg(mean(tanh_gaussian_log_prob(dist, targets)));
  TanhSample<S> sample = tanh_gaussian_sample(dist, noise);
  Var<S> mean_logpi = mean(sample.log_prob);
  Var<S> log_alpha = head.log_alpha(tape, temperature);
  Var<S> alpha = stop_gradient(exp(log_alpha));
  Var<S> entropy_term = mul(mean_logpi, alpha);
  Var<S> temp_target = stop_gradient(add_scalar(mean_logpi, head.target_entropy()));
  Var<S> temp_loss = neg(mul(log_alpha, temp_target));
  ActionLikelihoodLoss<S> out;
  out.loss = add(add(nll, entropy_term), temp_loss);
  out.nll = static_cast<double>(nll.item());
  out.entropy = -static_cast<double>(mean_logpi.item());
  out.alpha = static_cast<double>(alpha.item());
  return out;
}

template class TanhGaussianHead<float>;
template class TanhGaussianHead<double>;

#define ORPL_INSTANTIATE_TG(S)                                                                              \
  template Index clamp_actions(Matrix<S>&);                                                                \
  template Var<S> tanh_gaussian_log_prob(const TanhGaussian<S>&, const Matrix<S>&);                        \
  template TanhSample<S> tanh_gaussian_sample(const TanhGaussian<S>&, const Matrix<S>&);                   \
  template S tanh_gaussian_logprob(const TanhGaussianHead<S>&, ParamStore<S>&, const Matrix<S>&,           \
                                   const Matrix<S>&);                                                      \
  template ActionLikelihoodLoss<S> action_likelihood_loss(Tape<S>&, const TanhGaussianHead<S>&,            \
                                                          ParamStore<S>&, const TanhGaussian<S>&,          \
                                                          const Matrix<S>&, const Matrix<S>&);

ORPL_INSTANTIATE_TG(float)
ORPL_INSTANTIATE_TG(double)

}  // namespace orpl
