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

#include "orpl/objectives/objective.hpp"

#include <cmath>
#include <numbers>

#include "orpl/numerics/errors.hpp"

namespace orpl {

ReprSpec ObjectiveConfig::repr_spec() const {
  ReprSpec s;
  s.state_dim = state_dim;
  s.hidden = phi_hidden;
  s.repr_dim = repr_dim;
  s.activation = activation;
  s.discrete = discrete;
  s.discrete_blocks = discrete_blocks;
  return s;
}

template <typename S>
Objective<S>::Objective(ObjectiveConfig cfg) : cfg_(std::move(cfg)), phi_(cfg_.repr_spec(), "phi") {
  if (cfg_.action_dim <= 0) throw ConfigurationError("objective needs a positive action_dim");
  if (cfg_.window < 1) throw ConfigurationError("window must be at least 1");
}

template <typename S>
void Objective<S>::init(ReprStores<S>& stores, Rng& rng) const {
  if (cfg_.window < min_window())
    throw ConfigurationError(cfg_.name + " needs a window of at least " + std::to_string(min_window()));
  stores = ReprStores<S>{};
  phi_.init(stores.phi, rng);
  init_heads(stores, rng);
}

template <typename S>
std::vector<Var<S>> Objective<S>::embed_window(Tape<S>& tape, ReprStores<S>& stores,
                                               const SubTrajectoryBatch<S>& batch, Rng* sample_rng) const {
  std::vector<Var<S>> parts;
  for (const auto& s : batch.states) parts.push_back(tape.constant(s));
  Var<S> all = phi_.forward(tape, stores.phi, concat_rows(parts), sample_rng);
  std::vector<Var<S>> out;
  for (Index i = 0; i < batch.window; ++i) out.push_back(slice_rows(all, i * batch.batch, batch.batch));
  return out;
}

template <typename S>
Var<S> Objective<S>::represent(Tape<S>& tape, ReprStores<S>& stores, const Var<S>& states) const {
  return phi_.forward(tape, stores.phi, states, nullptr);
}

template <typename S>
Var<S> Objective<S>::represent_history(Tape<S>& tape, ReprStores<S>& stores,
                                       const History<S>& history) const {
  if (history.states.empty()) throw EmptyInputError("empty observation history");
  return represent(tape, stores, tape.constant(history.states.back()));
}

template <typename S>
Var<S> info_nce_log_mean_exp(const Var<S>& queries, const Var<S>& keys, const Var<S>& w) {
  const Index B = queries.rows();
  if (keys.rows() != B) throw DimensionError("info_nce: queries and keys differ in batch size");
  Tape<S>& t = queries.tape();
  Var<S> logits = matmul(matmul(queries, transpose(w)), transpose(keys));
  Var<S> positive = row_sum(mul(logits, t.constant(Matrix<S>::Identity(B, B))));
  Var<S> norm = add_scalar(logsumexp_rows(logits), -std::log(static_cast<S>(B)));
  return mean(sub(norm, positive));
}

template <typename S>
Var<S> diag_gaussian_nll(const Var<S>& x, const Var<S>& mean, const Var<S>& log_std) {
  const S half_log_2pi = S(0.5) * std::log(S(2) * std::numbers::pi_v<S>);
  Var<S> z = mul(sub(x, mean), exp(neg(log_std)));
  Var<S> quad = scale(row_sum(square(z)), S(0.5));
  Var<S> logdet = row_sum(log_std);
  return add_scalar(add(quad, logdet), half_log_2pi * static_cast<S>(x.cols()));
}

template <typename S>
Var<S> mse(const Var<S>& pred, const Var<S>& target) {
  return mean(square(sub(pred, target)));
}

double w2_diag_gaussian(const Eigen::VectorXd& mu1, const Eigen::VectorXd& sigma1, const Eigen::VectorXd& mu2,
                        const Eigen::VectorXd& sigma2) {
  if (mu1.size() != mu2.size() || sigma1.size() != sigma2.size() || mu1.size() != sigma1.size())
    throw DimensionError("w2_diag_gaussian: dimension mismatch");
  return std::sqrt((mu1 - mu2).squaredNorm() + (sigma1 - sigma2).squaredNorm());
}

std::vector<std::string> objective_names() {
  return {"inverse", "forward_raw", "forward_latent", "forward_energy", "tcl", "momentum_tcl",
          "acl",     "vpn",         "bisim",          "reconstruct_action", "reconstruct_reward"};
}

template class Objective<float>;
template class Objective<double>;
template Var<float> info_nce_log_mean_exp(const Var<float>&, const Var<float>&, const Var<float>&);
template Var<double> info_nce_log_mean_exp(const Var<double>&, const Var<double>&, const Var<double>&);
template Var<float> diag_gaussian_nll(const Var<float>&, const Var<float>&, const Var<float>&);
template Var<double> diag_gaussian_nll(const Var<double>&, const Var<double>&, const Var<double>&);
template Var<float> mse(const Var<float>&, const Var<float>&);
template Var<double> mse(const Var<double>&, const Var<double>&);

}  // namespace orpl
