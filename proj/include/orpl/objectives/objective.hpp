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

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "orpl/data/sampler.hpp"
#include "orpl/numerics/tanh_gaussian.hpp"
#include "orpl/numerics/transformer.hpp"
#include "orpl/objectives/repr_net.hpp"

namespace orpl {

// All parameters touched by pretraining. `target` holds the momentum copy
// of phi and never receives gradients.
template <typename S>
struct ReprStores {
  ParamStore<S> phi{"phi"};
  ParamStore<S> heads{"heads"};
  ParamStore<S> target{"target"};
  ParamStore<S> temperature{"temperature"};

  std::vector<ParamStore<S>*> trainable() { return {&phi, &heads, &temperature}; }
  std::vector<ParamStore<S>*> all() { return {&phi, &heads, &target, &temperature}; }
};

struct ObjectiveConfig {
  std::string name;
  Index state_dim = 0;
  Index action_dim = 0;
  Index repr_dim = 256;
  std::vector<Index> phi_hidden{256, 256};
  std::vector<Index> head_hidden{256, 256};
  Activation activation = Activation::kSwish;
  Index window = 2;  // k + 1
  double gamma = 0.99;
  double bisim_gamma = 0.99;
  double ema_rate = 0.05;
  // Negative selects the objective's default.
  double learning_rate = -1.0;
  bool discrete = false;
  Index discrete_blocks = 16;

  ReprSpec repr_spec() const;
};

template <typename S>
struct ObjectiveOutput {
  Var<S> loss;
  std::map<std::string, double> terms;
  std::map<std::string, double> diagnostics;

  bool flag(const std::string& name) const {
    auto it = diagnostics.find(name);
    return it != diagnostics.end() && it->second != 0.0;
  }
};

// A pretraining loss over sub-trajectory batches.
// Recent observations for history-based representations, oldest first.
// actions[i] and rewards[i] follow states[i]; the newest state has none yet.
template <typename S>
struct History {
  std::vector<Matrix<S>> states;   // B x state_dim each
  std::vector<Matrix<S>> actions;  // B x action_dim, states.size() - 1 entries
  std::vector<Matrix<S>> rewards;  // B x 1, standardized
};

template <typename S>
class Objective {
 public:
  explicit Objective(ObjectiveConfig cfg);
  virtual ~Objective() = default;

  const ObjectiveConfig& config() const { return cfg_; }
  const ReprNet<S>& phi() const { return phi_; }

  // Initializes phi and every head; resets the stores first.
  virtual void init(ReprStores<S>& stores, Rng& rng) const;

  // `rng` drives anything stochastic inside the loss (pairings, entropy
  // samples, masks, discrete codes).
  virtual ObjectiveOutput<S> loss(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                  Rng& rng) const = 0;

  // Called after every optimizer step (momentum targets).
  virtual void after_update(ReprStores<S>& stores) const { (void)stores; }

  virtual Index min_window() const { return 2; }
  virtual double default_learning_rate() const { return 1e-4; }
  double learning_rate() const { return cfg_.learning_rate > 0 ? cfg_.learning_rate : default_learning_rate(); }

  // Downstream representation of single observations.
  virtual Var<S> represent(Tape<S>& tape, ReprStores<S>& stores, const Var<S>& states) const;
  // Downstream representation from a history window; the default uses the
  // newest observation only.
  virtual Var<S> represent_history(Tape<S>& tape, ReprStores<S>& stores, const History<S>& history) const;
  virtual Index representation_dim() const { return cfg_.repr_dim; }
  virtual bool uses_history() const { return false; }

  // phi over every window position in one pass: result[i] is B x d.
  std::vector<Var<S>> embed_window(Tape<S>& tape, ReprStores<S>& stores, const SubTrajectoryBatch<S>& batch,
                                   Rng* sample_rng) const;

 protected:
  virtual void init_heads(ReprStores<S>& stores, Rng& rng) const { (void)stores, (void)rng; }


  ObjectiveConfig cfg_;
  ReprNet<S> phi_;
};

// Loss helpers shared by several objectives. Row-wise results are B x 1.

// InfoNCE with in-batch candidates and log-mean-exp normalization, positive
// included: mean_b [ -L_bb + log (1/B) sum_j exp L_bj ], L = Q W^T K^T.
template <typename S>
Var<S> info_nce_log_mean_exp(const Var<S>& queries, const Var<S>& keys, const Var<S>& w);

// Diagonal Gaussian negative log-density per row.
template <typename S>
Var<S> diag_gaussian_nll(const Var<S>& x, const Var<S>& mean, const Var<S>& log_std);

// Mean squared error over all entries.
template <typename S>
Var<S> mse(const Var<S>& pred, const Var<S>& target);

// Closed-form 2-Wasserstein distance between diagonal Gaussians.
double w2_diag_gaussian(const Eigen::VectorXd& mu1, const Eigen::VectorXd& sigma1, const Eigen::VectorXd& mu2,
                        const Eigen::VectorXd& sigma2);

// Names accepted by make_objective.
std::vector<std::string> objective_names();

}  // namespace orpl
