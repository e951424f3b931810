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

struct ReprSpec {
  Index state_dim = 0;
  std::vector<Index> hidden{256, 256};
  Index repr_dim = 256;
  Activation activation = Activation::kSwish;
  // Treat the output as logits of `discrete_blocks` categoricals and emit
  // straight-through one-hot samples.
  bool discrete = false;
  Index discrete_blocks = 16;

  void validate() const;
};

using ChoiceMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

// Per-row, per-block category: sampled from the block softmax when `rng` is
// given, argmax otherwise.
template <typename S>
ChoiceMatrix choose_blocks(const Matrix<S>& logits, Index blocks, Rng* rng);

// Forward value is the one-hot of a categorical sample per block; backward
// goes through the block softmax.
template <typename S>
Var<S> straight_through_sample(const Var<S>& logits, Index blocks, Rng* rng);

// The representation function phi.
template <typename S>
class ReprNet {
 public:
  ReprNet() = default;
  explicit ReprNet(ReprSpec spec, std::string prefix = "phi");

  void init(ParamStore<S>& store, Rng& rng) const { mlp_.init(store, rng); }

  // `sample_rng` drives discrete sampling during training; null gives the
  // deterministic argmax used at inference.
  Var<S> forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& states, Rng* sample_rng = nullptr) const;
  Matrix<S> apply(ParamStore<S>& store, const Matrix<S>& states) const;

  const ReprSpec& spec() const { return spec_; }
  Index dim() const { return spec_.repr_dim; }

 private:
  ReprSpec spec_;
  Mlp<S> mlp_;
};

extern template class ReprNet<float>;
extern template class ReprNet<double>;

}  // namespace orpl
