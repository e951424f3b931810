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

#include <span>
#include <string>
#include <vector>

#include "orpl/numerics/layers.hpp"

namespace orpl {

struct TransformerSpec {
  Index input_dim = 256;       // token width entering the preprocessing layer
  Index preprocess_dim = 256;  // ReLU preprocessing layer
  Index num_heads = 4;
  Index head_dim = 128;
  Index ff_dim = 256;  // ReLU feed-forward hidden layer
  Index output_dim = 256;
  Index max_positions = 8;  // learned additive position embeddings
  bool causal = true;

  void validate() const;
};

// Single-block encoder:
//   x   = relu(tokens W_pre + b_pre) + pos[position]
//   x   = x + MHA(x) W_o
//   out = relu(x W_ff + b_ff) W_out + b_out
template <typename S>
class Transformer {
 public:
  Transformer() = default;
  Transformer(TransformerSpec spec, std::string prefix);

  void init(ParamStore<S>& store, Rng& rng) const;

  // tokens: (seq_len * batch) x input_dim, position-major. positions[l] is the
  // embedding index used by token l (several tokens may share one).
  Var<S> forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& tokens, Index seq_len, Index batch,
                 std::span<const Index> positions, bool causal) const;

  const TransformerSpec& spec() const { return spec_; }

 private:
  TransformerSpec spec_;
  std::string pos_key_;
  Linear<S> pre_, q_, k_, v_, o_, ff_, out_;
};

// Value-level forward over a token sequence; each element of `tokens` is
// batch x input_dim. Positions default to 0..L-1.
template <typename S>
std::vector<Matrix<S>> transformer_forward(const Transformer<S>& net, ParamStore<S>& params,
                                           const std::vector<Matrix<S>>& tokens, bool causal);

extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace orpl
