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

#include "orpl/numerics/ops.hpp"
#include "orpl/numerics/rng.hpp"

namespace orpl {

enum class Activation { kSwish, kRelu, kIdentity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct MLPSpec {
  Index input_dim = 0;
  std::vector<Index> hidden_dims{256, 256};
  Index output_dim = 256;
  Activation activation = Activation::kSwish;

  void validate() const;
};

template <typename S>
Var<S> activate(const Var<S>& x, Activation a);

// Dense layer y = x W + b, W stored in x out.
template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(std::string prefix, Index in_dim, Index out_dim);

  // Fan-in scaled uniform weights, zero bias.
  void init(ParamStore<S>& store, Rng& rng) const;
  void zero(ParamStore<S>& store) const;
  Var<S> forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& x) const;

  Index in_dim() const { return in_; }
  Index out_dim() const { return out_; }
  const std::string& weight_key() const { return w_; }
  const std::string& bias_key() const { return b_; }

 private:
  std::string w_, b_;
  Index in_ = 0, out_ = 0;
};

// Hidden layers are activated; the output layer is linear.
template <typename S>
class Mlp {
 public:
  Mlp() = default;
  Mlp(MLPSpec spec, std::string prefix);

  void init(ParamStore<S>& store, Rng& rng) const;
  void zero_output_layer(ParamStore<S>& store) const;
  Var<S> forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& x) const;

  const MLPSpec& spec() const { return spec_; }
  const std::vector<Linear<S>>& layers() const { return layers_; }

 private:
  MLPSpec spec_;
  std::vector<Linear<S>> layers_;
};

// Value-level forward with input validation.
template <typename S>
Matrix<S> mlp_forward(const Mlp<S>& mlp, ParamStore<S>& params, const Matrix<S>& x);

// Elman-style cell h' = tanh([h, a] W + b) used by the value-prediction head.
template <typename S>
class RecurrentCell {
 public:
  RecurrentCell() = default;
  RecurrentCell(std::string prefix, Index hidden_dim, Index input_dim);

  void init(ParamStore<S>& store, Rng& rng) const { layer_.init(store, rng); }
  Var<S> forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& h, const Var<S>& x) const;
  Index hidden_dim() const { return hidden_; }

 private:
  Linear<S> layer_;
  Index hidden_ = 0;
};

extern template class Linear<float>;
extern template class Linear<double>;
extern template class Mlp<float>;
extern template class Mlp<double>;
extern template class RecurrentCell<float>;
extern template class RecurrentCell<double>;

}  // namespace orpl
