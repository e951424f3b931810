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

#include "orpl/numerics/layers.hpp"

#include <cmath>

namespace orpl {

Activation parse_activation(const std::string& name) {
  if (name == "swish") return Activation::kSwish;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigurationError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kSwish: return "swish";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

void MLPSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) throw DimensionError("MLPSpec: dims must be positive");
  for (Index h : hidden_dims)
    if (h <= 0) throw DimensionError("MLPSpec: hidden dims must be positive");
}

template <typename S>
Var<S> activate(const Var<S>& x, Activation a) {
  switch (a) {
    case Activation::kSwish: return swish(x);
    case Activation::kRelu: return relu(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

template <typename S>
Linear<S>::Linear(std::string prefix, Index in_dim, Index out_dim)
    : w_(prefix + "/w"), b_(prefix + "/b"), in_(in_dim), out_(out_dim) {
  if (in_dim <= 0 || out_dim <= 0) throw DimensionError("Linear '" + prefix + "': dims must be positive");
}

template <typename S>
void Linear<S>::init(ParamStore<S>& store, Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  store.add(w_, rand_uniform<S>(in_, out_, -bound, bound, rng));
  store.add(b_, Matrix<S>::Zero(1, out_));
}

template <typename S>
void Linear<S>::zero(ParamStore<S>& store) const {
  store.value(w_).setZero();
  store.value(b_).setZero();
}

template <typename S>
Var<S> Linear<S>::forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& x) const {
  if (x.cols() != in_)
    throw DimensionError(w_ + ": expected input width " + std::to_string(in_) + ", got " + std::to_string(x.cols()));
  return add(matmul(x, tape.param(store, w_)), tape.param(store, b_));
}

template <typename S>
Mlp<S>::Mlp(MLPSpec spec, std::string prefix) : spec_(std::move(spec)) {
  spec_.validate();
  Index in = spec_.input_dim;
  for (std::size_t i = 0; i < spec_.hidden_dims.size(); ++i) {
    layers_.emplace_back(prefix + "/l" + std::to_string(i), in, spec_.hidden_dims[i]);
    in = spec_.hidden_dims[i];
  }
  layers_.emplace_back(prefix + "/out", in, spec_.output_dim);
}

template <typename S>
void Mlp<S>::init(ParamStore<S>& store, Rng& rng) const {
  for (const auto& l : layers_) l.init(store, rng);
}

template <typename S>
void Mlp<S>::zero_output_layer(ParamStore<S>& store) const {
  layers_.back().zero(store);
}

template <typename S>
Var<S> Mlp<S>::forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& x) const {
  Var<S> h = x;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = activate(layers_[i].forward(tape, store, h), spec_.activation);
  return layers_.back().forward(tape, store, h);
}

template <typename S>
Matrix<S> mlp_forward(const Mlp<S>& mlp, ParamStore<S>& params, const Matrix<S>& x) {
  if (x.cols() != mlp.spec().input_dim)
    throw DimensionError("mlp_forward: input width " + std::to_string(x.cols()) + " != " +
                         std::to_string(mlp.spec().input_dim));
  require_finite(x, "mlp_forward input");
  Tape<S> tape;
  tape.freeze(params);
  return mlp.forward(tape, params, tape.constant(x)).value();
}

template <typename S>
RecurrentCell<S>::RecurrentCell(std::string prefix, Index hidden_dim, Index input_dim)
    : layer_(prefix + "/cell", hidden_dim + input_dim, hidden_dim), hidden_(hidden_dim) {}

template <typename S>
Var<S> RecurrentCell<S>::forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& h, const Var<S>& x) const {
  return tanh(layer_.forward(tape, store, concat_cols<S>({h, x})));
}

template class Linear<float>;
template class Linear<double>;
template class Mlp<float>;
template class Mlp<double>;
template class RecurrentCell<float>;
template class RecurrentCell<double>;
template Var<float> activate(const Var<float>&, Activation);
template Var<double> activate(const Var<double>&, Activation);
template Matrix<float> mlp_forward(const Mlp<float>&, ParamStore<float>&, const Matrix<float>&);
template Matrix<double> mlp_forward(const Mlp<double>&, ParamStore<double>&, const Matrix<double>&);

}  // namespace orpl
