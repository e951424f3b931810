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

#include "orpl/numerics/tape.hpp"

namespace orpl {

namespace detail {

StopGradientLog& stop_gradient_log() {
  thread_local StopGradientLog log;
  return log;
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> Tape<Scalar>::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var<Scalar>(this, nodes_.size() - 1);
}

template <typename Scalar>
Var<Scalar> Tape<Scalar>::variable(Mat value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var<Scalar>(this, nodes_.size() - 1);
}

template <typename Scalar>
Var<Scalar> Tape<Scalar>::param(ParamStore<Scalar>& store, const std::string& key) {
  auto bkey = std::make_pair(static_cast<const ParamStore<Scalar>*>(&store), key);
  if (auto it = bound_.find(bkey); it != bound_.end()) return Var<Scalar>(this, it->second);
  Node n;
  n.external = &store.value(key);
  if (!is_frozen(store)) {
    n.requires_grad = true;
    n.store = &store;
    n.key = key;
  }
  nodes_.push_back(std::move(n));
  bound_.emplace(bkey, nodes_.size() - 1);
  return Var<Scalar>(this, nodes_.size() - 1);
}

template <typename Scalar>
Var<Scalar> Tape<Scalar>::record(Mat value, bool requires_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<Scalar>(this, nodes_.size() - 1);
}

template <typename Scalar>
void Tape<Scalar>::backward(const Var<Scalar>& root) {
  if (&root.tape() != this) throw ConfigurationError("backward() on a foreign node");
  if (value(root.id()).size() != 1) throw DimensionError("backward() root must be a scalar");
  if (!nodes_[root.id()].requires_grad) return;
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id()].grad = Mat::Ones(1, 1);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
  }
  for (auto& n : nodes_) {
    if (n.store && n.grad.size() != 0) n.store->accumulate_grad(n.key, n.grad);
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace orpl
