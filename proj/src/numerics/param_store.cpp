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

#include "orpl/numerics/param_store.hpp"

#include <cmath>

namespace orpl {

template <typename Scalar>
typename ParamStore<Scalar>::Mat& ParamStore<Scalar>::add(const std::string& key, Mat init) {
  if (entries_.count(key)) throw ConfigurationError("duplicate parameter '" + key + "' in store '" + name_ + "'");
  Entry e;
  e.m = Mat::Zero(init.rows(), init.cols());
  e.v = Mat::Zero(init.rows(), init.cols());
  e.value = std::move(init);
  return entries_.emplace(key, std::move(e)).first->second.value;
}

template <typename Scalar>
typename ParamStore<Scalar>::Entry& ParamStore<Scalar>::entry(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigurationError("unknown parameter '" + key + "' in store '" + name_ + "'");
  return it->second;
}

template <typename Scalar>
const typename ParamStore<Scalar>::Entry& ParamStore<Scalar>::entry(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigurationError("unknown parameter '" + key + "' in store '" + name_ + "'");
  return it->second;
}

template <typename Scalar>
void ParamStore<Scalar>::accumulate_grad(const std::string& key, const Mat& g) {
  Entry& e = entry(key);
  if (g.rows() != e.value.rows() || g.cols() != e.value.cols())
    throw DimensionError("gradient shape mismatch for '" + key + "'");
  if (!e.has_grad) {
    e.grad = g;
    e.has_grad = true;
  } else {
    e.grad += g;
  }
}

template <typename Scalar>
void ParamStore<Scalar>::zero_grad() {
  for (auto& [k, e] : entries_) {
    e.grad = Mat::Zero(e.value.rows(), e.value.cols());
    e.has_grad = true;
  }
}

template <typename Scalar>
void ParamStore<Scalar>::clear_grad() {
  for (auto& [k, e] : entries_) {
    e.grad.resize(0, 0);
    e.has_grad = false;
  }
}

template <typename Scalar>
bool ParamStore<Scalar>::grads_finite() const {
  for (const auto& [k, e] : entries_)
    if (e.has_grad && !e.grad.allFinite()) return false;
  return true;
}

template <typename Scalar>
void ParamStore<Scalar>::adam_step(Scalar lr, Scalar beta1, Scalar beta2, Scalar eps) {
  for (const auto& [k, e] : entries_)
    if (!e.has_grad) throw IncompleteGradientError("no gradient for '" + k + "' in store '" + name_ + "'");
  ++step_;
  const Scalar c1 = Scalar(1) - std::pow(beta1, static_cast<Scalar>(step_));
  const Scalar c2 = Scalar(1) - std::pow(beta2, static_cast<Scalar>(step_));
  for (auto& [k, e] : entries_) {
    e.m = beta1 * e.m + (Scalar(1) - beta1) * e.grad;
    e.v = beta2 * e.v + (Scalar(1) - beta2) * e.grad.cwiseProduct(e.grad);
    e.value.array() -= lr * (e.m.array() / c1) / ((e.v.array() / c2).sqrt() + eps);
  }
}

template <typename Scalar>
void ParamStore<Scalar>::ema_from(const ParamStore& online, Scalar rate) {
  for (auto& [k, e] : entries_) {
    const Mat& src = online.value(k);
    if (src.rows() != e.value.rows() || src.cols() != e.value.cols())
      throw ConfigurationError("EMA shape mismatch for '" + k + "'");
    e.value = (Scalar(1) - rate) * e.value + rate * src;
  }
}

template <typename Scalar>
void ParamStore<Scalar>::copy_values_from(const ParamStore& other) {
  for (auto& [k, e] : entries_) {
    const Mat& src = other.value(k);
    if (src.rows() != e.value.rows() || src.cols() != e.value.cols())
      throw ConfigurationError("copy shape mismatch for '" + k + "'");
    e.value = src;
  }
}

template <typename Scalar>
std::vector<std::string> ParamStore<Scalar>::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, e] : entries_) out.push_back(k);
  return out;
}

template <typename Scalar>
std::size_t ParamStore<Scalar>::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [k, e] : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace orpl
