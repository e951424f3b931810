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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orpl/numerics/matrix.hpp"

namespace orpl {

// Named parameters with gradient buffers and Adam moments.
//
// A gradient is "missing" until zero_grad() or a backward pass writes it;
// adam_step refuses to run while any gradient is missing.
template <typename Scalar>
class ParamStore {
 public:
  using Mat = Matrix<Scalar>;

  struct Entry {
    Mat value;
    Mat grad;
    Mat m;
    Mat v;
    bool has_grad = false;
  };

  explicit ParamStore(std::string name = {}) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }

  Mat& add(const std::string& key, Mat init);
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  const Mat& value(const std::string& key) const { return entry(key).value; }
  Mat& value(const std::string& key) { return entry(key).value; }
  const Mat& grad(const std::string& key) const { return entry(key).grad; }
  bool has_grad(const std::string& key) const { return entry(key).has_grad; }

  void accumulate_grad(const std::string& key, const Mat& g);

  void zero_grad();
  void clear_grad();
  bool grads_finite() const;

  void adam_step(Scalar lr, Scalar beta1 = Scalar(0.9), Scalar beta2 = Scalar(0.999),
                 Scalar eps = Scalar(1e-8));

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  // theta_self <- (1 - rate) * theta_self + rate * theta_online
  void ema_from(const ParamStore& online, Scalar rate);
  void copy_values_from(const ParamStore& other);

  std::vector<std::string> names() const;
  std::size_t num_scalars() const;
  bool empty() const { return entries_.empty(); }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  Entry& entry(const std::string& key);
  const Entry& entry(const std::string& key) const;

  std::string name_;
  std::map<std::string, Entry> entries_;
  std::int64_t step_ = 0;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace orpl
