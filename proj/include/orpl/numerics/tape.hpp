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

#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "orpl/numerics/matrix.hpp"
#include "orpl/numerics/param_store.hpp"

namespace orpl {

template <typename Scalar>
class Tape;

// Handle to one node of a Tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  Scalar item() const;

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

namespace detail {

// Stop-gradient outputs recorded on the first evaluation of a loss and
// replayed on later ones. Finite differences then hold every stop-gradient
// input fixed, which is what the analytic gradient assumes.
struct StopGradientLog {
  enum class Mode { kOff, kRecord, kReplay };
  Mode mode = Mode::kOff;
  std::vector<Matrix<double>> values;
  std::size_t cursor = 0;
};

StopGradientLog& stop_gradient_log();

}  // namespace detail

// Reverse-mode tape over dense matrices.
//
// Nodes are appended in evaluation order, so a reverse sweep over the node
// list visits every node after all of its consumers.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value);
  Var<Scalar> constant(Scalar value) { return constant(Mat::Constant(1, 1, value)); }
  Var<Scalar> variable(Mat value);

  // Binds a parameter. Gradients flow back into the store on backward()
  // unless the store has been frozen on this tape.
  Var<Scalar> param(ParamStore<Scalar>& store, const std::string& key);
  void freeze(const ParamStore<Scalar>& store) { frozen_.insert(&store); }
  bool is_frozen(const ParamStore<Scalar>& store) const { return frozen_.count(&store) != 0; }

  Var<Scalar> record(Mat value, bool requires_grad, Backward backward);

  // Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(const Var<Scalar>& root);

  const Mat& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  const Mat& grad(std::size_t id) const { return nodes_[id].grad; }
  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() != 0; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
    ParamStore<Scalar>* store = nullptr;
    std::string key;
  };

  std::vector<Node> nodes_;
  std::map<std::pair<const ParamStore<Scalar>*, std::string>, std::size_t> bound_;
  std::set<const ParamStore<Scalar>*> frozen_;
};

template <typename Scalar>
Scalar Var<Scalar>::item() const {
  const auto& v = value();
  if (v.size() != 1) throw DimensionError("item() on a non-scalar node");
  return v(0, 0);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace orpl
