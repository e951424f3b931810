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

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "orpl/numerics/errors.hpp"

namespace orpl {

// Row-major so that one row is one sample / one token.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const std::string& what) {
  if (!m.allFinite()) throw FinitenessError(what + ": non-finite value");
}

// Flat shape + row-major data; the serialization-side view of a parameter.
struct RealArray {
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }
};

template <typename Scalar>
RealArray to_real_array(const Matrix<Scalar>& m) {
  RealArray a;
  a.shape = {m.rows(), m.cols()};
  a.data.assign(m.data(), m.data() + m.size());
  return a;
}

template <typename Scalar>
Matrix<Scalar> to_matrix(const RealArray& a) {
  if (a.shape.size() != 2 || static_cast<std::int64_t>(a.data.size()) != a.numel())
    throw DimensionError("RealArray is not a consistent rank-2 array");
  Matrix<Scalar> m(a.shape[0], a.shape[1]);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(a.data[i]);
  return m;
}

}  // namespace orpl
