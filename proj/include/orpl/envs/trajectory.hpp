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

#include "orpl/numerics/matrix.hpp"

namespace orpl {

// One episode (s_0, a_0, r_0, ..., s_T): states have one more row than
// actions and rewards.
struct Trajectory {
  Matrix<float> states;   // (T+1) x state_dim
  Matrix<float> actions;  // T x action_dim
  Matrix<float> rewards;  // T x 1

  Index length() const { return actions.rows(); }
  bool operator==(const Trajectory&) const = default;
};

}  // namespace orpl
