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

#include "orpl/ablation/ablation.hpp"

namespace orpl::testing {

// Random window batch; element 1 ends on a terminal state.
inline SubTrajectoryBatch<double> random_batch(Index B, Index W, Index sd, Index ad, std::uint64_t seed) {
  using Md = Matrix<double>;
  Rng rng = make_rng(seed, Stream::kDataset, 0);
  SubTrajectoryBatch<double> b;
  b.batch = B;
  b.window = W;
  b.tail_valid = Md::Ones(B, 1);
  if (B > 1) b.tail_valid(1, 0) = 0.0;
  for (Index i = 0; i < W; ++i) {
    b.states.push_back(randn<double>(B, sd, rng));
    Md a = (randn<double>(B, ad, rng) * 0.5).array().tanh().matrix();
    Md r = randn<double>(B, 1, rng);
    if (i == W - 1) {
      for (Index j = 0; j < B; ++j)
        if (b.tail_valid(j, 0) == 0.0) a.row(j).setZero(), r(j, 0) = 0.0;
    }
    b.actions.push_back(a);
    b.rewards.push_back(r);
    b.returns.push_back(randn<double>(B, 1, rng) * 3.0);
  }
  b.trajectory.assign(static_cast<std::size_t>(B), 0);
  b.start.assign(static_cast<std::size_t>(B), 0);
  return b;
}

inline ObjectiveConfig small_config(const std::string& name, Index window) {
  ObjectiveConfig c;
  c.name = name;
  c.state_dim = 3;
  c.action_dim = 2;
  c.repr_dim = 4;
  c.phi_hidden = {5};
  c.head_hidden = {6};
  c.window = window;
  return c;
}

inline TransformerSpec micro_trunk(Index window) {
  TransformerSpec t;
  t.input_dim = 6;
  t.preprocess_dim = 6;
  t.num_heads = 2;
  t.head_dim = 3;
  t.ff_dim = 5;
  t.max_positions = window;
  return t;
}

}  // namespace orpl::testing
