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

#include "orpl/objectives/repr_net.hpp"

#include "orpl/numerics/errors.hpp"

namespace orpl {

void ReprSpec::validate() const {
  if (state_dim <= 0 || repr_dim <= 0) throw ConfigurationError("representation dims must be positive");
  if (discrete && (discrete_blocks <= 0 || repr_dim % discrete_blocks != 0))
    throw ConfigurationError("repr_dim must be a multiple of the number of discrete blocks");
}

template <typename S>
ChoiceMatrix choose_blocks(const Matrix<S>& logits, Index blocks, Rng* rng) {
  if (blocks <= 0 || logits.cols() % blocks != 0) throw DimensionError("logits do not split into blocks");
  const Index width = logits.cols() / blocks;
  ChoiceMatrix choice(logits.rows(), blocks);
  for (Index r = 0; r < logits.rows(); ++r) {
    for (Index k = 0; k < blocks; ++k) {
      const auto seg = logits.row(r).segment(k * width, width);
      Index best = 0;
      seg.maxCoeff(&best);
      if (rng == nullptr) {
        choice(r, k) = best;
        continue;
      }
      const double top = static_cast<double>(seg(best));
      double z = 0.0;
      for (Index j = 0; j < width; ++j) z += std::exp(static_cast<double>(seg(j)) - top);
      double u = uniform(*rng) * z;
      Index pick = width - 1;
      for (Index j = 0; j < width; ++j) {
        u -= std::exp(static_cast<double>(seg(j)) - top);
        if (u < 0.0) {
          pick = j;
          break;
        }
      }
      choice(r, k) = pick;
    }
  }
  return choice;
}

template <typename S>
Var<S> straight_through_sample(const Var<S>& logits, Index blocks, Rng* rng) {
  return straight_through_onehot(logits, blocks, choose_blocks(logits.value(), blocks, rng));
}

template <typename S>
ReprNet<S>::ReprNet(ReprSpec spec, std::string prefix) : spec_(std::move(spec)) {
  spec_.validate();
  mlp_ = Mlp<S>(MLPSpec{spec_.state_dim, spec_.hidden, spec_.repr_dim, spec_.activation}, std::move(prefix));
}

template <typename S>
Var<S> ReprNet<S>::forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& states, Rng* sample_rng) const {
  Var<S> out = mlp_.forward(tape, store, states);
  if (!spec_.discrete) return out;
  return straight_through_sample(out, spec_.discrete_blocks, sample_rng);
}

template <typename S>
Matrix<S> ReprNet<S>::apply(ParamStore<S>& store, const Matrix<S>& states) const {
  Tape<S> tape;
  tape.freeze(store);
  return forward(tape, store, tape.constant(states), nullptr).value();
}

template ChoiceMatrix choose_blocks(const Matrix<float>&, Index, Rng*);
template ChoiceMatrix choose_blocks(const Matrix<double>&, Index, Rng*);
template Var<float> straight_through_sample(const Var<float>&, Index, Rng*);
template Var<double> straight_through_sample(const Var<double>&, Index, Rng*);
template class ReprNet<float>;
template class ReprNet<double>;

}  // namespace orpl
