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

#include "orpl/numerics/transformer.hpp"

#include <numeric>

namespace orpl {

void TransformerSpec::validate() const {
  if (input_dim <= 0 || preprocess_dim <= 0 || num_heads <= 0 || head_dim <= 0 || ff_dim <= 0 || output_dim <= 0 ||
      max_positions <= 0)
    throw DimensionError("TransformerSpec: all dims must be positive");
}

template <typename S>
Transformer<S>::Transformer(TransformerSpec spec, std::string prefix)
    : spec_(spec),
      pos_key_(prefix + "/pos"),
      pre_(prefix + "/pre", spec.input_dim, spec.preprocess_dim),
      q_(prefix + "/q", spec.preprocess_dim, spec.num_heads * spec.head_dim),
      k_(prefix + "/k", spec.preprocess_dim, spec.num_heads * spec.head_dim),
      v_(prefix + "/v", spec.preprocess_dim, spec.num_heads * spec.head_dim),
      o_(prefix + "/o", spec.num_heads * spec.head_dim, spec.preprocess_dim),
      ff_(prefix + "/ff", spec.preprocess_dim, spec.ff_dim),
      out_(prefix + "/out", spec.ff_dim, spec.output_dim) {
  spec_.validate();
}

template <typename S>
void Transformer<S>::init(ParamStore<S>& store, Rng& rng) const {
  pre_.init(store, rng);
  store.add(pos_key_, randn<S>(spec_.max_positions, spec_.preprocess_dim, rng) * S(0.02));
  q_.init(store, rng);
  k_.init(store, rng);
  v_.init(store, rng);
  o_.init(store, rng);
  ff_.init(store, rng);
  out_.init(store, rng);
}

template <typename S>
Var<S> Transformer<S>::forward(Tape<S>& tape, ParamStore<S>& store, const Var<S>& tokens, Index seq_len, Index batch,
                               std::span<const Index> positions, bool causal) const {
  if (seq_len <= 0 || batch <= 0) throw EmptyInputError("transformer: empty token sequence");
  if (tokens.rows() != seq_len * batch) throw DimensionError("transformer: token rows != seq_len * batch");
  if (static_cast<Index>(positions.size()) != seq_len) throw DimensionError("transformer: one position per token");
  std::vector<Index> pos_rows;
  pos_rows.reserve(static_cast<std::size_t>(seq_len * batch));
  for (Index l = 0; l < seq_len; ++l) {
    if (positions[l] < 0 || positions[l] >= spec_.max_positions)
      throw DimensionError("transformer: position index exceeds max_positions");
    for (Index b = 0; b < batch; ++b) pos_rows.push_back(positions[l]);
  }
  Var<S> x = relu(pre_.forward(tape, store, tokens));
  x = add(x, gather_rows(tape.param(store, pos_key_), pos_rows));
  Var<S> q = q_.forward(tape, store, x);
  Var<S> k = k_.forward(tape, store, x);
  Var<S> v = v_.forward(tape, store, x);
  Var<S> a = attention(q, k, v, seq_len, batch, spec_.num_heads, causal);
  x = add(x, o_.forward(tape, store, a));
  return out_.forward(tape, store, relu(ff_.forward(tape, store, x)));
}

template <typename S>
std::vector<Matrix<S>> transformer_forward(const Transformer<S>& net, ParamStore<S>& params,
                                           const std::vector<Matrix<S>>& tokens, bool causal) {
  if (tokens.empty()) throw EmptyInputError("transformer_forward: empty token sequence");
  const Index batch = tokens.front().rows();
  const Index width = tokens.front().cols();
  Matrix<S> stacked(static_cast<Index>(tokens.size()) * batch, width);
  for (std::size_t l = 0; l < tokens.size(); ++l) {
    if (tokens[l].rows() != batch || tokens[l].cols() != width)
      throw DimensionError("transformer_forward: tokens must share one shape");
    stacked.middleRows(static_cast<Index>(l) * batch, batch) = tokens[l];
  }
  std::vector<Index> positions(tokens.size());
  std::iota(positions.begin(), positions.end(), Index(0));
  Tape<S> tape;
  tape.freeze(params);
  Var<S> out = net.forward(tape, params, tape.constant(std::move(stacked)), static_cast<Index>(tokens.size()), batch,
                           positions, causal);
  std::vector<Matrix<S>> result;
  for (std::size_t l = 0; l < tokens.size(); ++l)
    result.push_back(out.value().middleRows(static_cast<Index>(l) * batch, batch));
  return result;
}

template class Transformer<float>;
template class Transformer<double>;
template std::vector<Matrix<float>> transformer_forward(const Transformer<float>&, ParamStore<float>&,
                                                        const std::vector<Matrix<float>>&, bool);
template std::vector<Matrix<double>> transformer_forward(const Transformer<double>&, ParamStore<double>&,
                                                         const std::vector<Matrix<double>>&, bool);

}  // namespace orpl
