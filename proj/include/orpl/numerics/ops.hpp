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

#include <span>
#include <vector>

#include "orpl/numerics/tape.hpp"

// Differentiable free functions over Var. Binary elementwise ops accept a
// right-hand operand that is the same shape, a 1xN row (broadcast over rows),
// an Mx1 column (broadcast over columns) or 1x1.
namespace orpl {

template <typename S> Var<S> matmul(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> transpose(const Var<S>& a);

template <typename S> Var<S> add(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> sub(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> mul(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> scale(const Var<S>& a, S s);
template <typename S> Var<S> add_scalar(const Var<S>& a, S s);
template <typename S> Var<S> neg(const Var<S>& a) { return scale(a, S(-1)); }

template <typename S> Var<S> relu(const Var<S>& a);
template <typename S> Var<S> swish(const Var<S>& a);
template <typename S> Var<S> tanh(const Var<S>& a);
template <typename S> Var<S> sigmoid(const Var<S>& a);
template <typename S> Var<S> exp(const Var<S>& a);
template <typename S> Var<S> log(const Var<S>& a);
template <typename S> Var<S> softplus(const Var<S>& a);
template <typename S> Var<S> square(const Var<S>& a);
template <typename S> Var<S> abs(const Var<S>& a);
template <typename S> Var<S> sqrt(const Var<S>& a);
template <typename S> Var<S> clamp(const Var<S>& a, S lo, S hi);

template <typename S> Var<S> sum(const Var<S>& a);
template <typename S> Var<S> mean(const Var<S>& a);
template <typename S> Var<S> row_sum(const Var<S>& a);
template <typename S> Var<S> col_sum(const Var<S>& a);
template <typename S> Var<S> logsumexp_rows(const Var<S>& a);
template <typename S> Var<S> softmax_rows(const Var<S>& a);

template <typename S> Var<S> concat_cols(std::span<const Var<S>> parts);
template <typename S> Var<S> concat_rows(std::span<const Var<S>> parts);
template <typename S> Var<S> slice_cols(const Var<S>& a, Index start, Index count);
template <typename S> Var<S> slice_rows(const Var<S>& a, Index start, Index count);
template <typename S> Var<S> gather_rows(const Var<S>& a, std::span<const Index> rows);
template <typename S> Var<S> broadcast_rows(const Var<S>& a, Index rows);

template <typename S> Var<S> stop_gradient(const Var<S>& a);

// Multi-head scaled dot-product attention over `batch` sequences of length
// `seq_len`. Rows are position-major: row = position * batch + b. q, k, v are
// (seq_len*batch) x (heads*head_dim). With causal=true, output at position i
// only reads keys/values at positions <= i.
template <typename S>
Var<S> attention(const Var<S>& q, const Var<S>& k, const Var<S>& v, Index seq_len, Index batch,
                 Index heads, bool causal);

// Straight-through categorical: the forward value is the one-hot of
// `choice` per block; the backward pass treats it as the block softmax of
// `logits`. logits is B x (blocks*block_dim); choice is B x blocks.
template <typename S>
Var<S> straight_through_onehot(const Var<S>& logits, Index blocks,
                               const Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>& choice);

// Convenience wrappers for brace lists.
template <typename S>
Var<S> concat_cols(std::initializer_list<Var<S>> parts) {
  std::vector<Var<S>> v(parts);
  return concat_cols<S>(std::span<const Var<S>>(v));
}
template <typename S>
Var<S> concat_rows(std::initializer_list<Var<S>> parts) {
  std::vector<Var<S>> v(parts);
  return concat_rows<S>(std::span<const Var<S>>(v));
}
template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  return concat_cols<S>(std::span<const Var<S>>(parts));
}
template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  return concat_rows<S>(std::span<const Var<S>>(parts));
}
template <typename S>
Var<S> gather_rows(const Var<S>& a, const std::vector<Index>& rows) {
  return gather_rows<S>(a, std::span<const Index>(rows));
}

template <typename S> Var<S> operator+(const Var<S>& a, const Var<S>& b) { return add(a, b); }
template <typename S> Var<S> operator-(const Var<S>& a, const Var<S>& b) { return sub(a, b); }

}  // namespace orpl
