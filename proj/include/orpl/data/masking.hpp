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

#include <array>
#include <cstdint>
#include <vector>

#include "orpl/data/sampler.hpp"

namespace orpl {

enum class MaskLabel : std::uint8_t { kUntouched = 0, kDrop = 1, kSwitch = 2, kKeep = 3 };
enum class TokenStream : int { kState = 0, kAction = 1, kReward = 2 };
inline constexpr int kNumStreams = 3;

struct MaskRates {
  double drop = 0.3;
  double switch_ = 0.15;
  double keep = 0.15;
};

using LabelMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per stream, per (batch element, window position) label. For switch labels
// `donor` names the batch element whose item is copied in.
struct MaskPlan {
  Index batch = 0;
  Index window = 0;
  std::array<LabelMatrix, kNumStreams> labels;
  std::array<IndexMatrix, kNumStreams> donor;

  MaskLabel label(TokenStream s, Index b, Index i) const {
    return static_cast<MaskLabel>(labels[static_cast<int>(s)](b, i));
  }
};

// I.i.d. labels with the given rates; the remainder is untouched. With a
// batch of one, switch labels become keep.
MaskPlan sample_mask_plan(Index batch, Index window, Rng& rng, const MaskRates& rates = {});
MaskPlan untouched_plan(Index batch, Index window);

// Result of masking, still free of the trainable drop tokens: dropped rows
// are zero and `drop` marks them so a caller can add indicator * token.
template <typename S>
struct MaskedBatch {
  std::array<std::vector<Matrix<S>>, kNumStreams> values;     // [stream][position] B x dim
  std::array<std::vector<Matrix<S>>, kNumStreams> drop;       // B x 1 in {0, 1}
  std::array<std::vector<Matrix<S>>, kNumStreams> predicted;  // B x 1 in {0, 1}
  std::array<std::vector<Matrix<S>>, kNumStreams> available;  // B x 1 in {0, 1}

  std::int64_t num_predicted(TokenStream s) const;
};

// The original batch is never modified. Items that do not exist (the action
// and reward after a terminal state) are zero, unavailable and never
// predicted. `include_keep` controls whether keep items join the predicted
// set.
template <typename S>
MaskedBatch<S> apply_mask(const SubTrajectoryBatch<S>& batch, const MaskPlan& plan, bool include_keep = true);

// Value-level substitution of fixed drop tokens (one row vector per stream).
template <typename S>
std::array<std::vector<Matrix<S>>, kNumStreams> substitute_drop_tokens(
    const MaskedBatch<S>& masked, const std::array<Matrix<S>, kNumStreams>& tokens);

}  // namespace orpl
