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

#include "orpl/data/masking.hpp"

#include "orpl/numerics/errors.hpp"

namespace orpl {

MaskPlan untouched_plan(Index batch, Index window) {
  MaskPlan p;
  p.batch = batch;
  p.window = window;
  for (int s = 0; s < kNumStreams; ++s) {
    p.labels[s] = LabelMatrix::Zero(batch, window);
    p.donor[s] = IndexMatrix::Constant(batch, window, -1);
  }
  return p;
}

MaskPlan sample_mask_plan(Index batch, Index window, Rng& rng, const MaskRates& rates) {
  if (rates.drop < 0 || rates.switch_ < 0 || rates.keep < 0 || rates.drop + rates.switch_ + rates.keep > 1.0)
    throw ConfigurationError("mask rates must be nonnegative and sum to at most 1");
  MaskPlan p = untouched_plan(batch, window);
  const double c1 = rates.drop, c2 = c1 + rates.switch_, c3 = c2 + rates.keep;
  for (int s = 0; s < kNumStreams; ++s) {
    for (Index b = 0; b < batch; ++b) {
      for (Index i = 0; i < window; ++i) {
        const double u = uniform(rng);
        MaskLabel l = MaskLabel::kUntouched;
        if (u < c1) {
          l = MaskLabel::kDrop;
        } else if (u < c2) {
          l = MaskLabel::kSwitch;
        } else if (u < c3) {
          l = MaskLabel::kKeep;
        }
        if (l == MaskLabel::kSwitch) {
          if (batch == 1) {
            l = MaskLabel::kKeep;
          } else {
            Index d = uniform_int(rng, 0, batch - 2);
            if (d >= b) ++d;
            p.donor[s](b, i) = d;
          }
        }
        p.labels[s](b, i) = static_cast<std::uint8_t>(l);
      }
    }
  }
  return p;
}

template <typename S>
std::int64_t MaskedBatch<S>::num_predicted(TokenStream s) const {
  double n = 0;
  for (const auto& m : predicted[static_cast<int>(s)]) n += m.sum();
  return static_cast<std::int64_t>(n);
}

template <typename S>
MaskedBatch<S> apply_mask(const SubTrajectoryBatch<S>& batch, const MaskPlan& plan, bool include_keep) {
  if (plan.batch != batch.batch || plan.window != batch.window)
    throw DimensionError("mask plan does not match the batch shape");
  const Index B = batch.batch, W = batch.window;
  MaskedBatch<S> out;
  const std::array<const std::vector<Matrix<S>>*, kNumStreams> src = {&batch.states, &batch.actions,
                                                                       &batch.rewards};
  for (int s = 0; s < kNumStreams; ++s) {
    for (Index i = 0; i < W; ++i) {
      const Matrix<S>& orig = (*src[s])[static_cast<std::size_t>(i)];
      Matrix<S> v = orig;
      Matrix<S> drop = Matrix<S>::Zero(B, 1), pred = Matrix<S>::Zero(B, 1), avail = Matrix<S>::Ones(B, 1);
      const bool tail = s != static_cast<int>(TokenStream::kState) && i == W - 1;
      for (Index b = 0; b < B; ++b) {
        if (tail && batch.tail_valid(b, 0) == S(0)) {
          v.row(b).setZero();
          avail(b, 0) = 0;
          continue;
        }
        switch (static_cast<MaskLabel>(plan.labels[s](b, i))) {
          case MaskLabel::kUntouched:
            break;
          case MaskLabel::kDrop:
            v.row(b).setZero();
            drop(b, 0) = 1;
            pred(b, 0) = 1;
            break;
          case MaskLabel::kSwitch:
            v.row(b) = orig.row(plan.donor[s](b, i));
            pred(b, 0) = 1;
            break;
          case MaskLabel::kKeep:
            pred(b, 0) = include_keep ? 1 : 0;
            break;
        }
      }
      out.values[s].push_back(std::move(v));
      out.drop[s].push_back(std::move(drop));
      out.predicted[s].push_back(std::move(pred));
      out.available[s].push_back(std::move(avail));
    }
  }
  return out;
}

template <typename S>
std::array<std::vector<Matrix<S>>, kNumStreams> substitute_drop_tokens(
    const MaskedBatch<S>& masked, const std::array<Matrix<S>, kNumStreams>& tokens) {
  std::array<std::vector<Matrix<S>>, kNumStreams> out;
  for (int s = 0; s < kNumStreams; ++s) {
    for (std::size_t i = 0; i < masked.values[s].size(); ++i) {
      const Matrix<S>& v = masked.values[s][i];
      if (tokens[s].rows() != 1 || tokens[s].cols() != v.cols()) throw DimensionError("drop token shape");
      out[s].push_back(v + masked.drop[s][i] * tokens[s]);
    }
  }
  return out;
}

template struct MaskedBatch<float>;
template struct MaskedBatch<double>;
template MaskedBatch<float> apply_mask(const SubTrajectoryBatch<float>&, const MaskPlan&, bool);
template MaskedBatch<double> apply_mask(const SubTrajectoryBatch<double>&, const MaskPlan&, bool);
template std::array<std::vector<Matrix<float>>, kNumStreams> substitute_drop_tokens(
    const MaskedBatch<float>&, const std::array<Matrix<float>, kNumStreams>&);
template std::array<std::vector<Matrix<double>>, kNumStreams> substitute_drop_tokens(
    const MaskedBatch<double>&, const std::array<Matrix<double>, kNumStreams>&);

}  // namespace orpl
