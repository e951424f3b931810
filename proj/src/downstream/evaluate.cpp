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

#include "orpl/downstream/evaluate.hpp"

#include "orpl/numerics/errors.hpp"

namespace orpl {

EvalResult evaluate_policy(const BatchPolicy& policy, const Env& prototype, std::uint64_t eval_seed,
                           const EvalOptions& options, const ScoreNormalizer& normalizer) {
  if (options.episodes <= 0) throw ConfigurationError("evaluation needs at least one episode");
  const auto n = static_cast<std::size_t>(options.episodes);
  const EnvSpec& spec = prototype.spec();
  std::vector<std::unique_ptr<Env>> envs;
  std::vector<Matrix<float>> states(n), actions(n), rewards(n);
  for (std::size_t i = 0; i < n; ++i) {
    envs.push_back(prototype.clone());
    Rng rng = make_rng(eval_seed, Stream::kEval, i);
    const Vec obs = envs[i]->reset(rng);
    states[i].resize(spec.horizon + 1, spec.state_dim);
    actions[i].setZero(spec.horizon, spec.action_dim);
    rewards[i].setZero(spec.horizon, 1);
    states[i].row(0) = obs.cast<float>().transpose();
  }
  EvalResult result;
  result.returns.assign(n, 0.0);
  std::vector<StepRef> refs(n);
  for (int t = 0; t < spec.horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i) refs[i] = StepRef{&states[i], &actions[i], &rewards[i], t};
    const Matrix<float> a = policy(make_observations(refs, options.history_length, options.history_stats));
    if (a.rows() != static_cast<Index>(n) || a.cols() != spec.action_dim)
      throw DimensionError("evaluate_policy: policy returned the wrong action shape");
    for (std::size_t i = 0; i < n; ++i) {
      const Vec act = a.row(static_cast<Index>(i)).transpose().cast<double>();
      const StepResult r = envs[i]->step(act);
      actions[i].row(t) = a.row(static_cast<Index>(i));
      rewards[i](t, 0) = static_cast<float>(r.reward);
      states[i].row(t + 1) = r.next_state.cast<float>().transpose();
      result.returns[i] += r.reward;
    }
  }
  for (double ret : result.returns) {
    result.scores.push_back(normalizer.normalize(spec.name, ret));
    result.mean_score += result.scores.back();
    result.mean_return += ret;
  }
  result.mean_score /= static_cast<double>(n);
  result.mean_return /= static_cast<double>(n);
  return result;
}

BatchPolicy batch_policy(Policy& policy, Rng& rng) {
  return [&policy, &rng](const ObservationBatch<float>& obs) {
    const Matrix<float> s = obs.newest();
    Matrix<float> out;
    for (Index i = 0; i < s.rows(); ++i) {
      const Vec a = policy.act(s.row(i).transpose().cast<double>(), rng);
      if (i == 0) out.resize(s.rows(), a.size());
      out.row(i) = a.cast<float>().transpose();
    }
    return out;
  };
}

}  // namespace orpl
