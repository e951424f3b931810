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

#include "orpl/numerics/grad_check.hpp"

#include <cmath>

#include "orpl/numerics/tape.hpp"

namespace orpl {

namespace {

struct LogScope {
  explicit LogScope(detail::StopGradientLog::Mode mode) {
    auto& log = detail::stop_gradient_log();
    log.mode = mode;
    log.cursor = 0;
    if (mode == detail::StopGradientLog::Mode::kRecord) log.values.clear();
  }
  ~LogScope() { detail::stop_gradient_log().mode = detail::StopGradientLog::Mode::kOff; }
};

double checked_call(const LossClosure& loss, bool with_grad) {
  const double v = loss(with_grad);
  if (!std::isfinite(v)) throw FinitenessError("grad_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckReport grad_check(const LossClosure& loss, std::span<ParamStore<double>* const> stores, double h) {
  for (auto* s : stores) s->zero_grad();
  {
    LogScope scope(detail::StopGradientLog::Mode::kRecord);
    checked_call(loss, true);
  }
  std::vector<std::vector<Matrix<double>>> analytic;
  for (auto* s : stores) {
    std::vector<Matrix<double>> g;
    for (const auto& [k, e] : s->entries()) g.push_back(e.grad);
    analytic.push_back(std::move(g));
  }

  GradCheckReport report;
  auto& log = detail::stop_gradient_log();
  LogScope scope(detail::StopGradientLog::Mode::kReplay);
  for (std::size_t si = 0; si < stores.size(); ++si) {
    std::size_t pi = 0;
    for (auto& [key, e] : stores[si]->entries()) {
      const Matrix<double>& g = analytic[si][pi++];
      for (Index i = 0; i < e.value.size(); ++i) {
        double& theta = e.value.data()[i];
        const double saved = theta;
        theta = saved + h;
        log.cursor = 0;
        const double up = checked_call(loss, false);
        theta = saved - h;
        log.cursor = 0;
        const double down = checked_call(loss, false);
        theta = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = g.size() ? g.data()[i] : 0.0;
        const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
        ++report.checked;
        if (report.worst_index < 0 || rel > report.max_relative_error) {
          report.max_relative_error = rel;
          report.worst_parameter = stores[si]->name() + ":" + key;
          report.worst_index = i;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  // Leave the stores holding the analytic gradient.
  for (std::size_t si = 0; si < stores.size(); ++si) {
    std::size_t pi = 0;
    for (auto& [key, e] : stores[si]->entries()) e.grad = analytic[si][pi++];
  }
  return report;
}

}  // namespace orpl
