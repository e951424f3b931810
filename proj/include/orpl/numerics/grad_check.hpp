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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "orpl/numerics/param_store.hpp"

namespace orpl {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Loss closure: evaluates the loss on the current parameter values; when
// `with_grad` is set it must also run the backward pass so that gradients
// accumulate into the stores. Sampling inside must be seeded identically on
// every call.
using LossClosure = std::function<double(bool with_grad)>;

// Compares analytic gradients with central differences. The relative error
// for one scalar is |analytic - numeric| / max(1, |numeric|). Stop-gradient
// outputs are frozen at their unperturbed values for the numeric side.
GradCheckReport grad_check(const LossClosure& loss, std::span<ParamStore<double>* const> stores, double h = 1e-5);

inline GradCheckReport grad_check(const LossClosure& loss, std::initializer_list<ParamStore<double>*> stores,
                                  double h = 1e-5) {
  std::vector<ParamStore<double>*> v(stores);
  return grad_check(loss, std::span<ParamStore<double>* const>(v), h);
}

}  // namespace orpl
