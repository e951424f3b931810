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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace orpl {

struct ReferenceReturns {
  double random = 0.0;
  double expert = 0.0;
};

// Maps raw returns onto the 0 (random) .. 100 (expert) scale.
class ScoreNormalizer {
 public:
  ScoreNormalizer() = default;
  explicit ScoreNormalizer(std::map<std::string, ReferenceReturns> refs);

  // INI file with one section per env holding `random` and `expert`.
  static ScoreNormalizer load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path, const std::string& header_comment = {}) const;

  double normalize(const std::string& env, double raw_return) const;
  const ReferenceReturns& reference(const std::string& env) const;
  bool contains(const std::string& env) const { return refs_.count(env) != 0; }
  const std::map<std::string, ReferenceReturns>& references() const { return refs_; }

 private:
  std::map<std::string, ReferenceReturns> refs_;
};

// Monte-Carlo anchors: mean return of the uniform random policy and of the
// noise-free scripted expert. Episode i uses stream (seed, kEval, i).
ReferenceReturns compute_reference_returns(const std::string& env, int episodes, std::uint64_t seed);

// Frozen anchors shipped with the repository.
std::filesystem::path default_reference_path();
const ScoreNormalizer& default_normalizer();

}  // namespace orpl
