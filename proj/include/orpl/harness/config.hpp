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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "orpl/ablation/ablation.hpp"
#include "orpl/downstream/frontend.hpp"
#include "orpl/downstream/learners.hpp"
#include "orpl/envs/tiers.hpp"

namespace orpl {

enum class Track { kImitation, kOfflineRl, kOnlineRl };

Track parse_track(const std::string& name);
std::string to_string(Track track);
// Data tiers each track accepts.
const std::vector<Tier>& allowed_tiers(Track track);

// section -> key -> value, as read from INI.
using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

// Reads an INI file, resolving top-level `include = a.ini, b.ini` entries
// (relative to the including file) before the file's own keys.
ConfigSections read_config_sections(const std::filesystem::path& path);

struct PretrainSettings {
  std::int64_t steps = 20000;
  Index batch = 256;
  double learning_rate = -1.0;  // objective default when <= 0
  Index repr_dim = 256;
  std::vector<Index> phi_hidden{256, 256};
  std::vector<Index> head_hidden{256, 256};
  Activation activation = Activation::kSwish;
  Index window = 0;  // 0: 8 for acl, 2 otherwise
  double gamma = 0.99;
  // Transformer trunk (acl only); 0 takes the standard trunk's value.
  Index trunk_width = 0;
  Index trunk_heads = 0;
  Index trunk_head_dim = 0;
  Index trunk_ff = 0;
  std::int64_t checkpoint_every = 1000;
};

struct BudgetSettings {
  std::int64_t downstream_steps = 100000;
  std::int64_t eval_every = 1000;
  int eval_episodes = 10;
  int final_window = 10;  // final score = mean of the last this-many evaluations
};

struct DataSettings {
  std::int64_t dataset_transitions = 100000;
  std::int64_t expert_transitions = 10000;  // BC's N
};

struct ExperimentConfig {
  Track track = Track::kImitation;
  std::string env = "point_mass_2d";
  Tier tier = Tier::kMedium;
  std::string objective = "none";
  AblationFactors ablation;
  // Factors written explicitly (closure conflicts are errors only for these).
  std::vector<std::string> explicit_factors;
  FrontendMode frontend = FrontendMode::kRaw;
  double aux_weight = 1.0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path out = "runs";
  PretrainSettings pretrain;
  LearnerConfig learner;
  BudgetSettings budget;
  DataSettings data;

  static ExperimentConfig from_sections(const ConfigSections& sections);
  static ExperimentConfig from_file(const std::filesystem::path& path);

  // Applies one `section.key = value` (or bare ablation-factor / repr_dim)
  // setting; throws ValidationError for unknown keys or bad values.
  void set(const std::string& section, const std::string& key, const std::string& value);
  void set(const std::string& dotted_key, const std::string& value);

  // Full protocol and closure checks; throws ValidationError.
  void validate() const;

  bool uses_pretraining() const { return frontend == FrontendMode::kFrozen || frontend == FrontendMode::kFinetune; }
  bool is_acl() const { return objective == "acl"; }
  Index window() const;
  AblationConfig ablation_config() const;
  ObjectiveConfig objective_config(Index state_dim, Index action_dim) const;
  TransformerSpec trunk_spec() const;

  // Fully resolved INI. `with_run` adds the seeds/out section.
  std::string to_ini(bool with_run = true) const;
  // Stable identifier: readable label plus a hash of the resolved settings
  // (seeds and output directory excluded).
  std::string config_id() const;
  std::string label() const;
  // Settings a raw-frontend baseline must share with this config.
  std::string baseline_key() const;
};

// 64-bit FNV-1a, used for stable identifiers.
std::uint64_t fnv1a(const std::string& text);

}  // namespace orpl
