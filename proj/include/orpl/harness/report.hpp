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

// Aggregation over seeds, sweeps and plot-data emission.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "orpl/harness/run.hpp"

namespace orpl {

// One-sided Welch t-test of H1: mean(a) > mean(b). Empty when either side has
// fewer than two values.
std::optional<double> welch_one_sided_p(const std::vector<double>& a, const std::vector<double>& b);

struct BaselineComparison {
  std::string config_id;
  double mean = 0.0;
  double std_error = 0.0;
  int n = 0;
  double difference = 0.0;       // config mean minus baseline mean
  std::optional<double> p_value;  // one-sided, config > baseline
};

struct ConfigAggregate {
  std::string config_id;
  std::string label;
  std::string track, env, tier, objective, frontend;
  std::string baseline_key;
  std::vector<std::uint64_t> seeds;         // completed seeds, ascending
  std::vector<double> final_scores;         // aligned with seeds
  int n_completed = 0;
  int n_diverged = 0;
  int n_failed = 0;
  std::optional<double> mean;
  double std_error = 0.0;
  bool low_n = false;
  std::optional<BaselineComparison> baseline;
};

// Means of per-config means over envs and tiers, one row per (track, method).
struct MethodAggregate {
  std::string track;
  std::string method;
  int n_configs = 0;
  double mean = 0.0;
  double std_error = 0.0;  // sqrt(sum stderr^2) / n_configs
};

struct AggregateReport {
  std::vector<ConfigAggregate> configs;  // sorted by config_id
  std::vector<MethodAggregate> methods;
  std::vector<std::string> warnings;

  std::string to_json() const;
  std::string table() const;
  const ConfigAggregate* find(const std::string& config_id) const;
};

// Records grouped by config_id. Diverged and failed seeds are counted and
// excluded; interrupted records are ignored.
AggregateReport aggregate(const std::vector<RunRecord>& records);

// Every record.json below each root, in path order.
std::vector<RunRecord> load_records(const std::vector<std::filesystem::path>& roots);

// One config per value of `axis` (any config key, dotted or bare). All
// configs are validated before any is returned.
std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, const std::string& axis,
                                            const std::vector<std::string>& values);
std::vector<RunRecord> sweep(const ExperimentConfig& base, const std::string& axis,
                             const std::vector<std::string>& values, const RunOptions& options);

inline constexpr int kPlotdataSchemaVersion = 1;

// Writes plotdata_<track>.csv into `dir` for each track present; returns the
// paths written.
std::vector<std::filesystem::path> emit_plotdata(const std::vector<RunRecord>& records,
                                                 const std::filesystem::path& dir);

}  // namespace orpl
