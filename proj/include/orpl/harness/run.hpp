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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "orpl/harness/config.hpp"

namespace orpl {

enum class RunStatus { kCompleted, kDiverged, kFailed, kInterrupted };
std::string to_string(RunStatus s);
RunStatus parse_run_status(const std::string& s);

struct CurvePoint {
  std::int64_t step = 0;
  double mean_score = 0.0;
  std::vector<double> scores;
};

// Mean of the last `window` evaluation means (all of them when fewer exist).
double final_score(const std::vector<CurvePoint>& curve, int window);

struct RunRecord {
  std::string config_id;
  std::string label;
  std::string config_ini;  // fully resolved, without the run section
  std::string baseline_key;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::kFailed;
  std::optional<double> final_score;
  std::string message;
  std::vector<CurvePoint> curve;
  double wall_clock_seconds = 0.0;
  std::string code_version;
  bool skipped = false;  // loaded from a finished run rather than executed

  std::string to_json() const;
  static RunRecord from_json(const std::string& text);
};

struct RunOptions {
  bool resume = false;
  bool generate = false;
  // Stop (as if killed) right after the checkpoint at or beyond this step.
  std::optional<std::int64_t> halt_after_step;
  std::ostream* log = nullptr;
};

std::string code_version();

// Creates the run directory and stores the resolved config in it. Files from a
// different config are removed first.
std::filesystem::path prepare_run_directory(const ExperimentConfig& cfg, std::uint64_t seed);
std::filesystem::path run_directory(const ExperimentConfig& cfg, std::uint64_t seed);

// Dataset files under data_root(); missing files are built when `generate`
// is set and reported as IoError otherwise.
TrajectoryDataset load_or_generate(const std::string& env, Tier tier, std::int64_t n, std::uint64_t seed,
                                   std::int64_t expert_prefix, bool generate);
TrajectoryDataset load_or_generate_demonstrations(const std::string& env, std::int64_t n, std::uint64_t seed,
                                                  bool generate);
std::string demonstrations_file_name(const std::string& env, std::int64_t n, std::uint64_t seed);

// Offline data a run pretrains on (masked for the online track).
TrajectoryDataset pretraining_dataset(const ExperimentConfig& cfg, std::uint64_t seed, bool generate);

struct PretrainOutcome {
  std::shared_ptr<Objective<float>> objective;
  ReprStores<float> stores;
  RewardStats stats;
  bool diverged = false;
  std::string message;
};

// Trains the representation (resuming from `dir` checkpoints when present)
// and leaves pretrain.ckpt in `dir`.
PretrainOutcome pretrain_representation(const ExperimentConfig& cfg, std::uint64_t seed,
                                        const TrajectoryDataset& data, const std::filesystem::path& dir,
                                        std::ostream* log = nullptr);

// One seed: pretrain (frozen/finetune), downstream training with periodic
// evaluation, curve.csv, checkpoints and record.json in run_directory().
RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& options = {});
// Validates first, then runs every seed.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Curve file helpers: "step,mean_normalized_score,score_0,...".
std::vector<CurvePoint> read_curve(const std::filesystem::path& path);
// `episodes` sets the number of score columns in the header.
void write_curve(const std::filesystem::path& path, const std::vector<CurvePoint>& curve, int episodes);

// Evaluates the policy stored in a run's latest checkpoint.
#include "orpl/downstream/evaluate.hpp"
EvalResult evaluate_run(const ExperimentConfig& cfg, std::uint64_t seed, std::uint64_t eval_seed, int episodes);

}  // namespace orpl
