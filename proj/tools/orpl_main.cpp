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

// orpl: command-line driver for data generation, pretraining, downstream
// training, evaluation, sweeps, aggregation and plot-data export.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>

#include "orpl/data/dataset.hpp"
#include "orpl/envs/normalizer.hpp"
#include "orpl/harness/config.hpp"
#include "orpl/harness/report.hpp"
#include "orpl/harness/run.hpp"
#include "orpl/numerics/errors.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitValidation = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIo = 4;

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  std::int64_t seed = -1;
  std::string out;

  void add(CLI::App* app, bool seeds_flag = true) {
    app->add_option("--config", config, "experiment config (INI)")->required()->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override a config key, section.key=value (repeatable)");
    if (seeds_flag) app->add_option("--seeds", seeds, "seeds to run (comma separated)")->delimiter(',');
    app->add_option("--seed", seed, "run a single seed");
    app->add_option("--out", out, "output directory");
  }

  orpl::ExperimentConfig load() const {
    orpl::ExperimentConfig cfg = orpl::ExperimentConfig::from_file(config);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw orpl::ValidationError("--set expects key=value, got '" + o + "'");
      cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (!seeds.empty()) cfg.seeds = seeds;
    if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
    if (!out.empty()) cfg.out = out;
    cfg.validate();
    return cfg;
  }
};

int status_exit_code(const std::vector<orpl::RunRecord>& records) {
  int code = kExitOk;
  for (const auto& r : records) {
    if (r.status == orpl::RunStatus::kDiverged) code = std::max(code, kExitDiverged);
    if (r.status == orpl::RunStatus::kFailed && code == kExitOk) code = kExitFailed;
  }
  return code;
}

void print_records(const std::vector<orpl::RunRecord>& records) {
  for (const auto& r : records) {
    std::cout << r.label << " seed " << r.seed << ": " << orpl::to_string(r.status);
    if (r.final_score) std::cout << " final_score=" << std::setprecision(6) << *r.final_score;
    if (r.skipped) std::cout << " (skipped, already done)";
    if (!r.message.empty()) std::cout << " [" << r.message << "]";
    std::cout << "\n";
  }
}

void print_summary(const orpl::TrajectoryDataset& ds) {
  const orpl::DatasetSummary s = orpl::summarize(ds);
  std::cout << "trajectories " << s.trajectories << "\ntransitions " << s.transitions << "\nstate_dim "
            << ds.state_dim() << "\naction_dim " << ds.action_dim() << "\nreturn mean " << s.mean_return
            << " min " << s.min_return << " max " << s.max_return << "\n";
  auto vec = [](const std::vector<double>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << std::setprecision(4) << v[i];
    return os.str();
  };
  std::cout << "state mean [" << vec(s.state_mean) << "]\nstate std [" << vec(s.state_std) << "]\naction mean ["
            << vec(s.action_mean) << "]\naction std [" << vec(s.action_std) << "]\n";
  for (const auto& [k, v] : ds.metadata) std::cout << "meta " << k << " = " << v << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline representation pretraining laboratory"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress progress output");

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "build the datasets a config needs (or one dataset)");
  std::string gen_config, gen_env, gen_tier, gen_out;
  std::int64_t gen_n = 100000, gen_seed = 0;
  std::vector<std::string> gen_overrides;
  gen->add_option("--config", gen_config, "experiment config; generates data for each of its seeds")
      ->check(CLI::ExistingFile);
  gen->add_option("--set", gen_overrides, "override a config key");
  gen->add_option("--env", gen_env, "environment (without --config)");
  gen->add_option("--tier", gen_tier, "data tier (without --config)");
  gen->add_option("--transitions", gen_n, "number of transitions");
  gen->add_option("--seed", gen_seed, "dataset seed");
  std::vector<std::uint64_t> gen_seeds;
  gen->add_option("--seeds", gen_seeds, "seeds (with --config)")->delimiter(',');

  // pretrain / train
  auto* pre = app.add_subcommand("pretrain", "pretrain the representation for each seed");
  ConfigArgs pre_args;
  pre_args.add(pre);
  bool pre_generate = false;
  pre->add_flag("--generate", pre_generate, "build missing datasets");

  auto* train = app.add_subcommand("train", "run the full experiment for each seed");
  ConfigArgs train_args;
  train_args.add(train);
  bool train_resume = false, train_generate = false;
  std::int64_t halt_after = -1;
  train->add_flag("--resume", train_resume, "continue from the last checkpoint");
  train->add_flag("--generate", train_generate, "build missing datasets");
  train->add_option("--halt-after", halt_after, "stop after the first checkpoint at or past this step");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "evaluate a trained run's checkpoint");
  ConfigArgs eval_args;
  eval_args.add(eval, false);
  int eval_episodes = 10;
  std::uint64_t eval_seed = 12345;
  eval->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval->add_option("--eval-seed", eval_seed, "evaluation seed");

  // sweep
  auto* sw = app.add_subcommand("sweep", "run one experiment per value of a config key");
  ConfigArgs sw_args;
  sw_args.add(sw);
  std::string sw_axis;
  std::vector<std::string> sw_values;
  bool sw_resume = false, sw_generate = false, sw_dry = false;
  sw->add_option("--axis", sw_axis, "config key to vary (factor name or section.key)")->required();
  sw->add_option("--values", sw_values, "comma-separated values")->required()->delimiter(',');
  sw->add_flag("--resume", sw_resume, "continue runs from their last checkpoint");
  sw->add_flag("--generate", sw_generate, "build missing datasets");
  sw->add_flag("--dry-run", sw_dry, "validate and list the configs only");

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "mean and standard error of final scores");
  std::vector<std::string> agg_paths;
  std::string agg_json;
  agg->add_option("paths", agg_paths, "run directories or record.json files")->required();
  agg->add_option("--json", agg_json, "also write the report as JSON");

  // emit-plotdata
  auto* plot = app.add_subcommand("emit-plotdata", "write tidy learning-curve CSVs, one per track");
  std::vector<std::string> plot_paths;
  std::string plot_out = "plotdata";
  plot->add_option("paths", plot_paths, "run directories or record.json files")->required();
  plot->add_option("--out", plot_out, "output directory");

  // dataset inspect
  auto* ds = app.add_subcommand("dataset", "dataset utilities");
  ds->require_subcommand(1);
  auto* inspect = ds->add_subcommand("inspect", "print a dataset summary");
  std::string inspect_path;
  inspect->add_option("path", inspect_path, "dataset file")->required();

  // reference-returns
  auto* ref = app.add_subcommand("reference-returns", "recompute random/expert reference returns");
  int ref_episodes = 1000;
  std::uint64_t ref_seed = 0;
  std::string ref_out;
  ref->add_option("--episodes", ref_episodes, "Monte-Carlo episodes per policy");
  ref->add_option("--seed", ref_seed, "seed");
  ref->add_option("--output", ref_out, "write an INI file instead of printing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  std::ostream* log = quiet ? nullptr : &std::cerr;

  try {
    if (*gen) {
      if (!gen_config.empty()) {
        ConfigArgs a;
        a.config = gen_config;
        a.overrides = gen_overrides;
        a.seeds = gen_seeds;
        const orpl::ExperimentConfig cfg = a.load();
        for (std::uint64_t s : cfg.seeds) {
          if (cfg.track == orpl::Track::kImitation)
            orpl::load_or_generate_demonstrations(cfg.env, cfg.data.expert_transitions, s, true);
          if (cfg.track == orpl::Track::kOfflineRl || cfg.uses_pretraining()) orpl::pretraining_dataset(cfg, s, true);
          if (log) *log << "datasets ready for seed " << s << " in " << orpl::data_root().string() << "\n";
        }
      } else {
        if (gen_env.empty() || gen_tier.empty()) throw orpl::ValidationError("generate-data needs --config or --env and --tier");
        const orpl::Tier tier = orpl::parse_tier(gen_tier);
        orpl::load_or_generate(gen_env, tier, gen_n, static_cast<std::uint64_t>(gen_seed), 0, true);
        std::cout << (orpl::data_root() / orpl::dataset_file_name(gen_env, tier, gen_n, gen_seed, 0)).string() << "\n";
      }
      return kExitOk;
    }
    if (*pre) {
      const orpl::ExperimentConfig cfg = pre_args.load();
      if (!cfg.uses_pretraining()) throw orpl::ValidationError("frontend '" + orpl::to_string(cfg.frontend) + "' has no pretraining phase");
      int code = kExitOk;
      for (std::uint64_t s : cfg.seeds) {
        const fs::path dir = orpl::prepare_run_directory(cfg, s);
        const orpl::TrajectoryDataset data = orpl::pretraining_dataset(cfg, s, pre_generate);
        const orpl::PretrainOutcome o = orpl::pretrain_representation(cfg, s, data, dir, log);
        std::cout << cfg.label() << " seed " << s << ": " << (o.diverged ? "diverged [" + o.message + "]" : "pretrained")
                  << "\n";
        if (o.diverged) code = kExitDiverged;
      }
      return code;
    }
    if (*train) {
      const orpl::ExperimentConfig cfg = train_args.load();
      orpl::RunOptions opt;
      opt.resume = train_resume;
      opt.generate = train_generate;
      if (halt_after >= 0) opt.halt_after_step = halt_after;
      opt.log = log;
      const auto records = orpl::run_experiment(cfg, opt);
      print_records(records);
      return status_exit_code(records);
    }
    if (*eval) {
      const orpl::ExperimentConfig cfg = eval_args.load();
      if (cfg.seeds.size() != 1) throw orpl::ValidationError("evaluate needs exactly one seed (--seed)");
      const orpl::EvalResult r = orpl::evaluate_run(cfg, cfg.seeds.front(), eval_seed, eval_episodes);
      nlohmann::json j{{"mean_normalized_score", r.mean_score}, {"mean_return", r.mean_return},
                       {"scores", r.scores}, {"returns", r.returns}};
      std::cout << j.dump(2) << "\n";
      return kExitOk;
    }
    if (*sw) {
      const orpl::ExperimentConfig base = sw_args.load();
      const auto configs = orpl::sweep_configs(base, sw_axis, sw_values);
      if (sw_dry) {
        for (const auto& c : configs) std::cout << c.config_id() << "\n";
        return kExitOk;
      }
      orpl::RunOptions opt;
      opt.resume = sw_resume;
      opt.generate = sw_generate;
      opt.log = log;
      const auto records = orpl::sweep(base, sw_axis, sw_values, opt);
      print_records(records);
      std::cout << "\n" << orpl::aggregate(records).table();
      return status_exit_code(records);
    }
    if (*agg) {
      std::vector<fs::path> roots(agg_paths.begin(), agg_paths.end());
      const orpl::AggregateReport report = orpl::aggregate(orpl::load_records(roots));
      std::cout << report.table();
      if (!agg_json.empty()) {
        std::ofstream os(agg_json);
        if (!os) throw orpl::IoError("cannot write " + agg_json);
        os << report.to_json() << "\n";
      }
      return kExitOk;
    }
    if (*plot) {
      std::vector<fs::path> roots(plot_paths.begin(), plot_paths.end());
      for (const auto& p : orpl::emit_plotdata(orpl::load_records(roots), plot_out)) std::cout << p.string() << "\n";
      return kExitOk;
    }
    if (*inspect) {
      print_summary(orpl::load_dataset(inspect_path));
      return kExitOk;
    }
    if (*ref) {
      std::map<std::string, orpl::ReferenceReturns> refs;
      for (const auto& env : orpl::env_names()) refs[env] = orpl::compute_reference_returns(env, ref_episodes, ref_seed);
      const orpl::ScoreNormalizer norm(refs);
      const std::string header = "Monte-Carlo anchors over " + std::to_string(ref_episodes) + " episodes, seed " +
                                 std::to_string(ref_seed);
      if (!ref_out.empty()) {
        norm.save(ref_out, header);
      } else {
        for (const auto& [env, r] : refs)
          std::cout << env << " random " << std::setprecision(17) << r.random << " expert " << r.expert << "\n";
      }
      return kExitOk;
    }
  } catch (const orpl::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const orpl::ConfigurationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const orpl::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const orpl::FormatError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const orpl::IntegrityError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitOk;
}
