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

#include "orpl/harness/run.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "orpl/downstream/evaluate.hpp"
#include "orpl/numerics/errors.hpp"

#ifndef ORPL_CODE_VERSION
#define ORPL_CODE_VERSION "unknown"
#endif

namespace orpl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kCompleted: return "completed";
    case RunStatus::kDiverged: return "diverged";
    case RunStatus::kFailed: return "failed";
    case RunStatus::kInterrupted: return "interrupted";
  }
  return "failed";
}

RunStatus parse_run_status(const std::string& s) {
  if (s == "completed") return RunStatus::kCompleted;
  if (s == "diverged") return RunStatus::kDiverged;
  if (s == "failed") return RunStatus::kFailed;
  if (s == "interrupted") return RunStatus::kInterrupted;
  throw FormatError("unknown run status '" + s + "'");
}

double final_score(const std::vector<CurvePoint>& curve, int window) {
  if (curve.empty()) throw EmptyInputError("final_score: empty learning curve");
  if (window <= 0) throw ConfigurationError("final_score: window must be positive");
  const std::size_t n = std::min(curve.size(), static_cast<std::size_t>(window));
  double s = 0.0;
  for (std::size_t i = curve.size() - n; i < curve.size(); ++i) s += curve[i].mean_score;
  return s / static_cast<double>(n);
}

std::string code_version() { return ORPL_CODE_VERSION; }

std::string RunRecord::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["config_id"] = config_id;
  j["label"] = label;
  j["config"] = config_ini;
  j["baseline_key"] = baseline_key;
  j["seed"] = seed;
  j["status"] = to_string(status);
  j["final_score"] = final_score ? json(*final_score) : json(nullptr);
  j["message"] = message;
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["code_version"] = code_version;
  json c = json::array();
  for (const auto& p : curve) c.push_back({{"step", p.step}, {"mean_normalized_score", p.mean_score}, {"scores", p.scores}});
  j["curve"] = c;
  return j.dump(2);
}

RunRecord RunRecord::from_json(const std::string& text) {
  RunRecord r;
  try {
    const json j = json::parse(text);
    if (j.at("schema_version").get<int>() != 1) throw UnsupportedVersionError("unsupported run record schema");
    r.config_id = j.at("config_id").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.config_ini = j.at("config").get<std::string>();
    r.baseline_key = j.at("baseline_key").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.status = parse_run_status(j.at("status").get<std::string>());
    if (!j.at("final_score").is_null()) r.final_score = j.at("final_score").get<double>();
    r.message = j.at("message").get<std::string>();
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    r.code_version = j.at("code_version").get<std::string>();
    for (const auto& p : j.at("curve"))
      r.curve.push_back({p.at("step").get<std::int64_t>(), p.at("mean_normalized_score").get<double>(),
                         p.at("scores").get<std::vector<double>>()});
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

fs::path run_directory(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.out / cfg.config_id() / ("seed_" + std::to_string(seed));
}

std::string demonstrations_file_name(const std::string& env, std::int64_t n, std::uint64_t seed) {
  return env + "-demos-n" + std::to_string(n) + "-s" + std::to_string(seed) + ".orpl";
}

namespace {

TrajectoryDataset load_or_build(const fs::path& path, bool generate, const std::function<TrajectoryDataset()>& build) {
  if (fs::exists(path)) return load_dataset(path);
  if (!generate)
    throw IoError("dataset " + path.string() + " is missing; run generate-data first or pass --generate");
  TrajectoryDataset ds = build();
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  save_dataset(tmp, ds);
  fs::rename(tmp, path);
  return ds;
}

void save_atomically(const fs::path& path, const Checkpoint& ckpt) {
  const fs::path tmp = path.string() + ".tmp";
  write_checkpoint(tmp, ckpt);
  fs::rename(tmp, path);
}

void write_text_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw IoError("cannot write " + tmp.string());
    os << text;
    if (!os) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void append_curve_row(const fs::path& path, const CurvePoint& p) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot append to " + path.string());
  os << p.step << "," << format_double(p.mean_score);
  for (double s : p.scores) os << "," << format_double(s);
  os << "\n";
  if (!os) throw IoError("failed writing " + path.string());
}

void export_repr(const ReprStores<float>& s, Checkpoint& ckpt) {
  export_store(s.phi, "phi", ckpt);
  export_store(s.heads, "heads", ckpt);
  export_store(s.target, "target", ckpt);
  export_store(s.temperature, "temperature", ckpt);
}

void import_repr(ReprStores<float>& s, const Checkpoint& ckpt) {
  import_store(s.phi, "phi", ckpt);
  import_store(s.heads, "heads", ckpt);
  import_store(s.target, "target", ckpt);
  import_store(s.temperature, "temperature", ckpt);
}

std::shared_ptr<Objective<float>> build_objective(const ExperimentConfig& cfg) {
  auto env = make_env(cfg.env);
  const TransformerSpec t = cfg.trunk_spec();
  return make_objective<float>(cfg.objective, cfg.objective_config(env->spec().state_dim, env->spec().action_dim),
                               cfg.ablation_config(), cfg.is_acl() ? &t : nullptr);
}

std::unique_ptr<Env> evaluation_env(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto env = make_env(cfg.env);
  if (cfg.track != Track::kOnlineRl) return env;
  const Index dim = static_cast<Index>(seed % static_cast<std::uint64_t>(env->spec().state_dim));
  return std::make_unique<MaskWrapper>(std::move(env), dim, true);
}

// Everything a run needs besides its loop state.
struct RunContext {
  TrajectoryDataset data;    // BRAC data / pretraining data
  TrajectoryDataset expert;  // BC demonstrations
  std::unique_ptr<Env> eval_env;
  std::unique_ptr<Learner<float>> learner;
  bool pretrain_diverged = false;
  std::string message;
};

std::unique_ptr<RunContext> make_context(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir,
                                         bool generate, std::ostream* log) {
  auto ctx = std::make_unique<RunContext>();
  ctx->eval_env = evaluation_env(cfg, seed);
  const Index sd = ctx->eval_env->spec().state_dim;
  if (cfg.track == Track::kImitation)
    ctx->expert = load_or_generate_demonstrations(cfg.env, cfg.data.expert_transitions, seed, generate);
  if (cfg.track == Track::kOfflineRl || cfg.uses_pretraining()) ctx->data = pretraining_dataset(cfg, seed, generate);

  std::optional<Frontend<float>> frontend;
  if (cfg.frontend == FrontendMode::kRaw) {
    frontend.emplace(sd);
  } else if (cfg.uses_pretraining()) {
    PretrainOutcome p = pretrain_representation(cfg, seed, ctx->data, dir, log);
    if (p.diverged) {
      ctx->pretrain_diverged = true;
      ctx->message = p.message;
      return ctx;
    }
    frontend.emplace(cfg.frontend, p.objective, p.stores, cfg.aux_weight, p.stats);
  } else {
    auto objective = build_objective(cfg);
    ReprStores<float> stores;
    Rng rng = make_rng(seed, Stream::kInit, 100);
    objective->init(stores, rng);
    RewardStats stats;
    if (cfg.track == Track::kImitation)
      stats = truncate_transitions(ctx->expert, cfg.data.expert_transitions).reward_stats();
    else if (cfg.track == Track::kOfflineRl)
      stats = ctx->data.reward_stats();
    frontend.emplace(cfg.frontend, objective, stores, cfg.aux_weight, stats);
  }
  switch (cfg.track) {
    case Track::kImitation:
      ctx->learner = std::make_unique<BcLearner<float>>(std::move(*frontend), ctx->expert,
                                                        cfg.data.expert_transitions, cfg.learner, seed);
      break;
    case Track::kOfflineRl:
      ctx->learner = std::make_unique<BracLearner<float>>(std::move(*frontend), ctx->data, cfg.learner, seed);
      break;
    case Track::kOnlineRl:
      ctx->learner = std::make_unique<SacLearner<float>>(std::move(*frontend), ObservationEnv(ctx->eval_env->clone()),
                                                         cfg.learner, seed);
      break;
  }
  return ctx;
}

}  // namespace

TrajectoryDataset load_or_generate(const std::string& env, Tier tier, std::int64_t n, std::uint64_t seed,
                                   std::int64_t expert_prefix, bool generate) {
  return load_or_build(data_root() / dataset_file_name(env, tier, n, seed, expert_prefix), generate,
                       [&] { return build_dataset(env, tier, n, seed, expert_prefix); });
}

TrajectoryDataset load_or_generate_demonstrations(const std::string& env, std::int64_t n, std::uint64_t seed,
                                                  bool generate) {
  return load_or_build(data_root() / demonstrations_file_name(env, n, seed), generate,
                       [&] { return expert_demonstrations(env, n, seed); });
}

TrajectoryDataset pretraining_dataset(const ExperimentConfig& cfg, std::uint64_t seed, bool generate) {
  const std::int64_t prefix = cfg.track == Track::kImitation ? cfg.data.expert_transitions : 0;
  TrajectoryDataset ds = load_or_generate(cfg.env, cfg.tier, cfg.data.dataset_transitions, seed, prefix, generate);
  if (cfg.track == Track::kOnlineRl) ds = mask_observations(ds, split_seed(seed, static_cast<std::uint64_t>(Stream::kDataset), 1));
  return ds;
}

PretrainOutcome pretrain_representation(const ExperimentConfig& cfg, std::uint64_t seed,
                                        const TrajectoryDataset& data, const fs::path& dir, std::ostream* log) {
  PretrainOutcome out;
  out.objective = build_objective(cfg);
  out.stats = data.reward_stats();
  {
    Rng rng = make_rng(seed, Stream::kInit, 100);
    out.objective->init(out.stores, rng);
  }
  const fs::path done = dir / "pretrain.ckpt";
  const fs::path partial = dir / "pretrain_partial.ckpt";
  if (fs::exists(done)) {
    import_repr(out.stores, read_checkpoint(done));
    return out;
  }
  std::int64_t start = 0;
  if (fs::exists(partial)) {
    const Checkpoint ckpt = read_checkpoint(partial);
    import_repr(out.stores, ckpt);
    start = static_cast<std::int64_t>(get_scalar(ckpt, "pretrain/step"));
  }
  fs::create_directories(dir);
  const SubTrajectorySampler sampler(data, cfg.window(), cfg.pretrain.gamma);
  const auto lr = static_cast<float>(out.objective->learning_rate());
  const auto trainable = out.stores.trainable();
  for (std::int64_t step = start + 1; step <= cfg.pretrain.steps; ++step) {
    Rng rng = make_rng(seed, Stream::kPretrain, static_cast<std::uint64_t>(step));
    const SubTrajectoryBatch<float> batch = sampler.sample(cfg.pretrain.batch, rng);
    Tape<float> tape;
    const ObjectiveOutput<float> o = out.objective->loss(tape, out.stores, batch, rng);
    for (auto* s : trainable) s->zero_grad();
    tape.backward(o.loss);
    const float value = o.loss.item();
    bool finite = std::isfinite(value);
    for (auto* s : trainable) finite = finite && s->grads_finite();
    if (!finite) {
      out.diverged = true;
      out.message = "pretraining produced non-finite values at step " + std::to_string(step);
      return out;
    }
    for (auto* s : trainable) s->adam_step(lr);
    out.objective->after_update(out.stores);
    if (log && (step % std::max<std::int64_t>(1, cfg.pretrain.steps / 10) == 0))
      *log << "  pretrain " << cfg.objective << " step " << step << "/" << cfg.pretrain.steps << " loss " << value
           << "\n";
    if (step % cfg.pretrain.checkpoint_every == 0 && step < cfg.pretrain.steps) {
      Checkpoint ckpt;
      export_repr(out.stores, ckpt);
      put_scalar(ckpt, "pretrain/step", static_cast<double>(step));
      save_atomically(partial, ckpt);
    }
  }
  Checkpoint ckpt;
  export_repr(out.stores, ckpt);
  save_atomically(done, ckpt);
  fs::remove(partial);
  return out;
}

std::vector<CurvePoint> read_curve(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::vector<CurvePoint> curve;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    CurvePoint p;
    std::getline(ss, cell, ',');
    p.step = std::stoll(cell);
    std::getline(ss, cell, ',');
    p.mean_score = std::stod(cell);
    while (std::getline(ss, cell, ',')) p.scores.push_back(std::stod(cell));
    curve.push_back(std::move(p));
  }
  return curve;
}

void write_curve(const fs::path& path, const std::vector<CurvePoint>& curve, int episodes) {
  std::ostringstream os;
  os << "step,mean_normalized_score";
  for (int i = 0; i < episodes; ++i) os << ",score_" << i;
  os << "\n";
  for (const auto& p : curve) {
    os << p.step << "," << format_double(p.mean_score);
    for (double s : p.scores) os << "," << format_double(s);
    os << "\n";
  }
  write_text_atomically(path, os.str());
}

fs::path prepare_run_directory(const ExperimentConfig& cfg, std::uint64_t seed) {
  const fs::path dir = run_directory(cfg, seed);
  ExperimentConfig one = cfg;
  one.seeds = {seed};
  const std::string snapshot = one.to_ini(true);
  const fs::path config_path = dir / "config.ini";
  if (fs::exists(config_path) && read_text(config_path) != snapshot)
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) fs::remove(e.path());
  fs::create_directories(dir);
  write_text_atomically(config_path, snapshot);
  return dir;
}

RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostream* log = options.log;
  const fs::path dir = run_directory(cfg, seed);
  RunRecord rec;
  rec.config_id = cfg.config_id();
  rec.label = cfg.label();
  rec.config_ini = cfg.to_ini(false);
  rec.baseline_key = cfg.baseline_key();
  rec.seed = seed;
  rec.code_version = code_version();

  const fs::path record_path = dir / "record.json";
  const fs::path ckpt_path = dir / "checkpoint.ckpt";
  const fs::path curve_path = dir / "curve.csv";
  if (fs::exists(record_path)) {
    RunRecord old = RunRecord::from_json(read_text(record_path));
    if (old.config_ini == rec.config_ini &&
        (old.status == RunStatus::kCompleted || old.status == RunStatus::kDiverged)) {
      if (log) *log << "skipping " << rec.config_id << " seed " << seed << ": already " << to_string(old.status) << "\n";
      old.skipped = true;
      return old;
    }
  }
  prepare_run_directory(cfg, seed);
  const bool resume = options.resume && fs::exists(ckpt_path) && fs::exists(curve_path);
  if (!resume)
    for (const auto& f : {"checkpoint.ckpt", "curve.csv", "record.json"}) fs::remove(dir / f);

  auto finish = [&](RunStatus status, const std::string& message) {
    rec.status = status;
    rec.message = message;
    if (status == RunStatus::kCompleted) rec.final_score = final_score(rec.curve, cfg.budget.final_window);
    rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (status != RunStatus::kInterrupted) write_text_atomically(record_path, rec.to_json());
    if (log)
      *log << rec.label << " seed " << seed << ": " << to_string(status)
           << (rec.final_score ? " final score " + format_double(*rec.final_score) : std::string())
           << (message.empty() ? std::string() : " (" + message + ")") << "\n";
    return rec;
  };

  std::unique_ptr<RunContext> ctx = make_context(cfg, seed, dir, options.generate, log);
  if (ctx->pretrain_diverged) return finish(RunStatus::kDiverged, ctx->message);
  Learner<float>& learner = *ctx->learner;

  std::int64_t start = 0;
  if (resume) {
    const Checkpoint ckpt = read_checkpoint(ckpt_path);
    learner.load(ckpt);
    start = static_cast<std::int64_t>(get_scalar(ckpt, "run/step"));
    for (auto& p : read_curve(curve_path))
      if (p.step <= start) rec.curve.push_back(std::move(p));
    if (log) *log << "resuming " << rec.label << " seed " << seed << " from step " << start << "\n";
  }
  write_curve(curve_path, rec.curve, cfg.budget.eval_episodes);

  EvalOptions eval_opts;
  eval_opts.episodes = cfg.budget.eval_episodes;
  eval_opts.history_length = learner.history_length();
  eval_opts.history_stats = learner.frontend().history_stats();
  try {
    for (std::int64_t step = start + 1; step <= cfg.budget.downstream_steps; ++step) {
      learner.update(step);
      if (learner.diverged()) return finish(RunStatus::kDiverged, learner.divergence_reason());
      if (step % cfg.budget.eval_every != 0) continue;
      const std::uint64_t eval_seed =
          split_seed(seed, static_cast<std::uint64_t>(Stream::kEval), static_cast<std::uint64_t>(step / cfg.budget.eval_every));
      EvalResult er;
      try {
        er = evaluate_policy(learner.policy(), *ctx->eval_env, eval_seed, eval_opts);
      } catch (const FinitenessError& e) {
        return finish(RunStatus::kDiverged, std::string("evaluation: ") + e.what());
      }
      CurvePoint p{step, er.mean_score, er.scores};
      append_curve_row(curve_path, p);
      rec.curve.push_back(std::move(p));
      Checkpoint ckpt;
      learner.save(ckpt);
      put_scalar(ckpt, "run/step", static_cast<double>(step));
      save_atomically(ckpt_path, ckpt);
      if (log) *log << "  " << rec.label << " seed " << seed << " step " << step << " score " << er.mean_score << "\n";
      if (options.halt_after_step && step >= *options.halt_after_step && step < cfg.budget.downstream_steps)
        return finish(RunStatus::kInterrupted, "halted after step " + std::to_string(step));
    }
  } catch (const IoError&) {
    throw;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    return finish(RunStatus::kFailed, e.what());
  }
  if (rec.curve.empty()) return finish(RunStatus::kFailed, "no evaluation points");
  return finish(RunStatus::kCompleted, "");
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  std::vector<RunRecord> out;
  for (std::uint64_t seed : cfg.seeds) out.push_back(run_seed(cfg, seed, options));
  return out;
}

EvalResult evaluate_run(const ExperimentConfig& cfg, std::uint64_t seed, std::uint64_t eval_seed, int episodes) {
  const fs::path dir = run_directory(cfg, seed);
  const fs::path ckpt_path = dir / "checkpoint.ckpt";
  if (!fs::exists(ckpt_path)) throw IoError("no checkpoint in " + dir.string());
  std::unique_ptr<RunContext> ctx = make_context(cfg, seed, dir, false, nullptr);
  if (ctx->pretrain_diverged) throw DataError("run diverged during pretraining");
  ctx->learner->load(read_checkpoint(ckpt_path));
  EvalOptions opt;
  opt.episodes = episodes;
  opt.history_length = ctx->learner->history_length();
  opt.history_stats = ctx->learner->frontend().history_stats();
  return evaluate_policy(ctx->learner->policy(), *ctx->eval_env, eval_seed, opt);
}

}  // namespace orpl
