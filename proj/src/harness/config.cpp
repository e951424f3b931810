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

#include "orpl/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <iomanip>
#include <set>
#include <sstream>

#include "orpl/numerics/errors.hpp"

namespace orpl {

Track parse_track(const std::string& name) {
  if (name == "imitation") return Track::kImitation;
  if (name == "offline_rl") return Track::kOfflineRl;
  if (name == "online_rl") return Track::kOnlineRl;
  throw ValidationError("unknown track '" + name + "' (expected imitation, offline_rl or online_rl)");
}

std::string to_string(Track track) {
  switch (track) {
    case Track::kImitation: return "imitation";
    case Track::kOfflineRl: return "offline_rl";
    case Track::kOnlineRl: return "online_rl";
  }
  return "unknown";
}

const std::vector<Tier>& allowed_tiers(Track track) {
  static const std::vector<Tier> imitation{Tier::kMedium, Tier::kMediumReplay};
  static const std::vector<Tier> rl{Tier::kExpert, Tier::kMediumExpert, Tier::kMedium, Tier::kMediumReplay};
  return track == Track::kImitation ? imitation : rl;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void read_into(const std::filesystem::path& path, ConfigSections& out, std::vector<std::filesystem::path>& stack) {
  const auto canonical = std::filesystem::weakly_canonical(path);
  if (std::find(stack.begin(), stack.end(), canonical) != stack.end())
    throw ValidationError("config include cycle through " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    if (!std::filesystem::exists(path)) throw IoError("cannot read config " + path.string());
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  stack.push_back(canonical);
  if (auto inc = tree.get_optional<std::string>("include"); inc && tree.get_child("include").empty()) {
    for (const auto& item : split_list(*inc)) read_into(path.parent_path() / item, out, stack);
  }
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name == "include") continue;
      throw ValidationError("config key '" + name + "' must live inside a section");
    }
    for (const auto& [key, value] : node) out[name][key] = trim(value.data());
  }
  stack.pop_back();
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  is >> v;
  if (!is || !is.eof()) throw ValidationError("'" + key + "': cannot parse '" + value + "' as a number");
  return v;
}

bool parse_flag(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "t" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "f" || v == "0" || v == "no") return false;
  throw ValidationError("'" + key + "': expected true/false, got '" + value + "'");
}

std::vector<Index> parse_dims(const std::string& key, const std::string& value) {
  std::vector<Index> out;
  for (const auto& item : split_list(value)) {
    const auto d = parse_number<long long>(key, item);
    if (d <= 0) throw ValidationError("'" + key + "': layer widths must be positive");
    out.push_back(static_cast<Index>(d));
  }
  return out;
}

std::string dims_to_string(const std::vector<Index>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

const std::vector<std::string>& implying_factors() {
  static const std::vector<std::string> f{"predict_action", "predict_reward", "momentum", "context_embedding"};
  return f;
}

bool is_factor(const std::string& key) {
  const auto& names = AblationFactors::names();
  return std::find(names.begin(), names.end(), key) != names.end();
}

}  // namespace

ConfigSections read_config_sections(const std::filesystem::path& path) {
  ConfigSections out;
  std::vector<std::filesystem::path> stack;
  read_into(path, out, stack);
  return out;
}

void ExperimentConfig::set(const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot != std::string::npos) return set(dotted_key.substr(0, dot), dotted_key.substr(dot + 1), value);
  if (is_factor(dotted_key) || dotted_key == "k_plus_1") return set("ablation", dotted_key, value);
  if (dotted_key == "repr_dim") return set("pretrain", dotted_key, value);
  throw ValidationError("unknown setting '" + dotted_key + "' (use section.key)");
}

void ExperimentConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  const std::string where = section + "." + key;
  auto positive = [&](auto v) {
    if (v <= 0) throw ValidationError("'" + where + "' must be positive");
    return v;
  };
  if (section == "experiment") {
    if (key == "track") {
      track = parse_track(value);
    } else if (key == "env") {
      env = value;
    } else if (key == "tier") {
      try {
        tier = parse_tier(value);
      } catch (const Error& e) {
        throw ValidationError(e.what());
      }
    } else if (key == "objective") {
      objective = value;
    } else if (key == "frontend") {
      try {
        frontend = parse_frontend_mode(value);
      } catch (const Error& e) {
        throw ValidationError(e.what());
      }
      if (is_acl()) {
        ablation.finetune = frontend == FrontendMode::kFinetune;
        ablation.auxiliary_loss = frontend == FrontendMode::kAuxiliary;
      }
    } else if (key == "aux_weight") {
      aux_weight = parse_number<double>(where, value);
    } else {
      throw ValidationError("unknown setting '" + where + "'");
    }
  } else if (section == "run") {
    if (key == "seeds") {
      seeds.clear();
      for (const auto& s : split_list(value)) {
        const auto v = parse_number<long long>(where, s);
        if (v < 0) throw ValidationError("seeds must be non-negative");
        seeds.push_back(static_cast<std::uint64_t>(v));
      }
    } else if (key == "out") {
      out = value;
    } else {
      throw ValidationError("unknown setting '" + where + "'");
    }
  } else if (section == "ablation") {
    if (key == "k_plus_1") {
      pretrain.window = positive(parse_number<long long>(where, value));
    } else if (key == "repr_dim") {
      pretrain.repr_dim = positive(parse_number<long long>(where, value));
    } else if (is_factor(key)) {
      ablation[key] = parse_flag(where, value);
      if (std::find(explicit_factors.begin(), explicit_factors.end(), key) == explicit_factors.end())
        explicit_factors.push_back(key);
      if (is_acl() && (key == "finetune" || key == "auxiliary_loss")) {
        frontend = ablation.auxiliary_loss ? FrontendMode::kAuxiliary
                   : ablation.finetune    ? FrontendMode::kFinetune
                                          : FrontendMode::kFrozen;
      }
    } else {
      throw ValidationError("unknown ablation factor '" + key + "'");
    }
  } else if (section == "pretrain") {
    if (key == "steps") pretrain.steps = parse_number<long long>(where, value);
    else if (key == "batch") pretrain.batch = positive(parse_number<long long>(where, value));
    else if (key == "learning_rate") pretrain.learning_rate = parse_number<double>(where, value);
    else if (key == "repr_dim") pretrain.repr_dim = positive(parse_number<long long>(where, value));
    else if (key == "phi_hidden") pretrain.phi_hidden = parse_dims(where, value);
    else if (key == "head_hidden") pretrain.head_hidden = parse_dims(where, value);
    else if (key == "activation") {
      try {
        pretrain.activation = parse_activation(value);
      } catch (const Error& e) {
        throw ValidationError(e.what());
      }
    } else if (key == "window") pretrain.window = positive(parse_number<long long>(where, value));
    else if (key == "gamma") pretrain.gamma = parse_number<double>(where, value);
    else if (key == "trunk_width") pretrain.trunk_width = positive(parse_number<long long>(where, value));
    else if (key == "trunk_heads") pretrain.trunk_heads = positive(parse_number<long long>(where, value));
    else if (key == "trunk_head_dim") pretrain.trunk_head_dim = positive(parse_number<long long>(where, value));
    else if (key == "trunk_ff") pretrain.trunk_ff = positive(parse_number<long long>(where, value));
    else if (key == "checkpoint_every") pretrain.checkpoint_every = positive(parse_number<long long>(where, value));
    else throw ValidationError("unknown setting '" + where + "'");
  } else if (section == "learner") {
    LearnerConfig& l = learner;
    if (key == "batch") l.batch = positive(parse_number<long long>(where, value));
    else if (key == "hidden") l.hidden = parse_dims(where, value);
    else if (key == "activation") {
      try {
        l.activation = parse_activation(value);
      } catch (const Error& e) {
        throw ValidationError(e.what());
      }
    } else if (key == "learning_rate") l.learning_rate = parse_number<double>(where, value);
    else if (key == "policy_learning_rate") l.policy_learning_rate = parse_number<double>(where, value);
    else if (key == "gamma") l.gamma = parse_number<double>(where, value);
    else if (key == "target_rate") l.target_rate = parse_number<double>(where, value);
    else if (key == "kl_weight") l.kl_weight = parse_number<double>(where, value);
    else if (key == "behavior_steps") l.behavior_steps = parse_number<long long>(where, value);
    else if (key == "q_limit") l.q_limit = parse_number<double>(where, value);
    else if (key == "replay_capacity") l.replay_capacity = parse_number<long long>(where, value);
    else if (key == "random_steps") l.random_steps = parse_number<long long>(where, value);
    else if (key == "aux_batch") l.aux_batch = positive(parse_number<long long>(where, value));
    else if (key == "nan_gradient_step") l.nan_gradient_step = parse_number<long long>(where, value);
    else throw ValidationError("unknown setting '" + where + "'");
  } else if (section == "budget") {
    if (key == "downstream_steps") budget.downstream_steps = parse_number<long long>(where, value);
    else if (key == "eval_every") budget.eval_every = parse_number<long long>(where, value);
    else if (key == "eval_episodes") budget.eval_episodes = parse_number<int>(where, value);
    else if (key == "final_window") budget.final_window = parse_number<int>(where, value);
    else throw ValidationError("unknown setting '" + where + "'");
  } else if (section == "data") {
    if (key == "dataset_transitions") data.dataset_transitions = parse_number<long long>(where, value);
    else if (key == "expert_transitions") data.expert_transitions = parse_number<long long>(where, value);
    else throw ValidationError("unknown setting '" + where + "'");
  } else {
    throw ValidationError("unknown config section [" + section + "]");
  }
}

ExperimentConfig ExperimentConfig::from_sections(const ConfigSections& sections) {
  ExperimentConfig c;
  std::optional<FrontendMode> explicit_frontend;
  if (auto it = sections.find("experiment"); it != sections.end()) {
    // Objective before frontend so the ACL factor sync sees it.
    for (const char* key : {"track", "env", "tier", "objective", "frontend"}) {
      if (auto kv = it->second.find(key); kv != it->second.end()) c.set("experiment", key, kv->second);
    }
    if (it->second.count("frontend")) explicit_frontend = c.frontend;
    for (const auto& [k, v] : it->second)
      if (k != "track" && k != "env" && k != "tier" && k != "objective" && k != "frontend") c.set("experiment", k, v);
  }
  for (const auto& [section, kv] : sections) {
    if (section == "experiment") continue;
    for (const auto& [k, v] : kv) c.set(section, k, v);
  }
  if (c.is_acl() && !explicit_frontend && !c.ablation.finetune && !c.ablation.auxiliary_loss)
    c.frontend = FrontendMode::kFrozen;
  if (explicit_frontend && *explicit_frontend != c.frontend)
    throw ValidationError("frontend = " + to_string(*explicit_frontend) +
                          " contradicts the finetune/auxiliary_loss factors");
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  return from_sections(read_config_sections(path));
}

Index ExperimentConfig::window() const {
  if (pretrain.window > 0) return pretrain.window;
  return is_acl() ? 8 : 2;
}

AblationConfig ExperimentConfig::ablation_config() const {
  return AblationConfig(ablation, window(), pretrain.repr_dim);
}

ObjectiveConfig ExperimentConfig::objective_config(Index state_dim, Index action_dim) const {
  ObjectiveConfig c;
  c.name = objective;
  c.state_dim = state_dim;
  c.action_dim = action_dim;
  c.repr_dim = pretrain.repr_dim;
  c.phi_hidden = pretrain.phi_hidden;
  c.head_hidden = pretrain.head_hidden;
  c.activation = pretrain.activation;
  c.window = window();
  c.gamma = pretrain.gamma;
  c.learning_rate = pretrain.learning_rate;
  return c;
}

TransformerSpec ExperimentConfig::trunk_spec() const {
  TransformerSpec t = acl_trunk_spec(pretrain.repr_dim, window());
  if (pretrain.trunk_width > 0) t.input_dim = t.preprocess_dim = pretrain.trunk_width;
  if (pretrain.trunk_heads > 0) t.num_heads = pretrain.trunk_heads;
  if (pretrain.trunk_head_dim > 0) t.head_dim = pretrain.trunk_head_dim;
  if (pretrain.trunk_ff > 0) t.ff_dim = pretrain.trunk_ff;
  return t;
}

void ExperimentConfig::validate() const {
  const auto envs = env_names();
  if (std::find(envs.begin(), envs.end(), env) == envs.end()) throw ValidationError("unknown env '" + env + "'");
  const auto& tiers = allowed_tiers(track);
  if (std::find(tiers.begin(), tiers.end(), tier) == tiers.end())
    throw ValidationError("tier '" + to_string(tier) + "' is not part of the " + to_string(track) +
                          " track's protocol matrix");
  const auto names = objective_names();
  if (objective != "none" && std::find(names.begin(), names.end(), objective) == names.end())
    throw ValidationError("unknown objective '" + objective + "'");
  if ((frontend == FrontendMode::kRaw) != (objective == "none"))
    throw ValidationError("frontend = raw goes with objective = none, and only with it");
  if (!is_acl() && !(ablation == AblationFactors{}))
    throw ValidationError("ablation factors apply only to objective = acl");
  if (is_acl()) {
    if (ablation.finetune && ablation.auxiliary_loss)
      throw ValidationError("finetune and auxiliary_loss are mutually exclusive frontends");
    const bool explicit_embed = std::find(explicit_factors.begin(), explicit_factors.end(), "input_embed") !=
                                explicit_factors.end();
    if (explicit_embed && !ablation.input_embed) {
      for (const auto& f : implying_factors())
        if (ablation[f])
          throw ValidationError("input_embed = false conflicts with " + f +
                                " = true: that factor implies input_embed under the factor closure");
    }
  }
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ValidationError("duplicate seeds in the seed list");
  if (budget.downstream_steps <= 0) throw ValidationError("budget.downstream_steps must be positive");
  if (budget.eval_every <= 0 || budget.eval_every > budget.downstream_steps)
    throw ValidationError("budget.eval_every must lie in [1, downstream_steps]");
  if (budget.eval_episodes <= 0) throw ValidationError("budget.eval_episodes must be positive");
  if (budget.final_window <= 0) throw ValidationError("budget.final_window must be positive");
  if (track == Track::kOnlineRl) {
    const int horizon = make_env(env)->spec().horizon;
    if (budget.eval_every % horizon != 0)
      throw ValidationError("online_rl needs budget.eval_every to be a multiple of the " + std::to_string(horizon) +
                            "-step horizon (checkpoints fall between episodes)");
  }
  if (track == Track::kImitation && data.expert_transitions <= 0)
    throw ValidationError("data.expert_transitions must be positive");
  if (data.dataset_transitions <= 0) throw ValidationError("data.dataset_transitions must be positive");
  if (uses_pretraining() && pretrain.steps <= 0) throw ValidationError("pretrain.steps must be positive");
  if (!(aux_weight >= 0)) throw ValidationError("aux_weight must be non-negative");
  try {
    learner.validate();
    if (objective != "none") {
      auto e = make_env(env);
      const TransformerSpec t = trunk_spec();
      make_objective<float>(objective, objective_config(e->spec().state_dim, e->spec().action_dim),
                            ablation_config(), is_acl() ? &t : nullptr);
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
}

std::string ExperimentConfig::to_ini(bool with_run) const {
  std::ostringstream os;
  os << "[experiment]\ntrack = " << to_string(track) << "\nenv = " << env << "\ntier = " << to_string(tier)
     << "\nobjective = " << objective << "\nfrontend = " << to_string(frontend) << "\n";
  if (frontend == FrontendMode::kAuxiliary) os << "aux_weight = " << num(aux_weight) << "\n";
  if (is_acl()) {
    os << "\n[ablation]\n";
    for (const auto& n : AblationFactors::names()) os << n << " = " << (ablation[n] ? "true" : "false") << "\n";
  }
  if (objective != "none") {
    const TransformerSpec t = trunk_spec();
    os << "\n[pretrain]\n";
    if (uses_pretraining()) os << "steps = " << pretrain.steps << "\nbatch = " << pretrain.batch << "\n";
    os << "learning_rate = " << num(pretrain.learning_rate) << "\nrepr_dim = " << pretrain.repr_dim
       << "\nphi_hidden = " << dims_to_string(pretrain.phi_hidden)
       << "\nhead_hidden = " << dims_to_string(pretrain.head_hidden)
       << "\nactivation = " << to_string(pretrain.activation) << "\nwindow = " << window()
       << "\ngamma = " << num(pretrain.gamma) << "\n";
    if (is_acl())
      os << "trunk_width = " << t.input_dim << "\ntrunk_heads = " << t.num_heads << "\ntrunk_head_dim = " << t.head_dim
         << "\ntrunk_ff = " << t.ff_dim << "\n";
  }
  const LearnerConfig& l = learner;
  os << "\n[learner]\nbatch = " << l.batch << "\nhidden = " << dims_to_string(l.hidden)
     << "\nactivation = " << to_string(l.activation) << "\nlearning_rate = " << num(l.learning_rate) << "\n";
  if (track == Track::kOfflineRl)
    os << "policy_learning_rate = " << num(l.policy_learning_rate) << "\nkl_weight = " << num(l.kl_weight)
       << "\nbehavior_steps = " << l.behavior_steps << "\n";
  if (track != Track::kImitation)
    os << "gamma = " << num(l.gamma) << "\ntarget_rate = " << num(l.target_rate) << "\nq_limit = " << num(l.q_limit)
       << "\n";
  if (track == Track::kOnlineRl)
    os << "replay_capacity = " << l.replay_capacity << "\nrandom_steps = " << l.random_steps << "\n";
  if (frontend == FrontendMode::kAuxiliary) os << "aux_batch = " << l.aux_batch << "\n";
  if (l.nan_gradient_step >= 0) os << "nan_gradient_step = " << l.nan_gradient_step << "\n";
  os << "\n[budget]\ndownstream_steps = " << budget.downstream_steps << "\neval_every = " << budget.eval_every
     << "\neval_episodes = " << budget.eval_episodes << "\nfinal_window = " << budget.final_window << "\n";
  os << "\n[data]\ndataset_transitions = " << data.dataset_transitions << "\n";
  if (track == Track::kImitation) os << "expert_transitions = " << data.expert_transitions << "\n";
  if (with_run) {
    os << "\n[run]\nseeds = ";
    for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
    os << "\nout = " << out.string() << "\n";
  }
  return os.str();
}

std::string ExperimentConfig::label() const {
  std::string s = to_string(track) + "-" + env + "-" + to_string(tier) + "-";
  if (frontend == FrontendMode::kRaw) return s + "raw";
  s += objective;
  if (is_acl()) {
    std::string d = ablation_config().describe();
    std::replace(d.begin(), d.end(), ',', '+');
    s += "[" + d + "]";
  }
  return s + "-" + to_string(frontend);
}

std::string ExperimentConfig::config_id() const {
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << (fnv1a(to_ini(false)) & 0xffffffffULL);
  std::string id = label() + "-" + os.str();
  for (char& c : id)
    if (c == '[' || c == ']') c = '.';
    else if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '+' || c == '=' || c == '.'))
      c = '_';
  return id;
}

std::string ExperimentConfig::baseline_key() const {
  ExperimentConfig raw = *this;
  raw.objective = "none";
  raw.frontend = FrontendMode::kRaw;
  raw.ablation = {};
  raw.explicit_factors.clear();
  raw.aux_weight = 1.0;
  raw.learner.aux_batch = LearnerConfig{}.aux_batch;
  return raw.to_ini(false);
}

}  // namespace orpl
