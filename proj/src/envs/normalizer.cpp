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

#include "orpl/envs/normalizer.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "orpl/envs/policy.hpp"
#include "orpl/numerics/errors.hpp"

#ifndef ORPL_REFERENCE_FILE
#define ORPL_REFERENCE_FILE "configs/reference_returns.ini"
#endif

namespace orpl {

ScoreNormalizer::ScoreNormalizer(std::map<std::string, ReferenceReturns> refs) : refs_(std::move(refs)) {
  for (const auto& [env, r] : refs_)
    if (!(r.expert > r.random)) throw ConfigurationError("reference returns for '" + env + "': expert <= random");
}

ScoreNormalizer ScoreNormalizer::load(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw IoError("cannot read reference returns: " + std::string(e.what()));
  }
  std::map<std::string, ReferenceReturns> refs;
  for (const auto& [section, body] : tree) {
    try {
      refs[section] = {body.get<double>("random"), body.get<double>("expert")};
    } catch (const pt::ptree_error& e) {
      throw FormatError("reference returns section '" + section + "': " + e.what());
    }
  }
  return ScoreNormalizer(std::move(refs));
}

void ScoreNormalizer::save(const std::filesystem::path& path, const std::string& header_comment) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  std::istringstream lines(header_comment);
  for (std::string line; std::getline(lines, line);) os << "; " << line << "\n";
  os << std::setprecision(17);
  for (const auto& [env, r] : refs_) os << "\n[" << env << "]\nrandom = " << r.random << "\nexpert = " << r.expert << "\n";
}

const ReferenceReturns& ScoreNormalizer::reference(const std::string& env) const {
  auto it = refs_.find(env);
  if (it == refs_.end()) throw MissingReferenceError("no reference returns for '" + env + "'");
  return it->second;
}

double ScoreNormalizer::normalize(const std::string& env, double raw_return) const {
  const ReferenceReturns& r = reference(env);
  return 100.0 * (raw_return - r.random) / (r.expert - r.random);
}

ReferenceReturns compute_reference_returns(const std::string& env_name, int episodes, std::uint64_t seed) {
  auto env = make_env(env_name);
  UniformRandomPolicy random(env->spec().action_dim);
  ControllerPolicy expert(scripted_expert(env_name));
  ReferenceReturns r;
  for (int i = 0; i < episodes; ++i) {
    Rng a = make_rng(seed, Stream::kEval, static_cast<std::uint64_t>(i));
    r.random += run_episode(*env, random, a).total_return;
    Rng b = make_rng(seed, Stream::kEval, static_cast<std::uint64_t>(i));
    r.expert += run_episode(*env, expert, b).total_return;
  }
  r.random /= episodes;
  r.expert /= episodes;
  return r;
}

std::filesystem::path default_reference_path() {
  if (const char* p = std::getenv("ORPL_REFERENCE_FILE")) return p;
  return ORPL_REFERENCE_FILE;
}

const ScoreNormalizer& default_normalizer() {
  static const ScoreNormalizer n = ScoreNormalizer::load(default_reference_path());
  return n;
}

}  // namespace orpl
