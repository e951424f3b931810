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

#include "orpl/data/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "orpl/numerics/errors.hpp"

namespace orpl {

static_assert(std::endian::native == std::endian::little, "dataset files are little-endian");

Index TrajectoryDataset::state_dim() const {
  return trajectories.empty() ? 0 : trajectories.front().states.cols();
}

Index TrajectoryDataset::action_dim() const {
  return trajectories.empty() ? 0 : trajectories.front().actions.cols();
}

std::int64_t TrajectoryDataset::num_transitions() const {
  std::int64_t n = 0;
  for (const auto& t : trajectories) n += t.length();
  return n;
}

Index TrajectoryDataset::min_length() const {
  Index m = trajectories.empty() ? 0 : trajectories.front().states.rows();
  for (const auto& t : trajectories) m = std::min(m, t.states.rows());
  return m;
}

const std::string& TrajectoryDataset::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw IntegrityError("dataset metadata lacks '" + key + "'");
  return it->second;
}

void TrajectoryDataset::validate() const {
  if (trajectories.empty()) throw DataError("dataset has no trajectories");
  const Index sd = state_dim(), ad = action_dim();
  for (const auto& t : trajectories) {
    const Index T = t.actions.rows();
    if (T < 1 || t.states.rows() != T + 1 || t.rewards.rows() != T || t.rewards.cols() != 1)
      throw IntegrityError("trajectory arrays have inconsistent lengths");
    if (t.states.cols() != sd || t.actions.cols() != ad) throw IntegrityError("trajectory dims differ");
    if (!t.states.allFinite() || !t.actions.allFinite() || !t.rewards.allFinite())
      throw IntegrityError("dataset contains non-finite values");
  }
  auto check_dim = [&](const char* key, Index want) {
    auto it = metadata.find(key);
    if (it != metadata.end() && std::stoll(it->second) != want)
      throw IntegrityError(std::string("dataset ") + key + " disagrees with metadata");
  };
  check_dim("state_dim", sd);
  check_dim("action_dim", ad);
}

RewardStats TrajectoryDataset::reward_stats() const {
  auto m = metadata.find("reward_mean"), s = metadata.find("reward_std");
  if (m != metadata.end() && s != metadata.end()) return {std::stod(m->second), std::stod(s->second)};
  double sum = 0.0, sq = 0.0;
  std::int64_t n = 0;
  for (const auto& t : trajectories)
    for (Index i = 0; i < t.rewards.rows(); ++i) {
      const double r = t.rewards(i, 0);
      sum += r;
      sq += r * r;
      ++n;
    }
  if (n == 0) return {};
  RewardStats st;
  st.mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - st.mean * st.mean;
  st.std = var > 1e-12 ? std::sqrt(var) : 1.0;
  return st;
}

void TrajectoryDataset::store_reward_stats() {
  metadata.erase("reward_mean");
  metadata.erase("reward_std");
  RewardStats st = reward_stats();
  std::ostringstream a, b;
  a << std::setprecision(17) << st.mean;
  b << std::setprecision(17) << st.std;
  metadata["reward_mean"] = a.str();
  metadata["reward_std"] = b.str();
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_floats(std::ostream& os, const Matrix<float>& m) {
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IntegrityError("dataset file is truncated");
  return v;
}

Matrix<float> get_floats(std::istream& is, std::uintmax_t file_size, Index rows, Index cols) {
  const auto pos = static_cast<std::uintmax_t>(is.tellg());
  if (pos + static_cast<std::uintmax_t>(rows * cols) * sizeof(float) > file_size)
    throw IntegrityError("dataset file is truncated");
  Matrix<float> m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!is) throw IntegrityError("dataset file is truncated");
  return m;
}

std::string encode_meta(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw FormatError("metadata key/value contains a reserved character");
    out += k + "=" + v + "\n";
  }
  return out;
}

std::map<std::string, std::string> decode_meta(const std::string& text) {
  std::map<std::string, std::string> meta;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed metadata line");
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const TrajectoryDataset& ds) {
  ds.validate();
  auto fields = ds.metadata;
  fields["state_dim"] = std::to_string(ds.state_dim());
  fields["action_dim"] = std::to_string(ds.action_dim());
  const std::string meta = encode_meta(fields);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os.write(kDatasetMagic, 4);
    put<std::uint8_t>(os, kDatasetVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(meta.size()));
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.trajectories.size()));
    for (const auto& t : ds.trajectories) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.length()));
      put_floats(os, t.states);
      put_floats(os, t.actions);
      put_floats(os, t.rewards);
    }
    if (!os) throw IoError("failed writing " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset " + path.string());
  const std::uintmax_t size = std::filesystem::file_size(path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kDatasetMagic, 4) != 0) throw FormatError("not a dataset file: " + path.string());
  const auto version = get<std::uint8_t>(is);
  if (version != kDatasetVersion)
    throw UnsupportedVersionError("unsupported dataset version " + std::to_string(version));
  const auto meta_len = get<std::uint32_t>(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), meta_len);
  if (!is) throw IntegrityError("dataset file is truncated");
  TrajectoryDataset ds;
  ds.metadata = decode_meta(meta);
  Index sd = 0, ad = 0;
  try {
    sd = std::stoll(ds.meta("state_dim"));
    ad = std::stoll(ds.meta("action_dim"));
  } catch (const std::invalid_argument&) {
    throw IntegrityError("dataset dims are not integers");
  }
  if (sd <= 0 || ad <= 0) throw IntegrityError("dataset dims must be positive");
  const auto n = get<std::uint32_t>(is);
  ds.trajectories.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto T = static_cast<Index>(get<std::uint32_t>(is));
    if (T < 1) throw IntegrityError("empty trajectory in dataset");
    Trajectory t;
    t.states = get_floats(is, size, T + 1, sd);
    t.actions = get_floats(is, size, T, ad);
    t.rewards = get_floats(is, size, T, 1);
    ds.trajectories.push_back(std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IntegrityError("trailing bytes after dataset");
  ds.validate();
  return ds;
}

namespace {

std::vector<Trajectory> first_transitions(std::vector<Trajectory> trajs, std::int64_t n) {
  std::vector<Trajectory> out;
  std::int64_t have = 0;
  for (auto& t : trajs) {
    if (have >= n) break;
    have += t.length();
    out.push_back(std::move(t));
  }
  return out;
}

// The expert demonstrations live on their own seed branch so that they do
// not overlap the tier data.
std::uint64_t expert_seed(std::uint64_t seed) { return split_seed(seed, 0x45585054, 0); }

}  // namespace

TrajectoryDataset expert_demonstrations(const std::string& env, std::int64_t n_transitions, std::uint64_t seed) {
  CollectedData d = collect_dataset(env, Tier::kExpert, n_transitions, expert_seed(seed));
  TrajectoryDataset ds;
  ds.trajectories = first_transitions(std::move(d.trajectories), n_transitions);
  ds.metadata = {{"env", env},
                 {"tier", "expert"},
                 {"seed", std::to_string(seed)},
                 {"generator_version", kGeneratorVersion},
                 {"role", "demonstrations"}};
  ds.store_reward_stats();
  return ds;
}

TrajectoryDataset build_dataset(const std::string& env, Tier tier, std::int64_t n_transitions, std::uint64_t seed,
                                std::int64_t expert_prefix_transitions) {
  TrajectoryDataset ds;
  if (expert_prefix_transitions > 0)
    ds.trajectories = expert_demonstrations(env, expert_prefix_transitions, seed).trajectories;
  const auto prefix = static_cast<std::int64_t>(ds.trajectories.size());
  CollectedData d = collect_dataset(env, tier, n_transitions, seed);
  for (auto& t : d.trajectories) ds.trajectories.push_back(std::move(t));
  ds.metadata = {{"env", env},
                 {"tier", to_string(tier)},
                 {"seed", std::to_string(seed)},
                 {"generator_version", kGeneratorVersion},
                 {"expert_prefix_trajectories", std::to_string(prefix)}};
  ds.store_reward_stats();
  ds.validate();
  return ds;
}

TrajectoryDataset truncate_transitions(const TrajectoryDataset& ds, std::int64_t n_transitions) {
  if (n_transitions <= 0) throw DataError("truncate_transitions: N must be positive");
  if (ds.num_transitions() < n_transitions)
    throw DataError("dataset holds " + std::to_string(ds.num_transitions()) + " transitions, fewer than N = " +
                    std::to_string(n_transitions));
  TrajectoryDataset out;
  out.metadata = ds.metadata;
  std::int64_t have = 0;
  for (const auto& t : ds.trajectories) {
    if (have >= n_transitions) break;
    const Index take = static_cast<Index>(std::min<std::int64_t>(t.length(), n_transitions - have));
    Trajectory c;
    c.states = t.states.topRows(take + 1);
    c.actions = t.actions.topRows(take);
    c.rewards = t.rewards.topRows(take);
    have += take;
    out.trajectories.push_back(std::move(c));
  }
  out.metadata["truncated_to"] = std::to_string(n_transitions);
  out.store_reward_stats();
  return out;
}

TrajectoryDataset mask_observations(const TrajectoryDataset& ds, std::uint64_t seed) {
  TrajectoryDataset out = ds;
  const Index sd = ds.state_dim();
  for (std::size_t i = 0; i < out.trajectories.size(); ++i) {
    Rng rng(split_seed(seed, 0x4d41534b, i));
    const Index dim = static_cast<Index>(uniform_int(rng, 0, sd - 1));
    out.trajectories[i].states.col(dim).setZero();
  }
  out.metadata["masked"] = "1";
  return out;
}

std::string dataset_file_name(const std::string& env, Tier tier, std::int64_t n_transitions, std::uint64_t seed,
                              std::int64_t expert_prefix_transitions) {
  std::string name = env + "-" + to_string(tier);
  if (expert_prefix_transitions > 0) name += "-x" + std::to_string(expert_prefix_transitions);
  return name + "-n" + std::to_string(n_transitions) + "-s" + std::to_string(seed) + ".orpl";
}

std::filesystem::path data_root() {
  if (const char* p = std::getenv("ORPL_DATA_ROOT"); p && *p) return p;
  return "data";
}

DatasetSummary summarize(const TrajectoryDataset& ds) {
  DatasetSummary s;
  s.trajectories = static_cast<std::int64_t>(ds.trajectories.size());
  s.transitions = ds.num_transitions();
  if (ds.trajectories.empty()) return s;
  std::vector<double> returns;
  Eigen::ArrayXd ssum = Eigen::ArrayXd::Zero(ds.state_dim()), ssq = ssum;
  Eigen::ArrayXd asum = Eigen::ArrayXd::Zero(ds.action_dim()), asq = asum;
  std::int64_t ns = 0;
  for (const auto& t : ds.trajectories) {
    returns.push_back(t.rewards.cast<double>().sum());
    Eigen::ArrayXXd st = t.states.cast<double>().array(), ac = t.actions.cast<double>().array();
    ssum += st.colwise().sum().transpose();
    ssq += st.square().colwise().sum().transpose();
    asum += ac.colwise().sum().transpose();
    asq += ac.square().colwise().sum().transpose();
    ns += t.states.rows();
  }
  s.mean_return = 0.0;
  for (double r : returns) s.mean_return += r;
  s.mean_return /= static_cast<double>(returns.size());
  s.min_return = *std::min_element(returns.begin(), returns.end());
  s.max_return = *std::max_element(returns.begin(), returns.end());
  auto fill = [](const Eigen::ArrayXd& sum, const Eigen::ArrayXd& sq, double n, std::vector<double>& mean,
                 std::vector<double>& sd) {
    for (Index i = 0; i < sum.size(); ++i) {
      const double m = sum[i] / n;
      mean.push_back(m);
      sd.push_back(std::sqrt(std::max(0.0, sq[i] / n - m * m)));
    }
  };
  fill(ssum, ssq, static_cast<double>(ns), s.state_mean, s.state_std);
  fill(asum, asq, static_cast<double>(s.transitions), s.action_mean, s.action_std);
  return s;
}

}  // namespace orpl
