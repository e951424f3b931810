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

#include "orpl/harness/report.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "orpl/numerics/errors.hpp"

namespace orpl {

namespace fs = std::filesystem;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // sample variance, 0 for n < 2
  int n = 0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  m.n = static_cast<int>(x.size());
  if (m.n == 0) return m;
  for (double v : x) m.mean += v;
  m.mean /= m.n;
  if (m.n > 1) {
    for (double v : x) m.var += (v - m.mean) * (v - m.mean);
    m.var /= (m.n - 1);
  }
  return m;
}

double std_error_of(const Moments& m) { return m.n > 1 ? std::sqrt(m.var / m.n) : 0.0; }

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::map<std::string, std::string> experiment_fields(const std::string& ini) {
  boost::property_tree::ptree pt;
  std::istringstream is(ini);
  try {
    boost::property_tree::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(std::string("malformed config snapshot: ") + e.what());
  }
  std::map<std::string, std::string> out;
  for (const char* k : {"track", "env", "tier", "objective", "frontend"})
    out[k] = pt.get<std::string>(std::string("experiment.") + k, "");
  return out;
}

// Label with the env and tier removed: identifies a method across datasets.
std::string method_of(const ConfigAggregate& c) {
  const std::string prefix = c.track + "-" + c.env + "-" + c.tier + "-";
  return c.label.rfind(prefix, 0) == 0 ? c.label.substr(prefix.size()) : c.label;
}

}  // namespace

std::optional<double> welch_one_sided_p(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) return std::nullopt;
  const Moments ma = moments(a), mb = moments(b);
  const double va = ma.var / ma.n, vb = mb.var / mb.n;
  const double se2 = va + vb;
  if (se2 == 0.0) return ma.mean > mb.mean ? 0.0 : (ma.mean == mb.mean ? 0.5 : 1.0);
  const double t = (ma.mean - mb.mean) / std::sqrt(se2);
  const double df = se2 * se2 / (va * va / (ma.n - 1) + vb * vb / (mb.n - 1));
  const boost::math::students_t dist(df);
  return boost::math::cdf(boost::math::complement(dist, t));
}

AggregateReport aggregate(const std::vector<RunRecord>& records) {
  AggregateReport report;
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : records)
    if (r.status != RunStatus::kInterrupted) groups[r.config_id].push_back(&r);

  std::map<std::string, std::set<std::uint64_t>> seen;
  for (auto& [id, recs] : groups) {
    std::sort(recs.begin(), recs.end(), [](const RunRecord* x, const RunRecord* y) { return x->seed < y->seed; });
    ConfigAggregate c;
    c.config_id = id;
    c.label = recs.front()->label;
    c.baseline_key = recs.front()->baseline_key;
    const auto f = experiment_fields(recs.front()->config_ini);
    c.track = f.at("track");
    c.env = f.at("env");
    c.tier = f.at("tier");
    c.objective = f.at("objective");
    c.frontend = f.at("frontend");
    for (const RunRecord* r : recs) {
      if (!seen[id].insert(r->seed).second)
        throw DataError("duplicate records for " + id + " seed " + std::to_string(r->seed));
      switch (r->status) {
        case RunStatus::kCompleted:
          if (!r->final_score) throw FormatError("completed record without final score: " + id);
          c.seeds.push_back(r->seed);
          c.final_scores.push_back(*r->final_score);
          ++c.n_completed;
          break;
        case RunStatus::kDiverged: ++c.n_diverged; break;
        case RunStatus::kFailed: ++c.n_failed; break;
        case RunStatus::kInterrupted: break;
      }
    }
    if (c.n_completed == 0) {
      report.warnings.push_back(c.label + ": no completed seeds");
    } else {
      const Moments m = moments(c.final_scores);
      c.mean = m.mean;
      c.std_error = std_error_of(m);
      if (m.n == 1) {
        c.low_n = true;
        report.warnings.push_back(c.label + ": single completed seed, standard error reported as 0");
      }
    }
    if (c.n_diverged > 0)
      report.warnings.push_back(c.label + ": " + std::to_string(c.n_diverged) + " diverged seed(s) excluded");
    if (c.n_failed > 0)
      report.warnings.push_back(c.label + ": " + std::to_string(c.n_failed) + " failed seed(s) excluded");
    report.configs.push_back(std::move(c));
  }

  // Raw baselines: a raw config's baseline key is its own snapshot.
  std::map<std::string, const ConfigAggregate*> raw_by_key;
  for (const auto& c : report.configs)
    if (c.frontend == "raw") raw_by_key[c.baseline_key] = &c;
  for (auto& c : report.configs) {
    if (c.frontend == "raw") continue;
    auto it = raw_by_key.find(c.baseline_key);
    if (it == raw_by_key.end() || !it->second->mean || !c.mean) continue;
    const ConfigAggregate& b = *it->second;
    BaselineComparison cmp;
    cmp.config_id = b.config_id;
    cmp.mean = *b.mean;
    cmp.std_error = b.std_error;
    cmp.n = b.n_completed;
    cmp.difference = *c.mean - *b.mean;
    cmp.p_value = welch_one_sided_p(c.final_scores, b.final_scores);
    c.baseline = cmp;
  }

  std::map<std::pair<std::string, std::string>, std::vector<const ConfigAggregate*>> by_method;
  for (const auto& c : report.configs)
    if (c.mean) by_method[{c.track, method_of(c)}].push_back(&c);
  for (const auto& [key, cs] : by_method) {
    MethodAggregate m;
    m.track = key.first;
    m.method = key.second;
    m.n_configs = static_cast<int>(cs.size());
    double var = 0.0;
    for (const auto* c : cs) {
      m.mean += *c->mean;
      var += c->std_error * c->std_error;
    }
    m.mean /= m.n_configs;
    m.std_error = std::sqrt(var) / m.n_configs;
    report.methods.push_back(m);
  }
  return report;
}

const ConfigAggregate* AggregateReport::find(const std::string& config_id) const {
  for (const auto& c : configs)
    if (c.config_id == config_id) return &c;
  return nullptr;
}

std::string AggregateReport::to_json() const {
  using nlohmann::json;
  json j;
  j["schema_version"] = 1;
  json cs = json::array();
  for (const auto& c : configs) {
    json o{{"config_id", c.config_id}, {"label", c.label},         {"track", c.track},
           {"env", c.env},             {"tier", c.tier},           {"objective", c.objective},
           {"frontend", c.frontend},   {"seeds", c.seeds},         {"final_scores", c.final_scores},
           {"n_completed", c.n_completed}, {"n_diverged", c.n_diverged}, {"n_failed", c.n_failed},
           {"low_n", c.low_n}};
    o["mean"] = c.mean ? json(*c.mean) : json(nullptr);
    o["stderr"] = c.mean ? json(c.std_error) : json(nullptr);
    if (c.baseline) {
      const auto& b = *c.baseline;
      o["baseline"] = {{"config_id", b.config_id}, {"mean", b.mean}, {"stderr", b.std_error}, {"n", b.n},
                       {"difference", b.difference}};
      o["baseline"]["p_value"] = b.p_value ? json(*b.p_value) : json(nullptr);
    } else {
      o["baseline"] = nullptr;
    }
    cs.push_back(o);
  }
  j["configs"] = cs;
  json ms = json::array();
  for (const auto& m : methods)
    ms.push_back({{"track", m.track}, {"method", m.method}, {"n_configs", m.n_configs}, {"mean", m.mean},
                  {"stderr", m.std_error}});
  j["methods"] = ms;
  j["warnings"] = warnings;
  return j.dump(2);
}

std::string AggregateReport::table() const {
  std::ostringstream os;
  std::size_t w = 6;
  for (const auto& c : configs) w = std::max(w, c.label.size());
  os << std::left << std::setw(static_cast<int>(w)) << "config" << "  " << std::right << std::setw(9) << "mean"
     << std::setw(9) << "stderr" << std::setw(4) << "n" << std::setw(5) << "div" << std::setw(5) << "fail"
     << std::setw(10) << "vs raw" << std::setw(9) << "p" << "\n";
  for (const auto& c : configs) {
    os << std::left << std::setw(static_cast<int>(w)) << c.label << "  " << std::right << std::setw(9)
       << (c.mean ? fixed(*c.mean, 2) : "-") << std::setw(9) << (c.mean ? fixed(c.std_error, 2) : "-")
       << std::setw(4) << c.n_completed << std::setw(5) << c.n_diverged << std::setw(5) << c.n_failed;
    if (c.baseline)
      os << std::setw(10) << ((c.baseline->difference >= 0 ? "+" : "") + fixed(c.baseline->difference, 2))
         << std::setw(9) << (c.baseline->p_value ? fixed(*c.baseline->p_value, 4) : "-");
    else
      os << std::setw(10) << "-" << std::setw(9) << "-";
    os << "\n";
  }
  if (!methods.empty()) {
    os << "\nacross datasets:\n";
    for (const auto& m : methods)
      os << "  " << m.track << " " << m.method << ": " << fixed(m.mean, 2) << " +- " << fixed(m.std_error, 2)
         << " over " << m.n_configs << " config(s)\n";
  }
  for (const auto& w2 : warnings) os << "warning: " << w2 << "\n";
  return os.str();
}

std::vector<RunRecord> load_records(const std::vector<fs::path>& roots) {
  std::vector<fs::path> files;
  for (const auto& root : roots) {
    if (!fs::exists(root)) throw IoError("no such path " + root.string());
    if (fs::is_regular_file(root)) {
      files.push_back(root);
      continue;
    }
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file() && e.path().filename() == "record.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> out;
  for (const auto& f : files) {
    std::ifstream is(f);
    if (!is) throw IoError("cannot read " + f.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    out.push_back(RunRecord::from_json(ss.str()));
  }
  return out;
}

std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, const std::string& axis,
                                            const std::vector<std::string>& values) {
  if (values.empty()) throw ValidationError("sweep over '" + axis + "' has no values");
  std::vector<ExperimentConfig> out;
  std::set<std::string> ids;
  for (const auto& v : values) {
    ExperimentConfig c = base;
    try {
      c.set(axis, v);
      c.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("sweep " + axis + "=" + v + ": " + e.what());
    } catch (const ConfigurationError& e) {
      throw ValidationError("sweep " + axis + "=" + v + ": " + e.what());
    }
    if (!ids.insert(c.config_id()).second) throw ValidationError("sweep " + axis + "=" + v + " duplicates another value");
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<RunRecord> sweep(const ExperimentConfig& base, const std::string& axis,
                             const std::vector<std::string>& values, const RunOptions& options) {
  const auto configs = sweep_configs(base, axis, values);
  std::vector<RunRecord> out;
  for (const auto& c : configs)
    for (auto& r : run_experiment(c, options)) out.push_back(std::move(r));
  return out;
}

std::vector<fs::path> emit_plotdata(const std::vector<RunRecord>& records, const fs::path& dir) {
  std::map<std::string, std::map<std::string, std::vector<const RunRecord*>>> by_track;
  for (const auto& r : records) {
    if (r.status == RunStatus::kInterrupted) continue;
    by_track[experiment_fields(r.config_ini).at("track")][r.config_id].push_back(&r);
  }
  fs::create_directories(dir);
  std::vector<fs::path> written;
  for (auto& [track, configs] : by_track) {
    std::ostringstream os;
    os << "schema_version,track,env,tier,objective,frontend,label,config_id,seed,status,step,mean,stderr,n\n";
    for (auto& [id, recs] : configs) {
      std::sort(recs.begin(), recs.end(), [](const RunRecord* a, const RunRecord* b) { return a->seed < b->seed; });
      const auto f = experiment_fields(recs.front()->config_ini);
      const std::string prefix = std::to_string(kPlotdataSchemaVersion) + "," + f.at("track") + "," + f.at("env") +
                                 "," + f.at("tier") + "," + f.at("objective") + "," + f.at("frontend") + "," +
                                 recs.front()->label + "," + id + ",";
      std::set<std::int64_t> steps;
      for (const auto* r : recs)
        for (const auto& p : r->curve) steps.insert(p.step);
      for (const auto* r : recs) {
        std::map<std::int64_t, double> at;
        for (const auto& p : r->curve) at[p.step] = p.mean_score;
        for (std::int64_t s : steps) {
          os << prefix << r->seed << "," << to_string(r->status) << "," << s << ",";
          auto it = at.find(s);
          if (it != at.end()) os << fmt(it->second) << ",,1\n";
          else os << ",,\n";
        }
      }
      for (std::int64_t s : steps) {
        std::vector<double> xs;
        for (const auto* r : recs) {
          if (r->status != RunStatus::kCompleted) continue;
          for (const auto& p : r->curve)
            if (p.step == s) xs.push_back(p.mean_score);
        }
        os << prefix << "mean,," << s << ",";
        if (xs.empty()) {
          os << ",,0\n";
        } else {
          const Moments m = moments(xs);
          os << fmt(m.mean) << "," << fmt(std_error_of(m)) << "," << m.n << "\n";
        }
      }
    }
    const fs::path path = dir / ("plotdata_" + track + ".csv");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << os.str();
    if (!out) throw IoError("failed writing " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace orpl
