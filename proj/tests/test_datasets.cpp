#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <set>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "orpl/data/masking.hpp"
#include "orpl/numerics/errors.hpp"

using namespace orpl;

namespace {

std::filesystem::path tmp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("orpl_test_" + name);
}

// Synthetic dataset: trajectory j has T_j transitions and encodes (j, t) in
// its values so windows can be traced back.
TrajectoryDataset synthetic(const std::vector<Index>& lengths, Index sd = 2, Index ad = 1) {
  TrajectoryDataset ds;
  for (std::size_t j = 0; j < lengths.size(); ++j) {
    const Index T = lengths[j];
    Trajectory t;
    t.states.resize(T + 1, sd);
    t.actions.resize(T, ad);
    t.rewards.resize(T, 1);
    for (Index i = 0; i <= T; ++i)
      for (Index c = 0; c < sd; ++c) t.states(i, c) = static_cast<float>(1000 * j + i + 0.1 * c);
    for (Index i = 0; i < T; ++i) {
      t.actions.row(i).setConstant(static_cast<float>(0.01 * i));
      t.rewards(i, 0) = static_cast<float>(i % 3);
    }
    ds.trajectories.push_back(std::move(t));
  }
  ds.metadata = {{"env", "synthetic"}, {"tier", "medium"}, {"seed", "0"}, {"generator_version", "test"}};
  ds.store_reward_stats();
  return ds;
}

}  // namespace

TEST_CASE("save then load is bit exact") {
  TrajectoryDataset ds = build_dataset("swingup_1d", Tier::kMedium, 600, 3, 200);
  const auto path = tmp_file("roundtrip.orpl");
  save_dataset(path, ds);
  TrajectoryDataset back = load_dataset(path);
  CHECK(back.trajectories == ds.trajectories);
  CHECK(back.meta("env") == "swingup_1d");
  CHECK(back.meta("tier") == "medium");
  CHECK(back.meta("generator_version") == kGeneratorVersion);
  CHECK(back.meta("expert_prefix_trajectories") == "1");
  CHECK(back.reward_stats().mean == ds.reward_stats().mean);
  std::filesystem::remove(path);
}

TEST_CASE("same seed gives byte-identical files") {
  const auto a = tmp_file("a.orpl"), b = tmp_file("b.orpl");
  save_dataset(a, build_dataset("point_mass_2d", Tier::kMediumReplay, 1000, 9));
  save_dataset(b, build_dataset("point_mass_2d", Tier::kMediumReplay, 1000, 9));
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(!sa.empty());
  CHECK(sa == sb);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("corrupt files are rejected") {
  TrajectoryDataset ds = synthetic({5, 6});
  const auto path = tmp_file("corrupt.orpl");
  save_dataset(path, ds);
  std::string bytes;
  {
    std::ifstream is(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(is), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  write(bytes.substr(0, bytes.size() - 7));
  CHECK_THROWS_AS(load_dataset(path), IntegrityError);
  std::string bumped = bytes;
  bumped[4] = static_cast<char>(kDatasetVersion + 1);
  write(bumped);
  CHECK_THROWS_AS(load_dataset(path), UnsupportedVersionError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  write(bad_magic);
  CHECK_THROWS_AS(load_dataset(path), FormatError);
  // Metadata claims a wider state than the payload holds.
  std::string wide = bytes;
  const auto pos = wide.find("state_dim=2");
  REQUIRE(pos != std::string::npos);
  wide[pos + 10] = '3';
  write(wide);
  CHECK_THROWS_AS(load_dataset(path), IntegrityError);
  std::filesystem::remove(path);
}

TEST_CASE("validate rejects inconsistent trajectories") {
  TrajectoryDataset ds = synthetic({4});
  ds.trajectories[0].rewards.resize(3, 1);
  CHECK_THROWS_AS(ds.validate(), IntegrityError);
  TrajectoryDataset nan = synthetic({4});
  nan.trajectories[0].states(1, 1) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(nan.validate(), IntegrityError);
}

TEST_CASE("expert demonstrations are the prefix of the imitation pretraining set") {
  TrajectoryDataset demos = expert_demonstrations("point_mass_2d", 1000, 4);
  TrajectoryDataset pre = build_dataset("point_mass_2d", Tier::kMedium, 2000, 4, 1000);
  REQUIRE(demos.trajectories.size() == 5);
  REQUIRE(pre.trajectories.size() == 15);
  for (std::size_t i = 0; i < 5; ++i) CHECK(pre.trajectories[i] == demos.trajectories[i]);
  CHECK(dataset_file_name("point_mass_2d", Tier::kMedium, 2000, 4, 1000) ==
        "point_mass_2d-medium-x1000-n2000-s4.orpl");
}

TEST_CASE("windows on a length-3 trajectory start at 0 or 1") {
  TrajectoryDataset ds = synthetic({2});
  SubTrajectorySampler s(ds, 2);
  Rng rng = make_rng(1, Stream::kPretrain, 0);
  std::set<Index> starts;
  for (int i = 0; i < 200; ++i)
    for (Index v : s.sample(4, rng).start) starts.insert(v);
  CHECK(starts == std::set<Index>{0, 1});
}

TEST_CASE("window equal to the trajectory has exactly one placement") {
  TrajectoryDataset ds = synthetic({7, 7, 7});
  SubTrajectorySampler s(ds, 8);
  Rng rng = make_rng(2, Stream::kPretrain, 0);
  auto b = s.sample(16, rng);
  for (Index i = 0; i < b.batch; ++i) {
    CHECK(b.start[static_cast<std::size_t>(i)] == 0);
    CHECK(b.tail_valid(i, 0) == 0.0f);
    const float base = b.states[0](i, 0);
    for (Index p = 0; p < 8; ++p) CHECK(b.states[static_cast<std::size_t>(p)](i, 0) == base + static_cast<float>(p));
    CHECK(b.actions[7].row(i).isZero());
  }
  CHECK_THROWS_AS(SubTrajectorySampler(ds, 9), WindowError);
}

TEST_CASE("windows never cross trajectory boundaries") {
  TrajectoryDataset ds = synthetic({3, 9, 5, 12});
  SubTrajectorySampler s(ds, 4);
  Rng rng = make_rng(3, Stream::kPretrain, 0);
  for (int rep = 0; rep < 100; ++rep) {
    auto b = s.sample(8, rng);
    for (Index i = 0; i < b.batch; ++i) {
      const float first = b.states[0](i, 0);
      const float traj = std::floor(first / 1000.0f);
      for (Index p = 0; p < 4; ++p) {
        CHECK(std::floor(b.states[static_cast<std::size_t>(p)](i, 0) / 1000.0f) == traj);
        CHECK(b.states[static_cast<std::size_t>(p)](i, 0) == first + static_cast<float>(p));
      }
      const Index T = ds.trajectories[static_cast<std::size_t>(b.trajectory[static_cast<std::size_t>(i)])].length();
      CHECK((b.tail_valid(i, 0) == 1.0f) == (b.start[static_cast<std::size_t>(i)] + 3 < T));
    }
  }
}

TEST_CASE("start index histogram is uniform") {
  TrajectoryDataset ds = synthetic({20});
  SubTrajectorySampler s(ds, 2);
  Rng rng = make_rng(4, Stream::kPretrain, 0);
  std::vector<double> counts(20, 0.0);
  for (int i = 0; i < 1000; ++i)
    for (Index v : s.sample(100, rng).start) counts[static_cast<std::size_t>(v)] += 1;
  const double expected = 1e5 / 20.0;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(19);
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
}

TEST_CASE("fixed seed gives identical batch sequences") {
  TrajectoryDataset ds = synthetic({10, 11});
  SubTrajectorySampler s(ds, 3);
  Rng a = make_rng(5, Stream::kPretrain, 0), b = make_rng(5, Stream::kPretrain, 0);
  for (int i = 0; i < 10; ++i) {
    auto x = s.sample(5, a), y = s.sample(5, b);
    CHECK(x.start == y.start);
    CHECK(x.trajectory == y.trajectory);
  }
}

TEST_CASE("returns satisfy the Bellman recurrence and the geometric closed form") {
  Matrix<float> r = Matrix<float>::Constant(50, 1, 2.0f);
  const double g = 0.99;
  auto G = discounted_returns(r, g);
  for (std::size_t t = 0; t < 50; ++t) CHECK(G[t] == doctest::Approx(2.0 + g * G[t + 1]).epsilon(1e-15));
  for (std::size_t t = 0; t <= 50; ++t) {
    const double n = static_cast<double>(50 - t);
    CHECK(G[t] == doctest::Approx(2.0 * (1 - std::pow(g, n)) / (1 - g)).epsilon(1e-12));
  }
  TrajectoryDataset ds = build_dataset("swingup_1d", Tier::kMedium, 400, 6);
  SubTrajectorySampler s(ds, 2, g);
  for (std::size_t j = 0; j < ds.trajectories.size(); ++j) {
    const auto& R = s.returns()[j];
    const auto& rw = s.standardized_rewards()[j];
    for (Index t = 0; t < rw.rows(); ++t)
      CHECK(R(t, 0) == doctest::Approx(rw(t, 0) + g * R(t + 1, 0)).epsilon(1e-4));
    CHECK(R(rw.rows(), 0) == 0.0f);
  }
}

TEST_CASE("standardized rewards have zero mean and unit variance") {
  TrajectoryDataset ds = build_dataset("point_mass_2d", Tier::kMedium, 2000, 7);
  SubTrajectorySampler s(ds, 2);
  double sum = 0, sq = 0, n = 0;
  for (const auto& r : s.standardized_rewards()) {
    sum += r.cast<double>().sum();
    sq += r.cast<double>().squaredNorm();
    n += static_cast<double>(r.rows());
  }
  CHECK(std::abs(sum / n) < 1e-5);
  CHECK(std::abs(sq / n - 1.0) < 1e-4);
}

TEST_CASE("mask label rates") {
  Rng rng = make_rng(8, Stream::kPretrain, 0);
  std::array<double, 4> counts{};
  double total = 0;
  while (total < 1e5) {
    MaskPlan p = sample_mask_plan(64, 8, rng);
    for (int s = 0; s < kNumStreams; ++s)
      for (Index i = 0; i < p.labels[s].size(); ++i) {
        counts[p.labels[s].data()[i]] += 1;
        total += 1;
      }
  }
  CHECK(std::abs(counts[1] / total - 0.30) < 0.01);
  CHECK(std::abs(counts[2] / total - 0.15) < 0.01);
  CHECK(std::abs(counts[3] / total - 0.15) < 0.01);
  CHECK(std::abs(counts[0] / total - 0.40) < 0.01);
}

TEST_CASE("switch donors are other batch elements; batch of one relabels to keep") {
  Rng rng = make_rng(9, Stream::kPretrain, 0);
  MaskPlan p = sample_mask_plan(5, 4, rng);
  for (int s = 0; s < kNumStreams; ++s)
    for (Index b = 0; b < 5; ++b)
      for (Index i = 0; i < 4; ++i) {
        if (p.label(static_cast<TokenStream>(s), b, i) == MaskLabel::kSwitch) {
          CHECK(p.donor[s](b, i) != b);
          CHECK(p.donor[s](b, i) >= 0);
          CHECK(p.donor[s](b, i) < 5);
        }
      }
  MaskPlan one = sample_mask_plan(1, 200, rng);
  for (int s = 0; s < kNumStreams; ++s)
    for (Index i = 0; i < 200; ++i) CHECK(one.label(static_cast<TokenStream>(s), 0, i) != MaskLabel::kSwitch);
}

TEST_CASE("apply_mask semantics") {
  TrajectoryDataset ds = synthetic({6, 6, 6});
  SubTrajectorySampler s(ds, 3);
  auto batch = s.gather({0, 1, 2}, {0, 2, 4}).cast<double>();
  const auto original = batch.states;

  SUBCASE("all untouched") {
    auto m = apply_mask(batch, untouched_plan(3, 3));
    for (int k = 0; k < kNumStreams; ++k) CHECK(m.num_predicted(static_cast<TokenStream>(k)) == 0);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(m.values[0][i] == batch.states[i]);
      CHECK(m.values[1][i].topRows(2) == batch.actions[i].topRows(2));
    }
  }
  SUBCASE("each label") {
    MaskPlan p = untouched_plan(3, 3);
    p.labels[0](0, 0) = static_cast<std::uint8_t>(MaskLabel::kDrop);
    p.labels[0](1, 1) = static_cast<std::uint8_t>(MaskLabel::kSwitch);
    p.donor[0](1, 1) = 2;
    p.labels[0](2, 2) = static_cast<std::uint8_t>(MaskLabel::kKeep);
    p.labels[1](2, 2) = static_cast<std::uint8_t>(MaskLabel::kDrop);  // unavailable tail action
    auto m = apply_mask(batch, p);
    CHECK(m.values[0][0].row(0).isZero());
    CHECK(m.drop[0][0](0, 0) == 1.0);
    CHECK(m.values[0][1].row(1) == batch.states[1].row(2));
    CHECK(m.values[0][2].row(2) == batch.states[2].row(2));
    CHECK(m.num_predicted(TokenStream::kState) == 3);
    CHECK(m.available[1][2](2, 0) == 0.0);
    CHECK(m.predicted[1][2](2, 0) == 0.0);
    CHECK(m.drop[1][2](2, 0) == 0.0);
    auto nokeep = apply_mask(batch, p, false);
    CHECK(nokeep.num_predicted(TokenStream::kState) == 2);
    std::array<Matrix<double>, kNumStreams> tokens = {Matrix<double>::Constant(1, 2, 7.0),
                                                      Matrix<double>::Constant(1, 1, 8.0),
                                                      Matrix<double>::Constant(1, 1, 9.0)};
    auto sub = substitute_drop_tokens(m, tokens);
    CHECK(sub[0][0](0, 0) == 7.0);
    CHECK(sub[0][0](1, 0) == batch.states[0](1, 0));
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(batch.states[i] == original[i]);
}
