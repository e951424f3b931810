#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "orpl/numerics/checkpoint.hpp"
#include "orpl/numerics/grad_check.hpp"
#include "orpl/numerics/tanh_gaussian.hpp"
#include "orpl/numerics/transformer.hpp"

using namespace orpl;
using Md = Matrix<double>;

namespace {

Md mat(Index r, Index c, std::initializer_list<double> v) {
  Md m(r, c);
  Index i = 0;
  for (double x : v) m.data()[i++] = x;
  return m;
}

// Scalar sigmoid written out independently of the library.
double ref_swish(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("mlp with zero parameters returns zeros") {
  Rng rng = make_rng(7, Stream::kInit, 0);
  Mlp<double> mlp(MLPSpec{3, {5, 4}, 2, Activation::kSwish}, "f");
  ParamStore<double> ps;
  mlp.init(ps, rng);
  for (auto& [k, e] : ps.entries()) e.value.setZero();
  Md y = mlp_forward(mlp, ps, randn<double>(6, 3, rng));
  CHECK(y.rows() == 6);
  CHECK(y.cols() == 2);
  CHECK(y.isZero(0.0));
}

TEST_CASE("identity single layer passes input through") {
  Rng rng = make_rng(1, Stream::kInit, 0);
  Mlp<double> mlp(MLPSpec{3, {}, 3, Activation::kIdentity}, "id");
  ParamStore<double> ps;
  mlp.init(ps, rng);
  ps.value("id/out/w") = Md::Identity(3, 3);
  ps.value("id/out/b").setZero();
  Md y = mlp_forward(mlp, ps, mat(1, 3, {1, 2, 3}));
  CHECK(y(0, 0) == 1.0);
  CHECK(y(0, 1) == 2.0);
  CHECK(y(0, 2) == 3.0);
}

TEST_CASE("scalar swish network") {
  Rng rng = make_rng(1, Stream::kInit, 0);
  Mlp<double> mlp(MLPSpec{1, {1}, 1, Activation::kSwish}, "s");
  ParamStore<double> ps;
  mlp.init(ps, rng);
  ps.value("s/l0/w").setOnes();
  ps.value("s/l0/b").setZero();
  ps.value("s/out/w").setOnes();
  ps.value("s/out/b").setZero();
  Md y = mlp_forward(mlp, ps, mat(1, 1, {1.0}));
  CHECK(y(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(y(0, 0) == doctest::Approx(ref_swish(1.0)).epsilon(1e-15));
}

TEST_CASE("mlp_forward validates input") {
  Rng rng = make_rng(1, Stream::kInit, 0);
  Mlp<double> mlp(MLPSpec{3, {4}, 2, Activation::kRelu}, "m");
  ParamStore<double> ps;
  mlp.init(ps, rng);
  CHECK_THROWS_AS(mlp_forward(mlp, ps, Md(Md::Zero(2, 4))), DimensionError);
  Md bad = Md::Zero(2, 3);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mlp_forward(mlp, ps, bad), FinitenessError);
  CHECK_THROWS_AS((MLPSpec{0, {4}, 2, Activation::kRelu}.validate()), DimensionError);
}

TEST_CASE("mlp_forward is deterministic") {
  Rng a = make_rng(11, Stream::kInit, 0), b = make_rng(11, Stream::kInit, 0);
  Mlp<float> mlp(MLPSpec{4, {8, 8}, 3, Activation::kSwish}, "m");
  ParamStore<float> pa, pb;
  mlp.init(pa, a);
  mlp.init(pb, b);
  Matrix<float> x = randn<float>(5, 4, a);
  CHECK(mlp_forward(mlp, pa, x) == mlp_forward(mlp, pb, x));
}

TEST_CASE("adam first and second steps") {
  const double lr = 1e-3;
  ParamStore<double> ps;
  ps.add("p", Md::Zero(1, 1));
  ps.zero_grad();
  ps.accumulate_grad("p", Md::Ones(1, 1));
  ps.adam_step(lr);
  const double first = -ps.value("p")(0, 0);
  CHECK(first == doctest::Approx(lr / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(ps.step() == 1);
  CHECK(ps.grad("p")(0, 0) == 1.0);
  ps.adam_step(lr);
  const double two = -ps.value("p")(0, 0);
  CHECK(two >= 1.9 * lr);
  CHECK(two <= 2.0 * lr);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  ParamStore<double> ps;
  ps.add("w", mat(2, 2, {1, -2, 3, 0.5}));
  Md before = ps.value("w");
  ps.zero_grad();
  ps.adam_step(0.1);
  CHECK(ps.value("w") == before);
}

TEST_CASE("adam refuses missing gradients") {
  ParamStore<double> ps;
  ps.add("a", Md::Ones(1, 1));
  ps.add("b", Md::Ones(1, 1));
  CHECK_THROWS_AS(ps.adam_step(0.1), IncompleteGradientError);
  ps.accumulate_grad("a", Md::Ones(1, 1));
  CHECK_THROWS_AS(ps.adam_step(0.1), IncompleteGradientError);
  CHECK_THROWS_AS(ps.accumulate_grad("a", Md::Ones(2, 1)), DimensionError);
}

TEST_CASE("grad_check on a quadratic") {
  ParamStore<double> ps("q");
  Rng rng = make_rng(3, Stream::kInit, 0);
  ps.add("theta", randn<double>(3, 4, rng));
  auto loss = [&](bool g) {
    Tape<double> t;
    auto th = t.param(ps, "theta");
    auto l = scale(sum(square(th)), 0.5);
    if (g) t.backward(l);
    return l.item();
  };
  auto r = grad_check(loss, {&ps});
  CHECK(r.checked == 12);
  CHECK(r.max_relative_error < 1e-9);
}

TEST_CASE("unused parameter gets an exactly zero gradient") {
  ParamStore<double> ps("u");
  ps.add("used", Md::Constant(2, 2, 0.3));
  ps.add("unused", Md::Constant(2, 2, 0.7));
  auto loss = [&](bool g) {
    Tape<double> t;
    auto l = sum(tanh(t.param(ps, "used")));
    if (g) t.backward(l);
    return l.item();
  };
  auto r = grad_check(loss, {&ps});
  CHECK(r.max_relative_error < 1e-9);
  CHECK(ps.grad("unused").isZero(0.0));
}

TEST_CASE("grad_check raises on non-finite loss") {
  ParamStore<double> ps("n");
  ps.add("x", Md::Constant(1, 1, -1.0));
  auto loss = [&](bool g) {
    Tape<double> t;
    auto l = sum(log(t.param(ps, "x")));
    if (g) t.backward(l);
    return l.item();
  };
  CHECK_THROWS_AS(grad_check(loss, {&ps}), FinitenessError);
}

TEST_CASE("every elementwise and structural op passes grad_check") {
  Rng rng = make_rng(5, Stream::kInit, 0);
  ParamStore<double> ps("ops");
  ps.add("a", randn<double>(3, 4, rng));
  ps.add("b", randn<double>(4, 2, rng));
  ps.add("c", randn<double>(1, 4, rng));
  ps.add("d", randn<double>(3, 1, rng));
  ps.add("pos", rand_uniform<double>(3, 4, 0.5, 2.0, rng));
  auto loss = [&](bool g) {
    Tape<double> t;
    auto a = t.param(ps, "a"), b = t.param(ps, "b"), c = t.param(ps, "c"), d = t.param(ps, "d");
    auto p = t.param(ps, "pos");
    auto x = add(a, c);
    x = sub(x, d);
    x = mul(x, sigmoid(a));
    auto y = matmul(swish(x), b);
    auto z = concat_cols({y, relu(slice_cols(a, 1, 2)), softplus(d)});
    auto w = concat_rows({z, scale(z, 0.5)});
    std::vector<Index> rows{0, 2, 5, 5};
    auto gth = gather_rows(w, rows);
    auto s1 = sum(logsumexp_rows(gth));
    auto s2 = mean(mul(softmax_rows(gth), gth));
    auto s3 = sum(log(p)) + sum(sqrt(p)) + mean(exp(scale(a, 0.3)));
    auto s4 = sum(abs(add_scalar(a, 0.05))) + sum(clamp(a, -0.5, 0.5));
    auto s5 = sum(mul(col_sum(a), transpose(row_sum(transpose(broadcast_rows(c, 2))))));
    auto s6 = sum(tanh(slice_rows(a, 1, 2))) + sum(square(neg(stop_gradient(a)) + a));
    auto l = s1 + s2 + s3 + s4 + s5 + s6;
    if (g) t.backward(l);
    return l.item();
  };
  auto r = grad_check(loss, {&ps});
  INFO(r.worst_parameter, " ", r.worst_analytic, " ", r.worst_numeric);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("softmax preserves finiteness and sums to one") {
  Rng rng = make_rng(9, Stream::kInit, 0);
  for (int trial = 0; trial < 50; ++trial) {
    Md logits = randn<double>(4, 7, rng) * std::pow(10.0, trial % 6);
    Tape<double> t;
    Md p = softmax_rows(t.constant(logits)).value();
    CHECK(all_finite(p));
    for (Index r = 0; r < p.rows(); ++r) CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-12);
    CHECK(all_finite(swish(t.constant(logits)).value()));
    CHECK(all_finite(relu(t.constant(logits)).value()));
    CHECK(all_finite(tanh(t.constant(logits)).value()));
  }
}

TEST_CASE("attention and transformer gradients") {
  Rng rng = make_rng(21, Stream::kInit, 0);
  TransformerSpec spec{5, 6, 2, 3, 7, 4, 4, true};
  Transformer<double> net(spec, "tf");
  ParamStore<double> ps("tf");
  net.init(ps, rng);
  Md tokens = randn<double>(3 * 2, 5, rng);
  for (bool causal : {true, false}) {
    auto loss = [&](bool g) {
      Tape<double> t;
      std::vector<Index> pos{0, 1, 1};
      auto out = net.forward(t, ps, t.constant(tokens), 3, 2, pos, causal);
      auto l = mean(square(out));
      if (g) t.backward(l);
      return l.item();
    };
    auto r = grad_check(loss, {&ps});
    INFO(r.worst_parameter);
    CHECK(r.max_relative_error < 1e-6);
  }
}

TEST_CASE("transformer causal prefix is bit-identical") {
  Rng rng = make_rng(22, Stream::kInit, 0);
  TransformerSpec spec{4, 8, 2, 4, 8, 6, 5, true};
  Transformer<double> net(spec, "tf");
  ParamStore<double> ps;
  net.init(ps, rng);
  std::vector<Md> tokens;
  for (int i = 0; i < 5; ++i) tokens.push_back(randn<double>(3, 4, rng));
  const auto base = transformer_forward(net, ps, tokens, true);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    auto pert = tokens;
    pert[j] += randn<double>(3, 4, rng);
    const auto out = transformer_forward(net, ps, pert, true);
    for (std::size_t i = 0; i < j; ++i) CHECK(out[i] == base[i]);
    CHECK(out[j] != base[j]);
  }
  auto pert = tokens;
  pert[3] += randn<double>(3, 4, rng);
  const auto bi0 = transformer_forward(net, ps, tokens, false);
  const auto bi1 = transformer_forward(net, ps, pert, false);
  CHECK((bi0[0] - bi1[0]).norm() > 1e-8);
}

TEST_CASE("transformer length-one and empty input") {
  Rng rng = make_rng(23, Stream::kInit, 0);
  Transformer<double> net(TransformerSpec{4, 8, 2, 4, 8, 6, 5, true}, "tf");
  ParamStore<double> ps;
  net.init(ps, rng);
  std::vector<Md> one{randn<double>(2, 4, rng)};
  auto a = transformer_forward(net, ps, one, true);
  auto b = transformer_forward(net, ps, one, false);
  REQUIRE(a.size() == 1);
  CHECK(a[0].cols() == 6);
  CHECK(a[0] == b[0]);
  CHECK_THROWS_AS(transformer_forward(net, ps, std::vector<Md>{}, true), EmptyInputError);
}

TEST_CASE("recurrent cell gradient") {
  Rng rng = make_rng(24, Stream::kInit, 0);
  RecurrentCell<double> cell("rnn", 4, 3);
  ParamStore<double> ps("rnn");
  cell.init(ps, rng);
  Md h0 = randn<double>(2, 4, rng), x0 = randn<double>(2, 3, rng), x1 = randn<double>(2, 3, rng);
  auto loss = [&](bool g) {
    Tape<double> t;
    auto h = cell.forward(t, ps, t.constant(h0), t.constant(x0));
    h = cell.forward(t, ps, h, t.constant(x1));
    auto l = sum(square(h));
    if (g) t.backward(l);
    return l.item();
  };
  CHECK(grad_check(loss, {&ps}).max_relative_error < 1e-6);
}

namespace {

struct FixedHead {
  TanhGaussianHead<double> head{1, 1, {}, Activation::kIdentity, "pi"};
  ParamStore<double> params{"pi"}, temp{"alpha"};
  FixedHead(double mean, double log_std) {
    Rng rng = make_rng(0, Stream::kInit, 0);
    head.init(params, temp, rng);
    params.value("pi/out/w").setZero();
    params.value("pi/out/b")(0, 0) = mean;
    params.value("pi/out/b")(0, 1) = log_std;
  }
  double logp(double a) { return tanh_gaussian_logprob(head, params, Md(Md::Zero(1, 1)), mat(1, 1, {a})); }
};

}  // namespace

TEST_CASE("tanh-gaussian log-density at the origin") {
  for (Index d : {1, 3}) {
    TanhGaussianHead<double> head(2, d, {}, Activation::kIdentity, "pi");
    ParamStore<double> params("pi"), temp("alpha");
    Rng rng = make_rng(0, Stream::kInit, 0);
    head.init(params, temp, rng);
    for (auto& [k, e] : params.entries()) e.value.setZero();
    const double lp = tanh_gaussian_logprob(head, params, Md(Md::Ones(1, 2)), Md(Md::Zero(1, d)));
    CHECK(lp == doctest::Approx(-0.5 * static_cast<double>(d) * std::log(2 * std::numbers::pi)).epsilon(1e-14));
  }
}

TEST_CASE("tanh-gaussian density integrates to one") {
  for (auto [m, ls] : {std::pair{0.0, 0.0}, std::pair{0.4, -0.5}, std::pair{-1.0, 0.3}}) {
    FixedHead f(m, ls);
    // Substitute a = tanh(u) so the integrand is smooth on the real line.
    const int n = 20000;
    const double lo = -12.0, hi = 12.0, du = (hi - lo) / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = lo + (i + 0.5) * du;
      const double a = std::tanh(u);
      if (std::abs(a) >= 1.0) continue;
      total += std::exp(f.logp(a)) * (1.0 - a * a) * du;
    }
    CHECK(std::abs(total - 1.0) < 1e-3);
  }
}

TEST_CASE("shrinking log-std concentrates density at the mode") {
  const double m = 0.3;
  double prev = -std::numeric_limits<double>::infinity();
  for (double ls : {0.0, -1.0, -2.0, -4.0, -8.0}) {
    FixedHead f(m, ls);
    const double v = f.logp(std::tanh(m));
    CHECK(v > prev);
    prev = v;
  }
  FixedHead clamped(m, -40.0);
  FixedHead floor(m, -20.0);
  CHECK(clamped.logp(std::tanh(m) + 1e-12) == floor.logp(std::tanh(m) + 1e-12));
}

TEST_CASE("tanh-gaussian rejects out-of-range actions") {
  FixedHead f(0.0, 0.0);
  CHECK_THROWS_AS(f.logp(1.0), DomainError);
  CHECK_THROWS_AS(f.logp(-1.5), DomainError);
  Md a = mat(1, 3, {1.0, -1.0, 0.2});
  CHECK(clamp_actions(a) == 2);
  CHECK(a(0, 0) < 1.0);
  CHECK(a(0, 1) > -1.0);
  CHECK(a(0, 2) == 0.2);
}

TEST_CASE("tanh-gaussian samples stay inside the box") {
  Rng rng = make_rng(4, Stream::kInit, 0);
  TanhGaussianHead<float> head(3, 2, {8}, Activation::kSwish, "pi");
  ParamStore<float> params, temp;
  head.init(params, temp, rng);
  Tape<float> t;
  auto dist = head.distribution(t, params, t.constant(Matrix<float>(randn<float>(256, 3, rng) * 10.0f)));
  auto s = tanh_gaussian_sample(dist, Matrix<float>(randn<float>(256, 2, rng) * 5.0f));
  CHECK((s.action.value().array().abs() < 1.0f).all());
  CHECK(all_finite(s.log_prob.value()));
}

TEST_CASE("action likelihood loss gradient") {
  Rng rng = make_rng(31, Stream::kInit, 0);
  TanhGaussianHead<double> head(3, 2, {5}, Activation::kSwish, "pi");
  ParamStore<double> params("pi"), temp("alpha");
  head.init(params, temp, rng, 0.7);
  Md x = randn<double>(4, 3, rng);
  Md targets = rand_uniform<double>(4, 2, -0.9, 0.9, rng);
  Md noise = randn<double>(4, 2, rng);
  auto loss = [&](bool g) {
    Tape<double> t;
    auto dist = head.distribution(t, params, t.constant(x));
    auto out = action_likelihood_loss(t, head, temp, dist, targets, noise);
    if (g) t.backward(out.loss);
    return out.loss.item();
  };
  auto r = grad_check(loss, {&params, &temp});
  INFO(r.worst_parameter);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("straight-through one-hot") {
  Rng rng = make_rng(41, Stream::kInit, 0);
  ParamStore<double> ps("st");
  ps.add("l", randn<double>(2, 6, rng));
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> choice(2, 2);
  choice << 0, 2, 1, 1;
  Tape<double> t;
  auto y = straight_through_onehot(t.param(ps, "l"), 2, choice);
  Md expect = Md::Zero(2, 6);
  expect(0, 0) = expect(0, 5) = expect(1, 1) = expect(1, 4) = 1.0;
  CHECK(y.value() == expect);
  ps.zero_grad();
  t.backward(sum(mul(y, t.constant(Md::Ones(2, 6)))));
  // Gradient of sum(softmax) is zero per block.
  CHECK(ps.grad("l").cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("frozen stores receive no gradient") {
  ParamStore<double> a("a"), b("b");
  a.add("x", Md::Ones(1, 1));
  b.add("y", Md::Ones(1, 1));
  Tape<double> t;
  t.freeze(b);
  auto l = sum(mul(t.param(a, "x"), t.param(b, "y")));
  t.backward(l);
  CHECK(a.has_grad("x"));
  CHECK_FALSE(b.has_grad("y"));
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng = make_rng(51, Stream::kInit, 0);
  ParamStore<float> ps("p");
  ps.add("w", randn<float>(3, 5, rng));
  ps.add("b", randn<float>(1, 5, rng));
  ps.zero_grad();
  ps.accumulate_grad("w", randn<float>(3, 5, rng));
  ps.accumulate_grad("b", randn<float>(1, 5, rng));
  ps.adam_step(0.01f);
  Checkpoint c;
  export_store(ps, "net", c);
  const auto path = std::filesystem::temp_directory_path() / "orpl_ckpt_test.bin";
  write_checkpoint(path, c);
  ParamStore<float> back("p");
  back.add("w", Matrix<float>::Zero(3, 5));
  back.add("b", Matrix<float>::Zero(1, 5));
  import_store(back, "net", read_checkpoint(path));
  CHECK(back.value("w") == ps.value("w"));
  CHECK(back.entries().at("w").m == ps.entries().at("w").m);
  CHECK(back.entries().at("b").v == ps.entries().at("b").v);
  CHECK(back.step() == 1);
  {
    std::ofstream os(path, std::ios::binary);
    os << "JUNKJUNK";
  }
  CHECK_THROWS_AS(read_checkpoint(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("rng streams are independent and reproducible") {
  Rng a = make_rng(1, Stream::kDataset, 0), b = make_rng(1, Stream::kDataset, 0);
  Rng c = make_rng(1, Stream::kPretrain, 0);
  CHECK(a() == b());
  CHECK(a() != c());
  const std::string st = rng_state(a);
  const auto next = a();
  set_rng_state(b, st);
  CHECK(b() == next);
}
