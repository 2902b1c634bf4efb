#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "leakybias/analysis.hpp"
#include "leakybias/rng.hpp"
#include "leakybias/training.hpp"
#include "oracles.hpp"

using namespace leakybias;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  Matrix m(r, c);
  CounterRng rng(seed);
  for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = scale * rng.next_gaussian();
  return m;
}

Matrix diag(std::vector<double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

}  // namespace

TEST_CASE("stable rank on spectra known in closed form") {
  CHECK(stable_rank(diag({0.0, 1.0, 1.0, 1.0, 1.0})) == doctest::Approx(4.0));
  CHECK(stable_rank(diag({1e-8, 1.0, 1.0, 1.0, 1.0})) == doctest::Approx(4.0));

  // rank one: u v^T
  Matrix uv(3, 4);
  const double u[3] = {1.0, -2.0, 0.5};
  const double v[4] = {0.3, 1.0, -1.0, 2.0};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) uv(i, j) = u[i] * v[j];
  CHECK(stable_rank(uv) == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(stable_rank(Matrix(3, 3)), std::invalid_argument);
}

TEST_CASE("stable rank matches the jacobi oracle on random matrices") {
  CounterRng shape_rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 1 + shape_rng.next_u64() % 16;
    const std::size_t c = 1 + shape_rng.next_u64() % 16;
    const Matrix m = random_matrix(r, c, 4000 + trial);
    const double got = stable_rank(m);
    const double want = oracles::stable_rank_svd(m);
    CHECK(std::abs(got - want) <= 1e-8 * std::max(1.0, want));
  }
}

TEST_CASE("stable rank is scale invariant and bounded by the rank") {
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_matrix(6, 9, 4200 + trial);
    const double sr = stable_rank(m);
    CHECK(sr >= 1.0 - 1e-9);
    CHECK(sr <= 6.0 + 1e-9);
    Matrix scaled = m;
    for (std::size_t k = 0; k < scaled.size(); ++k) scaled.data()[k] *= -3.7;
    CHECK(stable_rank(scaled) == doctest::Approx(sr).epsilon(1e-9));
  }
  // a rank-3 product has stable rank at most 3
  const Matrix a = random_matrix(8, 3, 4300), b = random_matrix(3, 10, 4301);
  Matrix prod(8, 10);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 10; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      prod(i, j) = s;
    }
  CHECK(stable_rank(prod) <= 3.0 + 1e-9);
}

TEST_CASE("rank-2 residual") {
  SUBCASE("exact rank two vanishes") {
    const Matrix a = random_matrix(5, 2, 4400), b = random_matrix(2, 7, 4401);
    Matrix prod(5, 7);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 7; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 2; ++k) s += a(i, k) * b(k, j);
        prod(i, j) = s;
      }
    CHECK(rank2_residual(prod) <= 1e-10);
  }
  SUBCASE("identity splits evenly") {
    CHECK(rank2_residual(diag({1, 1, 1, 1})) == doctest::Approx(0.5));
  }
  SUBCASE("matches the jacobi oracle") {
    for (int trial = 0; trial < 30; ++trial) {
      const Matrix m = random_matrix(4 + trial % 5, 6, 4500 + trial);
      const double want = 1.0 - oracles::singular_values_top2_sum_sq(m) / m.frobenius_norm_sq();
      CHECK(rank2_residual(m) == doctest::Approx(std::max(0.0, want)).epsilon(1e-8));
    }
  }
}

TEST_CASE("loss ratio") {
  TwoLayerNet net;
  net.m1 = net.m2 = 2;
  net.activation = {ActivationKind::SmoothLeaky, 0.5};
  net.w = Matrix(4, 6);
  const auto ds = gen_gaussian(5, 6, 91);
  SUBCASE("exactly one at zero weights") { CHECK(loss_ratio(net, ds) == doctest::Approx(1.0)); }

  SUBCASE("two-sample hand value") {
    // net reaching f(e1) = 1 and f(e2) = -1 exactly: w1 = sqrt(2) e1 (positive
    // neuron), w2 = sqrt(2) e2 (negative neuron); both labels +1, so the
    // ratio is g(-1)/g(1) = (1+e)/(1+1/e)
    Dataset two;
    two.xs = Matrix(2, 2);
    two.xs(0, 0) = 1.0;
    two.xs(1, 1) = 1.0;
    two.ys = {1.0, 1.0};
    two.meta = "pair";
    TwoLayerNet lin;
    lin.m1 = lin.m2 = 1;
    lin.activation = {ActivationKind::LeakyRelu, 0.5};
    lin.w = Matrix(2, 2);
    lin.w(0, 0) = std::sqrt(2.0);
    lin.w(1, 1) = std::sqrt(2.0);
    CHECK(forward(lin, two.xs.row(0)) == doctest::Approx(1.0));
    CHECK(forward(lin, two.xs.row(1)) == doctest::Approx(-1.0));
    const double e = std::exp(1.0);
    CHECK(loss_ratio(lin, two) ==
          doctest::Approx((1.0 + e) / (1.0 + 1.0 / e)).epsilon(1e-12));
  }

  SUBCASE("survives margins in the hundreds") {
    Dataset two;
    two.xs = Matrix(2, 1);
    two.xs(0, 0) = 700.0;
    two.xs(1, 0) = -700.0;
    two.ys = {1.0, 1.0};
    two.meta = "wide";
    TwoLayerNet lin;
    lin.m1 = lin.m2 = 1;
    lin.activation = {ActivationKind::LeakyRelu, 0.5};
    lin.w = Matrix(2, 1);
    lin.w(0, 0) = std::sqrt(2.0);  // margins +700 and -350
    const double ratio = loss_ratio(lin, two);
    CHECK(std::isfinite(std::log(ratio)));
    // log ratio = softplus(700) - softplus(-350) ~ 700
    CHECK(std::log(ratio) == doctest::Approx(700.0).epsilon(1e-6));
  }
}

TEST_CASE("proxy-PL inequality at zero weights and by hand") {
  SUBCASE("holds at W = 0 on near-orthogonal data") {
    const auto ds = gen_gaussian(8, 512, 92);
    TwoLayerNet net;
    net.m1 = net.m2 = 2;
    net.activation = {ActivationKind::SmoothLeaky, 0.5};
    net.w = Matrix(4, 512);
    const auto pl = proxy_pl(net, ds);
    CHECK(pl.lhs >= pl.rhs_gd);
    CHECK(pl.lhs >= pl.rhs_flow);
    CHECK(pl.rhs_flow > pl.rhs_gd);  // the flow constant is the tighter one
  }
  SUBCASE("single unit sample, two neurons, hand computation") {
    Dataset one;
    one.xs = Matrix(1, 1);
    one.xs(0, 0) = 1.0;
    one.ys = {1.0};
    one.meta = "unit";
    TwoLayerNet net;
    net.m1 = net.m2 = 1;
    net.activation = {ActivationKind::SmoothLeaky, 0.5};
    net.w = Matrix(2, 1);
    net.w(0, 0) = 0.3;
    net.w(1, 0) = -0.2;
    const auto pl = proxy_pl(net, one);
    const double f = forward(net, std::vector<double>{1.0});
    const double g = loss_sigmoid(LossKind::Logistic, f);
    const double p1 = net.activation.derivative(0.3);
    const double p2 = net.activation.derivative(-0.2);
    const double expect = g / std::sqrt(2.0) * std::sqrt(p1 * p1 + p2 * p2);
    CHECK(pl.lhs == doctest::Approx(expect).epsilon(1e-12));
    CHECK(pl.rhs_gd == doctest::Approx(0.5 / (2.0 * std::sqrt(2.0)) * g));
    CHECK(pl.lhs >= pl.rhs_gd);
  }
}

TEST_CASE("mu alignment") {
  SUBCASE("rows equal to mu-hat align perfectly") {
    const auto ds = gen_gaussian(6, 16, 93);
    const auto mu = mu_hat(ds);
    Matrix w(3, 16);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 16; ++k) w(j, k) = (j + 1.0) * mu[k];
    const auto align = mu_alignment(w, ds);
    for (double c : align.cosine) CHECK(c == doctest::Approx(1.0));
    CHECK(align.min_cosine == doctest::Approx(1.0));
  }
  SUBCASE("zero mu-hat is degenerate") {
    Dataset ds;
    ds.xs = Matrix(2, 2);
    ds.xs(0, 0) = 1.0;
    ds.xs(1, 0) = 1.0;
    ds.ys = {1.0, -1.0};
    ds.meta = "cancel";
    CHECK_THROWS_AS(mu_alignment(Matrix(2, 2, 1.0), ds), std::invalid_argument);
  }
  SUBCASE("mu-hat margin bound on near-orthogonal data") {
    const auto ds = gen_gaussian(10, 1024, 94);
    const auto cert = certify(ds, 0.5);
    const auto mu = mu_hat(ds);
    const double mu_norm = norm(mu);
    const double bound = std::sqrt(2.0) * cert.r_min /
                         (3.0 * cert.ratio_R * std::sqrt(static_cast<double>(ds.n())));
    for (std::size_t k = 0; k < ds.n(); ++k)
      CHECK(ds.ys[k] * dot(mu, ds.xs.row(k)) / mu_norm >= bound);
  }
}

TEST_CASE("trace bound report on a compliant run") {
  const auto ds = gen_gaussian(8, 256, 95);
  const auto cert = certify(ds, 0.5);
  const auto budget = derive_budget(cert, 8, 256, 0.05, 0.25);

  TrainConfig cfg;
  cfg.shape = {4, 4, 256};
  cfg.activation = {ActivationKind::SmoothLeaky, 0.5};
  cfg.loss = LossKind::Logistic;
  cfg.alpha = budget.alpha_max;
  cfg.steps = 400;
  cfg.init = {budget.omega_max(cfg.alpha), 96};
  cfg.record_every = 20;

  const auto res = train(cfg, ds);
  const auto rep = check_trace_bounds(res.trace, cert, cfg);
  CHECK(rep.violations() == 0);
  CHECK(rep.checks.size() > 50);
  CHECK_FALSE(rep.loss_bound_skipped);

  SUBCASE("csv serialization") {
    const auto path = std::filesystem::temp_directory_path() / "leakybias_bounds.csv";
    rep.write_csv(path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "bound,step,lhs,rhs,pass");
    std::filesystem::remove(path);
  }
}

TEST_CASE("alpha = 0 trace skips the loss bound but keeps the rest") {
  const auto ds = gen_gaussian(4, 64, 97);
  const auto cert = certify(ds, 0.5);
  TrainConfig cfg;
  cfg.shape = {2, 2, 64};
  cfg.activation = {ActivationKind::SmoothLeaky, 0.5};
  cfg.alpha = 0.0;
  cfg.steps = 10;
  cfg.init = {1e-3, 98};
  cfg.record_every = 1;
  const auto res = train(cfg, ds);
  const auto rep = check_trace_bounds(res.trace, cert, cfg);
  CHECK(rep.loss_bound_skipped);
  for (const auto& c : rep.checks) CHECK(c.bound != "loss_upper");
  CHECK(rep.violations() == 0);
}
