#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "leakybias/model.hpp"
#include "leakybias/rng.hpp"
#include "oracles.hpp"

using namespace leakybias;

namespace {

TwoLayerNet random_net(std::size_t m1, std::size_t m2, std::size_t d, Activation act,
                       std::uint64_t seed, double scale = 1.0) {
  TwoLayerNet net;
  net.m1 = m1;
  net.m2 = m2;
  net.activation = act;
  net.w = Matrix(m1 + m2, d);
  CounterRng rng(seed);
  for (std::size_t k = 0; k < net.w.size(); ++k) net.w.data()[k] = scale * rng.next_gaussian();
  return net;
}

Dataset make_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  return gen_gaussian(n, d, std::vector<double>(d, 1.0), seed);
}

}  // namespace

TEST_CASE("activation point values") {
  Activation leaky{ActivationKind::LeakyRelu, 0.1};
  auto e = act_eval(leaky, -2.0);
  CHECK(e.value == doctest::Approx(-0.2));
  CHECK(e.derivative == doctest::Approx(0.1));
  CHECK_FALSE(e.second_derivative.has_value());
  CHECK(leaky.derivative(0.0) == 0.1);  // fixed subgradient at the kink
  CHECK(leaky.value(0.0) == 0.0);

  for (double gamma : {0.1, 0.5, 0.9}) {
    Activation smooth{ActivationKind::SmoothLeaky, gamma};
    CHECK(smooth.value(0.0) == doctest::Approx(0.0));
    CHECK(smooth.derivative(0.0) == doctest::Approx((1.0 + gamma) / 2.0));
    CHECK(smooth.second_derivative(0.0).has_value());
  }
}

TEST_CASE("smooth activation slope and curvature bounds by dense sampling") {
  Activation smooth{ActivationKind::SmoothLeaky, 0.1};
  CounterRng rng(31);
  double max_second = 0.0, min_slope = 2.0, max_slope = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double z = (rng.next_uniform() - 0.5) * 2000.0;  // cover |z| up to 1e3
    const auto e = act_eval(smooth, z);
    CHECK(std::isfinite(e.value));
    min_slope = std::min(min_slope, e.derivative);
    max_slope = std::max(max_slope, e.derivative);
    max_second = std::max(max_second, std::abs(*e.second_derivative));
  }
  CHECK(min_slope >= 0.1 - 1e-12);
  CHECK(max_slope <= 1.0 + 1e-12);
  CHECK(max_second <= 0.25 + 1e-12);
}

TEST_CASE("large-argument stability") {
  Activation smooth{ActivationKind::SmoothLeaky, 0.3};
  // at z = 1000 softplus(z) ~ z, at z = -1000 it vanishes
  CHECK(smooth.value(1000.0) ==
        doctest::Approx(0.3 * 1000.0 + 0.7 * (1000.0 - std::log(2.0))));
  CHECK(smooth.value(-1000.0) == doctest::Approx(0.3 * -1000.0 - 0.7 * std::log(2.0)));
  CHECK(loss_value(LossKind::Logistic, 1000.0) == doctest::Approx(0.0));
  CHECK(loss_value(LossKind::Logistic, -1000.0) == doctest::Approx(1000.0));
  CHECK(std::isfinite(log_loss_sigmoid(LossKind::Logistic, 750.0)));
}

TEST_CASE("forward on hand-built nets") {
  SUBCASE("zero weights give zero output") {
    for (auto kind : {ActivationKind::LeakyRelu, ActivationKind::SmoothLeaky}) {
      TwoLayerNet net;
      net.m1 = 3;
      net.m2 = 2;
      net.activation = {kind, 0.4};
      net.w = Matrix(5, 7);
      std::vector<double> x(7, 1.3);
      CHECK(forward(net, x) == doctest::Approx(0.0));
    }
  }
  SUBCASE("two-neuron hand evaluation") {
    TwoLayerNet net;
    net.m1 = net.m2 = 1;
    net.activation = {ActivationKind::LeakyRelu, 0.5};
    net.w = Matrix(2, 2);
    net.w(0, 0) = 1.0;  // w1 = (1,0), positive neuron
    net.w(1, 1) = 1.0;  // w2 = (0,1), negative neuron
    std::vector<double> x = {1.0, -1.0};
    // f = (phi(1) - phi(-1)) / sqrt(2) = (1 + 0.5) / sqrt(2)
    CHECK(forward(net, x) == doctest::Approx(1.5 / std::sqrt(2.0)));
  }
  SUBCASE("dimension mismatch throws") {
    TwoLayerNet net;
    net.m1 = net.m2 = 1;
    net.w = Matrix(2, 3);
    std::vector<double> x(4, 0.0);
    CHECK_THROWS_AS(forward(net, x), std::invalid_argument);
  }
}

TEST_CASE("positive homogeneity of the leaky relu network") {
  const auto ds = make_dataset(6, 10, 21);
  auto net = random_net(3, 2, 10, {ActivationKind::LeakyRelu, 0.25}, 22);
  for (double beta : {0.5, 2.0, 10.0}) {
    auto scaled = net;
    for (std::size_t k = 0; k < scaled.w.size(); ++k) scaled.w.data()[k] *= beta;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const double f = forward(net, ds.xs.row(i));
      const double fs = forward(scaled, ds.xs.row(i));
      CHECK(fs == doctest::Approx(beta * f).epsilon(1e-12));
    }
  }
}

TEST_CASE("losses at zero weights") {
  TwoLayerNet net;
  net.m1 = net.m2 = 2;
  net.activation = {ActivationKind::SmoothLeaky, 0.5};
  net.w = Matrix(4, 8);
  const auto ds = make_dataset(5, 8, 23);
  CHECK(empirical_loss(net, ds, LossKind::Logistic) == doctest::Approx(std::log(2.0)));
  CHECK(sigmoid_risk(net, ds) == doctest::Approx(0.5));
  CHECK(empirical_loss(net, ds, LossKind::Exponential) == doctest::Approx(1.0));
}

TEST_CASE("loss vs sigmoid risk once margins are positive") {
  // ell(z) <= 2 g(z) for z > 0, so L-hat <= 2 G-hat on interpolating nets
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ds = make_dataset(4, 32, 100 + seed);
    auto net = random_net(2, 2, 32, {ActivationKind::SmoothLeaky, 0.5}, 200 + seed, 0.3);
    // flip data labels to the network's predictions to force interpolation
    Dataset agreeing = ds;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const double f = forward(net, ds.xs.row(i));
      agreeing.ys[i] = f > 0.0 ? 1.0 : -1.0;
    }
    CHECK(empirical_loss(net, agreeing, LossKind::Logistic) <=
          2.0 * sigmoid_risk(net, agreeing) + 1e-12);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 3 + seed % 4, d = 6 + seed % 5;
    const auto ds = make_dataset(n, d, 300 + seed);
    const auto net = random_net(1 + seed % 3, 1 + (seed / 3) % 3, d,
                                {ActivationKind::SmoothLeaky, 0.2 + 0.1 * (seed % 5)},
                                400 + seed, 0.5);
    const LossKind loss = seed % 2 ? LossKind::Logistic : LossKind::Exponential;
    const auto g = grad(net, ds, loss);
    const auto fd = oracles::finite_difference_grad(net, ds, loss);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      num += (g.data()[k] - fd.data()[k]) * (g.data()[k] - fd.data()[k]);
      den += fd.data()[k] * fd.data()[k];
    }
    CHECK(std::sqrt(num / den) <= 1e-6);
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("gradient at zero weights, single positive sample") {
  TwoLayerNet net;
  net.m1 = net.m2 = 1;
  net.activation = {ActivationKind::SmoothLeaky, 0.4};
  net.w = Matrix(2, 3);
  Dataset ds;
  ds.xs = Matrix(1, 3);
  ds.xs(0, 0) = 2.0;
  ds.xs(0, 1) = -1.0;
  ds.xs(0, 2) = 0.5;
  ds.ys = {1.0};
  ds.meta = "single";
  const auto g = grad(net, ds, LossKind::Logistic);
  // grad_j = -(1/2) a_j phi'(0) x
  const double phi0 = (1.0 + 0.4) / 2.0;
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(g(0, k) == doctest::Approx(-0.5 / std::sqrt(2.0) * phi0 * ds.xs(0, k)));
    CHECK(g(1, k) == doctest::Approx(0.5 / std::sqrt(2.0) * phi0 * ds.xs(0, k)));
  }
}

TEST_CASE("gradient norm bounded by R_max times the sigmoid risk") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 2 + seed % 6, d = 8 + seed % 9;
    const auto ds = make_dataset(n, d, 500 + seed);
    const auto net = random_net(1 + seed % 4, 1 + seed % 2, d,
                                {ActivationKind::SmoothLeaky, 0.3}, 600 + seed, 0.2);
    double r_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) r_max = std::max(r_max, norm(ds.xs.row(i)));
    const double gnorm = grad(net, ds, LossKind::Logistic).frobenius_norm();
    CHECK(gnorm <= r_max * sigmoid_risk(net, ds) + 1e-12);
  }
}

TEST_CASE("output smoothness in the weights") {
  // |f(x;W) - f(x;V) - <grad_W f(x;V), W-V>| <= H ||x||^2 / (2 sqrt m) ||W-V||_2^2
  CounterRng rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m1 = 2, m2 = 2, d = 6;
    Activation act{ActivationKind::SmoothLeaky, 0.2};
    const auto v = random_net(m1, m2, d, act, 700 + trial, 0.8);
    auto w = v;
    for (std::size_t k = 0; k < w.w.size(); ++k) w.w.data()[k] += 0.3 * rng.next_gaussian();

    std::vector<double> x(d);
    for (auto& xv : x) xv = rng.next_gaussian();

    // grad of the output at V: rows a_j phi'(v_j.x) x
    const double inv_sqrt_m = 1.0 / std::sqrt(4.0);
    double linear = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      const double aj = (j < m1 ? 1.0 : -1.0) * inv_sqrt_m;
      const double slope = act.derivative(dot(v.w.row(j), x));
      for (std::size_t k = 0; k < d; ++k)
        linear += aj * slope * x[k] * (w.w(j, k) - v.w(j, k));
    }
    Matrix diff(4, d);
    for (std::size_t k = 0; k < diff.size(); ++k)
      diff.data()[k] = w.w.data()[k] - v.w.data()[k];
    const double spec_sq = oracles::jacobi_eigenvalues(row_gram(diff)).front();
    const double lhs =
        std::abs(forward(w, x) - forward(v, x) - linear);
    const double rhs = 0.25 * norm_sq(x) / (2.0 * 2.0) * spec_sq;
    CHECK(lhs <= rhs + 1e-12);
  }
}

TEST_CASE("empirical loss gradients are lipschitz in the weights") {
  CounterRng rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 5;
    Activation act{ActivationKind::SmoothLeaky, 0.3};
    const auto ds = make_dataset(4, d, 800 + trial);
    const auto v = random_net(2, 1, d, act, 900 + trial, 0.6);
    auto w = v;
    for (std::size_t k = 0; k < w.w.size(); ++k) w.w.data()[k] += 0.2 * rng.next_gaussian();

    double r_max = 0.0;
    for (std::size_t i = 0; i < ds.n(); ++i) r_max = std::max(r_max, norm(ds.xs.row(i)));

    const auto gw = grad(w, ds, LossKind::Logistic);
    const auto gv = grad(v, ds, LossKind::Logistic);
    Matrix gd(gw.rows(), gw.cols()), wd(gw.rows(), gw.cols());
    for (std::size_t k = 0; k < gd.size(); ++k) {
      gd.data()[k] = gw.data()[k] - gv.data()[k];
      wd.data()[k] = w.w.data()[k] - v.w.data()[k];
    }
    const double spec = std::sqrt(oracles::jacobi_eigenvalues(row_gram(wd)).front());
    const double lip = r_max * r_max * (1.0 + 0.25 / std::sqrt(3.0));
    CHECK(gd.frobenius_norm() <= lip * spec + 1e-12);
  }
}

TEST_CASE("sigmoid risk brackets") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ds = make_dataset(6, 12, 1000 + seed);
    const auto net = random_net(2, 2, 12, {ActivationKind::SmoothLeaky, 0.5}, 1100 + seed, 0.4);
    const double g = sigmoid_risk(net, ds);
    CHECK(g > 0.0);
    CHECK(g < 1.0);
    CHECK(g <= empirical_loss(net, ds, LossKind::Logistic) + 1e-12);
  }
}

TEST_CASE("network checkpoint round trip") {
  const auto net = random_net(3, 2, 9, {ActivationKind::SmoothLeaky, 0.37}, 1200, 0.9);
  const auto path = std::filesystem::temp_directory_path() / "leakybias_net_roundtrip.txt";
  save_network(net, path);
  const auto back = load_network(path);
  CHECK(back.w == net.w);
  CHECK(back.m1 == net.m1);
  CHECK(back.m2 == net.m2);
  CHECK(back.activation.kind == net.activation.kind);
  CHECK(back.activation.gamma == net.activation.gamma);
  std::filesystem::remove(path);

  // trailing meta token survives loading
  save_network(net, path, "meta=qp");
  CHECK(load_network(path).w == net.w);
  std::filesystem::remove(path);
}
