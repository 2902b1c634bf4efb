#include "leakybias/margin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "leakybias/analysis.hpp"
#include "leakybias/rng.hpp"

namespace leakybias {

namespace {

constexpr double kQpTol = 1e-9;
constexpr double kSvmTol = 1e-9;
constexpr double kMarginTol = 1e-8;
constexpr double kRank2Tol = 1e-10;

// Dual Hessian of the pair problem: Q_ik = c_ik <x_i, x_k> where the class
// factor c_ik follows from the stationarity equations for v and u.
Matrix dual_matrix(const Dataset& ds, std::size_t m1, std::size_t m2, double gamma) {
  const double m = static_cast<double>(m1 + m2);
  const double cpp = (static_cast<double>(m1) + static_cast<double>(m2) * gamma * gamma) / m;
  const double cnn = (static_cast<double>(m2) + static_cast<double>(m1) * gamma * gamma) / m;
  Matrix q(ds.n(), ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i)
    for (std::size_t k = i; k < ds.n(); ++k) {
      const double inner = dot(ds.xs.row(i), ds.xs.row(k));
      double c;
      if (ds.ys[i] > 0 && ds.ys[k] > 0) c = cpp;
      else if (ds.ys[i] < 0 && ds.ys[k] < 0) c = cnn;
      else c = -gamma;
      q(i, k) = c * inner;
      q(k, i) = c * inner;
    }
  return q;
}

// Fixed point residual of mu = max(0, mu + (1 - Q mu)).
double projected_residual(const Matrix& q, const std::vector<double>& mu) {
  double res = 0.0;
  const auto qmu = matvec(q, mu);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double g = 1.0 - qmu[i];
    const double step = std::max(0.0, mu[i] + g) - mu[i];
    res = std::max(res, std::abs(step));
  }
  return res;
}

double spectral_bound(const Matrix& q) {
  // Gershgorin upper bound is enough for a safe step size.
  double bound = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < q.cols(); ++k) row += std::abs(q(i, k));
    bound = std::max(bound, row);
  }
  return bound;
}

// Solves the reduced system Q_AA mu_A = 1 on the active set; returns false if
// the reduced matrix is not positive definite or the solution leaves the cone.
bool active_set_polish(const Matrix& q, std::vector<double>& mu) {
  const std::size_t n = mu.size();
  const auto qmu = matvec(q, mu);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i)
    if (mu[i] > 0.0 || 1.0 - qmu[i] > 0.0) active.push_back(i);
  if (active.empty()) return false;

  Matrix qa(active.size(), active.size());
  std::vector<double> rhs(active.size(), 1.0);
  for (std::size_t a = 0; a < active.size(); ++a)
    for (std::size_t b = 0; b < active.size(); ++b) qa(a, b) = q(active[a], active[b]);
  std::vector<double> sol;
  try {
    sol = cholesky_solve(qa, rhs);
  } catch (const std::runtime_error&) {
    return false;
  }
  for (double v : sol)
    if (!(v >= 0.0)) return false;

  std::vector<double> candidate(n, 0.0);
  for (std::size_t a = 0; a < active.size(); ++a) candidate[active[a]] = sol[a];
  // accept only if the inactive gradients stay nonpositive
  const auto qc = matvec(q, candidate);
  for (std::size_t i = 0; i < n; ++i)
    if (candidate[i] == 0.0 && 1.0 - qc[i] > kQpTol) return false;
  mu = candidate;
  return true;
}

std::vector<double> probe_vector(CounterRng& rng, std::size_t d) {
  std::vector<double> x(d);
  for (auto& v : x) v = rng.next_gaussian();
  return x;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::vector<double> QpSolution::predictor() const {
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m1 + m2));
  std::vector<double> z(v.size());
  for (std::size_t k = 0; k < z.size(); ++k)
    z[k] = inv_sqrt_m * (static_cast<double>(m1) * v[k] - static_cast<double>(m2) * u[k]);
  return z;
}

QpSolution solve_qp(const Dataset& ds, std::size_t m1, std::size_t m2, double gamma,
                    std::uint64_t dual_start_seed) {
  ds.validate();
  if (m1 < 1 || m2 < 1) throw std::invalid_argument("solve_qp: need m1 >= 1 and m2 >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("solve_qp: gamma must lie in (0,1)");

  const std::size_t n = ds.n();
  const Matrix q = dual_matrix(ds, m1, m2, gamma);
  const double lip = spectral_bound(q);
  const double step = lip > 0.0 ? 1.0 / lip : 1.0;

  std::vector<double> mu(n, 0.0);
  if (dual_start_seed != 0) {
    CounterRng rng(dual_start_seed);
    for (auto& v : mu) v = rng.next_uniform() / std::max(lip, 1.0);
  }

  // Projected gradient ascent with Nesterov momentum; an active-set polish
  // snaps to the exact face once identified.
  std::vector<double> y = mu;
  double t_momentum = 1.0;
  const int cap = 200000;
  bool done = false;
  for (int it = 0; it < cap; ++it) {
    const auto qy = matvec(q, y);
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i)
      next[i] = std::max(0.0, y[i] + step * (1.0 - qy[i]));

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    for (std::size_t i = 0; i < n; ++i)
      y[i] = next[i] + (t_momentum - 1.0) / t_next * (next[i] - mu[i]);
    t_momentum = t_next;
    mu = std::move(next);

    if (it % 32 == 0) {
      if (projected_residual(q, mu) <= kQpTol) {
        done = true;
        break;
      }
      if (it % 256 == 0 && active_set_polish(q, mu) && projected_residual(q, mu) <= kQpTol) {
        done = true;
        break;
      }
    }
  }
  if (!done && projected_residual(q, mu) > kQpTol)
    throw SolverStalled("solve_qp: dual residual stalled at " +
                        std::to_string(projected_residual(q, mu)));

  QpSolution sol;
  sol.m1 = m1;
  sol.m2 = m2;
  sol.gamma = gamma;
  sol.duals = mu;

  // Primal recovery from stationarity.
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m1 + m2));
  sol.v.assign(ds.d(), 0.0);
  sol.u.assign(ds.d(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double sv = ds.ys[i] > 0 ? 1.0 : -gamma;
    const double su = ds.ys[i] > 0 ? -gamma : 1.0;
    axpy(inv_sqrt_m * mu[i] * sv, ds.xs.row(i), sol.v);
    axpy(inv_sqrt_m * mu[i] * su, ds.xs.row(i), sol.u);
  }
  sol.objective = 0.5 * (static_cast<double>(m1) * norm_sq(sol.v) +
                         static_cast<double>(m2) * norm_sq(sol.u));

  // Converged KKT residual: primal feasibility plus dual fixed point.
  double feas = 0.0;
  const auto qmu = matvec(q, mu);
  for (std::size_t i = 0; i < n; ++i) feas = std::max(feas, 1.0 - qmu[i]);
  sol.kkt_residual = std::max(std::max(feas, 0.0), projected_residual(q, mu));
  return sol;
}

TwoLayerNet build_kkt_network(const QpSolution& sol) {
  TwoLayerNet net;
  net.m1 = sol.m1;
  net.m2 = sol.m2;
  net.activation = {ActivationKind::LeakyRelu, sol.gamma};
  net.w = Matrix(sol.m1 + sol.m2, sol.v.size());
  for (std::size_t j = 0; j < sol.m1; ++j)
    for (std::size_t k = 0; k < sol.v.size(); ++k) net.w(j, k) = sol.v[k];
  for (std::size_t j = sol.m1; j < sol.m1 + sol.m2; ++j)
    for (std::size_t k = 0; k < sol.u.size(); ++k) net.w(j, k) = sol.u[k];
  return net;
}

std::vector<double> solve_svm(const Dataset& ds) {
  ds.validate();
  const std::size_t n = ds.n();

  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = ds.ys[i] * ds.ys[j] * dot(ds.xs.row(i), ds.xs.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }

  std::vector<double> beta(n, 0.0);
  std::vector<double> z(ds.d(), 0.0);
  const int cap = 200000;
  for (int sweep = 0; sweep < cap; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      const double margin = ds.ys[i] * dot(z, ds.xs.row(i));
      const double delta = std::max(-beta[i], (1.0 - margin) / k(i, i));
      if (delta != 0.0) {
        beta[i] += delta;
        axpy(delta * ds.ys[i], ds.xs.row(i), z);
      }
    }
    // KKT: feasibility and complementary slackness
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double margin = ds.ys[i] * dot(z, ds.xs.row(i));
      worst = std::max(worst, 1.0 - margin);
      worst = std::max(worst, std::abs(beta[i] * (margin - 1.0)));
    }
    if (worst <= kSvmTol) return z;
  }

  // Either the data is inseparable or coordinate ascent cannot reach the
  // tolerance; distinguish by the remaining primal violation.
  double viol = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    viol = std::max(viol, 1.0 - ds.ys[i] * dot(z, ds.xs.row(i)));
  if (viol > 1e-3) throw NotSeparable("solve_svm: no separating direction found");
  throw SolverStalled("solve_svm: residual stalled at " + std::to_string(viol));
}

bool KktReport::all_pass() const {
  return margins_equal_one && rank_le_2 && lambda_in_bounds && sign_pattern_ok &&
         global_opt_ok && objective_identity_ok && linear_boundary_ok && z_margin_ok &&
         norm_ratio <= norm_ratio_bound * (1.0 + kMarginTol);
}

std::string KktReport::to_text() const {
  std::ostringstream os;
  auto line = [&](const char* name, bool pass, const std::string& detail) {
    os << (pass ? "  [ok]   " : "  [FAIL] ") << name << ": " << detail << "\n";
  };
  os << "KKT verification report\n";
  line("margins_equal_one", margins_equal_one,
       "max |y_i f(x_i) - 1| = " + fmt(max_margin_deviation));
  line("rank_le_2", rank_le_2, "rank2_residual = " + fmt(rank2_resid));
  line("lambda_in_bounds", lambda_in_bounds,
       "lambda in [" + fmt(lambda_min) + ", " + fmt(lambda_max) + "], bounds (" +
           fmt(lambda_lower_bound) + ", " + fmt(lambda_upper_bound) + ")");
  line("sign_pattern_ok", sign_pattern_ok, "y_i v.x_i > 0 and y_i u.x_i < 0 for all i");
  line("global_opt_ok", global_opt_ok,
       "max objective gap vs feasible perturbations = " + fmt(max_objective_gap) +
           (objective_identity_ok ? ", |W|_F^2 identity holds" : ", |W|_F^2 identity FAILS"));
  line("linear_boundary_ok", linear_boundary_ok,
       "sign agreement " + fmt(probe_agreement) + " over " + std::to_string(probes_checked) +
           " probes");
  line("z_margin_ok", z_margin_ok, "min y_i z.x_i = " + fmt(z_margin_min));
  line("norm_ratio_ok", norm_ratio <= norm_ratio_bound * (1.0 + kMarginTol),
       "|z|/|z*| = " + fmt(norm_ratio) + " vs 2/(kappa+gamma) = " + fmt(norm_ratio_bound) +
           " (kappa = " + fmt(kappa) + ")");
  os << (all_pass() ? "all checks passed\n" : "CHECKS FAILED\n");
  return os.str();
}

std::string KktReport::to_csv() const {
  std::ostringstream os;
  os << "check,measured,threshold,pass\n";
  os << "margins_equal_one," << fmt(max_margin_deviation) << "," << fmt(kMarginTol) << ","
     << (margins_equal_one ? 1 : 0) << "\n";
  os << "rank_le_2," << fmt(rank2_resid) << "," << fmt(kRank2Tol) << "," << (rank_le_2 ? 1 : 0)
     << "\n";
  os << "lambda_min," << fmt(lambda_min) << "," << fmt(lambda_lower_bound) << ","
     << (lambda_in_bounds ? 1 : 0) << "\n";
  os << "lambda_max," << fmt(lambda_max) << "," << fmt(lambda_upper_bound) << ","
     << (lambda_in_bounds ? 1 : 0) << "\n";
  os << "sign_pattern,0,0," << (sign_pattern_ok ? 1 : 0) << "\n";
  os << "global_opt," << fmt(max_objective_gap) << "," << fmt(-kMarginTol) << ","
     << (global_opt_ok ? 1 : 0) << "\n";
  os << "objective_identity,0,0," << (objective_identity_ok ? 1 : 0) << "\n";
  os << "linear_boundary," << fmt(probe_agreement) << ",1," << (linear_boundary_ok ? 1 : 0)
     << "\n";
  os << "z_margin," << fmt(z_margin_min) << "," << fmt(1.0 - kMarginTol) << ","
     << (z_margin_ok ? 1 : 0) << "\n";
  os << "norm_ratio," << fmt(norm_ratio) << "," << fmt(norm_ratio_bound) << ","
     << (norm_ratio <= norm_ratio_bound * (1.0 + kMarginTol) ? 1 : 0) << "\n";
  return os.str();
}

KktReport verify_theorem(const QpSolution& sol, const Dataset& ds,
                         std::size_t probe_count, std::uint64_t probe_seed) {
  KktReport rep;
  const std::size_t n = ds.n();
  const TwoLayerNet net = build_kkt_network(sol);
  const auto z = sol.predictor();

  // geometry for the dual bounds
  double r_min = std::numeric_limits<double>::infinity(), r_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double nm = norm(ds.xs.row(i));
    r_min = std::min(r_min, nm);
    r_max = std::max(r_max, nm);
  }

  // item 1: unit margins
  rep.max_margin_deviation = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    rep.max_margin_deviation = std::max(
        rep.max_margin_deviation, std::abs(ds.ys[i] * forward(net, ds.xs.row(i)) - 1.0));
  rep.margins_equal_one = rep.max_margin_deviation <= kMarginTol;

  // item 2: rank at most two
  rep.rank2_resid = rank2_residual(net.w);
  rep.rank_le_2 = rep.rank2_resid <= kRank2Tol;

  // item 3: dual bounds, strict
  rep.lambda_lower_bound = 1.0 / (2.0 * r_max * r_max);
  rep.lambda_upper_bound = 3.0 / (2.0 * sol.gamma * sol.gamma * r_min * r_min);
  rep.lambda_min = *std::min_element(sol.duals.begin(), sol.duals.end());
  rep.lambda_max = *std::max_element(sol.duals.begin(), sol.duals.end());
  rep.lambda_in_bounds =
      rep.lambda_min > rep.lambda_lower_bound && rep.lambda_max < rep.lambda_upper_bound;

  // item 3, sign pattern
  rep.sign_pattern_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double yv = ds.ys[i] * dot(sol.v, ds.xs.row(i));
    const double yu = ds.ys[i] * dot(sol.u, ds.xs.row(i));
    if (!(yv > 0.0 && yu < 0.0)) rep.sign_pattern_ok = false;
  }

  // item 4: global optimality against feasibility-projected perturbations
  {
    CounterRng rng(substream(probe_seed, 0x40));
    const double m = static_cast<double>(sol.m1 + sol.m2);
    const double sqrt_m = std::sqrt(m);
    rep.max_objective_gap = std::numeric_limits<double>::infinity();
    int tried = 0;
    for (int trial = 0; tried < 100 && trial < 1000; ++trial) {
      const double rel = 1e-3 * std::pow(10.0, 2.5 * (trial % 100) / 99.0);  // 1e-3 .. ~0.3
      std::vector<double> pv = sol.v, pu = sol.u;
      const double sv = norm(sol.v) * rel, su = norm(sol.u) * rel;
      for (auto& x : pv) x += sv * rng.next_gaussian() / std::sqrt(double(pv.size()));
      for (auto& x : pu) x += su * rng.next_gaussian() / std::sqrt(double(pu.size()));
      // scale back to feasibility
      double min_c = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        const double cv = dot(pv, ds.xs.row(i)), cu = dot(pu, ds.xs.row(i));
        const double c = ds.ys[i] > 0
                             ? (sol.m1 * cv - sol.gamma * sol.m2 * cu) / sqrt_m
                             : (sol.m2 * cu - sol.gamma * sol.m1 * cv) / sqrt_m;
        min_c = std::min(min_c, c);
      }
      if (!(min_c > 0.0)) continue;  // rare: perturbation crossed the boundary, redraw
      const double s = 1.0 / min_c;
      const double obj = 0.5 * (sol.m1 * norm_sq(pv) * s * s + sol.m2 * norm_sq(pu) * s * s);
      rep.max_objective_gap = std::min(rep.max_objective_gap, obj - sol.objective);
      ++tried;
    }
    rep.global_opt_ok = tried == 100 && rep.max_objective_gap >= -kMarginTol;
    const double fro_sq = net.w.frobenius_norm_sq();
    const double identity = sol.m1 * norm_sq(sol.v) + sol.m2 * norm_sq(sol.u);
    rep.objective_identity_ok =
        std::abs(fro_sq - identity) <= 1e-9 * std::max(1.0, std::abs(identity));
  }

  // item 6: exact linear boundary on probes and training points
  {
    CounterRng rng(substream(probe_seed, 0x60));
    std::size_t agree = 0, checked = 0;
    auto sign_of = [](double v) { return v > 0.0 ? 1 : -1; };
    std::size_t draws = 0;
    while (checked < probe_count && draws < 10 * probe_count + 100) {
      ++draws;
      const auto x = probe_vector(rng, ds.d());
      const double zx = dot(z, x);
      if (zx == 0.0) continue;  // measure-zero tie: discard and redraw
      if (sign_of(forward(net, x)) == sign_of(zx)) ++agree;
      ++checked;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double zx = dot(z, ds.xs.row(i));
      if (zx == 0.0) continue;
      if (sign_of(forward(net, ds.xs.row(i))) == sign_of(zx)) ++agree;
      ++checked;
    }
    rep.probes_checked = checked;
    rep.probe_agreement = checked ? static_cast<double>(agree) / checked : 0.0;
    rep.linear_boundary_ok = agree == checked;
  }

  // item 7: z margins and the approximate-max-margin bound
  {
    rep.z_margin_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      rep.z_margin_min =
          std::min(rep.z_margin_min, ds.ys[i] * dot(z, ds.xs.row(i)));
    rep.z_margin_ok = rep.z_margin_min >= 1.0 - kMarginTol;

    const auto z_star = solve_svm(ds);
    rep.kappa = std::sqrt(static_cast<double>(std::min(sol.m1, sol.m2)) /
                          static_cast<double>(std::max(sol.m1, sol.m2)));
    rep.norm_ratio_bound = 2.0 / (rep.kappa + sol.gamma);
    rep.norm_ratio = norm(z) / norm(z_star);
  }
  return rep;
}

LambdaRecovery recover_lambda(const TwoLayerNet& net, const Dataset& ds) {
  net.validate();
  const std::size_t n = ds.n(), d = ds.d();
  const double gamma = net.activation.gamma;
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(net.m()));

  // mean positive and mean negative neuron
  std::vector<double> vbar(d, 0.0), ubar(d, 0.0);
  for (std::size_t j = 0; j < net.m1; ++j) axpy(1.0 / net.m1, net.w.row(j), vbar);
  for (std::size_t j = net.m1; j < net.m(); ++j) axpy(1.0 / net.m2, net.w.row(j), ubar);

  // slopes fixed from the measured sign pattern
  std::vector<double> phi_v(n), phi_u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pv = dot(vbar, ds.xs.row(i));
    const double pu = dot(ubar, ds.xs.row(i));
    if (pv == 0.0 || pu == 0.0)
      throw std::invalid_argument("recover_lambda: zero preactivation, sign pattern undefined");
    phi_v[i] = pv > 0.0 ? 1.0 : gamma;
    phi_u[i] = pu > 0.0 ? 1.0 : gamma;
  }

  // Design column i stacks the v and u stationarity contributions; NNLS on
  // the n x n normal equations via Lawson-Hanson active sets.
  Matrix gram(n, n);
  std::vector<double> rhs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i; k < n; ++k) {
      const double xx = dot(ds.xs.row(i), ds.xs.row(k));
      const double g = inv_sqrt_m * inv_sqrt_m * ds.ys[i] * ds.ys[k] *
                       (phi_v[i] * phi_v[k] + phi_u[i] * phi_u[k]) * xx;
      gram(i, k) = g;
      gram(k, i) = g;
    }
    rhs[i] = inv_sqrt_m * ds.ys[i] *
             (phi_v[i] * dot(vbar, ds.xs.row(i)) -
              phi_u[i] * dot(ubar, ds.xs.row(i)));
  }

  std::vector<double> lambda(n, 0.0);
  std::vector<bool> passive(n, false);
  const double scale = *std::max_element(rhs.begin(), rhs.end(),
                                         [](double a, double b) { return std::abs(a) < std::abs(b); });
  const double tol = 1e-12 * std::max(1.0, std::abs(scale));
  for (int outer = 0; outer < 4 * static_cast<int>(n) + 16; ++outer) {
    // gradient of the least-squares objective at lambda
    const auto glam = matvec(gram, lambda);
    double best = tol;
    std::size_t best_i = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (passive[i]) continue;
      const double w = rhs[i] - glam[i];
      if (w > best) {
        best = w;
        best_i = i;
      }
    }
    if (best_i == n) break;
    passive[best_i] = true;

    for (int inner = 0; inner < 4 * static_cast<int>(n) + 16; ++inner) {
      std::vector<std::size_t> act;
      for (std::size_t i = 0; i < n; ++i)
        if (passive[i]) act.push_back(i);
      Matrix ga(act.size(), act.size());
      std::vector<double> ra(act.size());
      for (std::size_t a = 0; a < act.size(); ++a) {
        ra[a] = rhs[act[a]];
        for (std::size_t b = 0; b < act.size(); ++b) ga(a, b) = gram(act[a], act[b]);
      }
      std::vector<double> s;
      try {
        s = cholesky_solve(ga, ra);
      } catch (const std::runtime_error&) {
        throw SolverStalled("recover_lambda: singular active set");
      }
      bool feasible = true;
      for (double v : s)
        if (v <= 0.0) feasible = false;
      if (feasible) {
        std::fill(lambda.begin(), lambda.end(), 0.0);
        for (std::size_t a = 0; a < act.size(); ++a) lambda[act[a]] = s[a];
        break;
      }
      // step to the boundary, drop the blocking coordinate
      double alpha = 1.0;
      for (std::size_t a = 0; a < act.size(); ++a)
        if (s[a] <= 0.0)
          alpha = std::min(alpha, lambda[act[a]] / (lambda[act[a]] - s[a]));
      for (std::size_t a = 0; a < act.size(); ++a) {
        lambda[act[a]] += alpha * (s[a] - lambda[act[a]]);
        if (lambda[act[a]] <= tol) {
          lambda[act[a]] = 0.0;
          passive[act[a]] = false;
        }
      }
    }
  }

  // relative misfit of the stacked stationarity equations
  std::vector<double> fit_v(d, 0.0), fit_u(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    axpy(inv_sqrt_m * lambda[i] * ds.ys[i] * phi_v[i], ds.xs.row(i), fit_v);
    axpy(-inv_sqrt_m * lambda[i] * ds.ys[i] * phi_u[i], ds.xs.row(i), fit_u);
  }
  double mis = 0.0, ref = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    mis += (fit_v[k] - vbar[k]) * (fit_v[k] - vbar[k]) + (fit_u[k] - ubar[k]) * (fit_u[k] - ubar[k]);
    ref += vbar[k] * vbar[k] + ubar[k] * ubar[k];
  }
  LambdaRecovery out;
  out.lambda = std::move(lambda);
  out.residual = ref > 0.0 ? std::sqrt(mis / ref) : std::sqrt(mis);
  return out;
}

CounterexampleFixture counterexample(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0 / 72.0))
    throw std::invalid_argument("counterexample: epsilon must lie in (0, 1/72]");
  CounterexampleFixture fx;
  fx.epsilon = epsilon;
  fx.gamma = 0.5;
  fx.ds.xs = Matrix(3, 3);
  fx.ds.xs(0, 0) = -1.0;
  fx.ds.xs(1, 0) = epsilon;
  fx.ds.xs(1, 1) = std::sqrt(1.0 - epsilon * epsilon);
  fx.ds.xs(2, 2) = 1.0;
  fx.ds.ys = {-1.0, 1.0, 1.0};
  fx.ds.seed = 0;
  fx.ds.meta = "three-point-fixture eps=" + std::to_string(epsilon);

  const double l12 = 8.0 / (4.0 * epsilon + 5.0);
  fx.lambda = {l12, l12, 8.0 / 5.0};

  // z = (6/(4 eps+5)) x2 + (6/5) x3 - (6/(4 eps+5)) x1
  const double c = 6.0 / (4.0 * epsilon + 5.0);
  fx.z.assign(3, 0.0);
  for (std::size_t k = 0; k < 3; ++k)
    fx.z[k] = c * fx.ds.xs(1, k) + 1.2 * fx.ds.xs(2, k) - c * fx.ds.xs(0, k);
  return fx;
}

}  // namespace leakybias
