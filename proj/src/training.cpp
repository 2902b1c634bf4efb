#include "leakybias/training.hpp"

#include <algorithm>
#include <cmath>

#include "leakybias/rng.hpp"

namespace leakybias {

namespace {

struct Geometry {
  std::vector<double> mu;  // mu-hat = sum y_i x_i
  double mu_norm = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
  double sqrt_n = 1.0;
};

Geometry make_geometry(const Dataset& ds) {
  Geometry g;
  g.mu = mu_hat(ds);
  g.mu_norm = norm(g.mu);
  g.r_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double nm = norm(ds.xs.row(i));
    g.r_min = std::min(g.r_min, nm);
    g.r_max = std::max(g.r_max, nm);
  }
  g.sqrt_n = std::sqrt(static_cast<double>(ds.n()));
  return g;
}

bool wants(const std::set<std::string>& monitors, const char* name) {
  return monitors.count(name) != 0;
}

double min_neuron_norm(const Matrix& w) {
  double mn = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < w.rows(); ++j) mn = std::min(mn, norm(w.row(j)));
  return mn;
}

TraceRow make_row(long step, double flow_time, const TwoLayerNet& net, const Dataset& ds,
                  const BatchEval& ev, const Geometry& geo,
                  const std::set<std::string>& monitors, double cum_g, bool flow_constant) {
  TraceRow row;
  row.step = step;
  row.flow_time = flow_time;
  row.loss = ev.loss;
  row.sigmoid_risk = ev.sigmoid_risk;
  row.cum_sigmoid_risk = cum_g;
  row.min_neuron_norm = min_neuron_norm(net.w);
  if (wants(monitors, "min_margin")) row.min_margin = ev.min_margin;

  const bool nonzero = net.w.frobenius_norm_sq() > 0.0;
  if (wants(monitors, "fro_norm")) row.fro_norm = net.w.frobenius_norm();
  if (nonzero && (wants(monitors, "stable_rank") || wants(monitors, "spec_norm") ||
                  wants(monitors, "rank2_residual"))) {
    const auto est = top_two_singular_values_sq(net.w);
    const double fro_sq = net.w.frobenius_norm_sq();
    if (wants(monitors, "stable_rank")) row.stable_rank = fro_sq / est.sigma1_sq;
    if (wants(monitors, "spec_norm")) row.spec_norm = std::sqrt(est.sigma1_sq);
    if (wants(monitors, "rank2_residual"))
      row.rank2_residual = std::clamp(1.0 - (est.sigma1_sq + est.sigma2_sq) / fro_sq, 0.0, 1.0);
  }
  if (wants(monitors, "loss_ratio")) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const double lg = log_loss_sigmoid(LossKind::Logistic, ds.ys[i] * ev.f[i]);
      lo = std::min(lo, lg);
      hi = std::max(hi, lg);
    }
    row.loss_ratio = std::exp(hi - lo);
  }
  if (wants(monitors, "proxy_pl")) {
    const double gamma = net.activation.gamma;
    const double ratio = geo.r_max / geo.r_min;
    row.proxy_pl_lhs = ev.gradient.frobenius_norm();
    row.proxy_pl_rhs =
        flow_constant
            ? std::sqrt(2.0) * geo.r_min * gamma / (3.0 * ratio * geo.sqrt_n) * ev.sigmoid_risk
            : gamma * geo.r_min / (2.0 * std::sqrt(2.0) * ratio * geo.sqrt_n) * ev.sigmoid_risk;
  }
  if (wants(monitors, "mu_align") && nonzero && geo.mu_norm > 0.0) {
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < net.w.rows(); ++j) {
      const double wn = norm(net.w.row(j));
      if (wn == 0.0) {
        mn = std::numeric_limits<double>::quiet_NaN();
        break;
      }
      mn = std::min(mn, std::abs(dot(net.w.row(j), geo.mu)) / (wn * geo.mu_norm));
    }
    row.mu_align_min = mn;
  }
  return row;
}

void check_finite(const BatchEval& ev, long step) {
  if (!std::isfinite(ev.loss)) throw DivergedError(step);
  for (double v : ev.f)
    if (!std::isfinite(v)) throw DivergedError(step);
}

bool should_record(long step, long total_steps, long record_every) {
  if (step <= 2 || step == total_steps) return true;
  if (record_every <= 0) return false;
  return step % record_every == 0;
}

}  // namespace

std::set<std::string> all_monitors() {
  return {"stable_rank", "spec_norm",    "fro_norm", "loss_ratio",
          "proxy_pl",    "rank2_residual", "mu_align", "min_margin"};
}

HyperBudget derive_budget(const OrthogonalityCertificate& cert, std::size_t m,
                          std::size_t d, double delta, double smoothness_H) {
  if (!(cert.gamma > 0.0 && cert.gamma <= 1.0))
    throw std::invalid_argument("derive_budget: certificate gamma out of range");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("derive_budget: delta must lie in (0,1)");
  const double gamma = cert.gamma;
  const double n = static_cast<double>(cert.n);
  const double r2 = cert.ratio_R * cert.ratio_R;
  HyperBudget b;
  b.delta = delta;
  b.alpha_max = gamma * gamma /
                (5.0 * n * cert.r_max * cert.r_max * r2 * cert.c_R * std::max(1.0, smoothness_H));
  b.omega_coeff =
      gamma * gamma * cert.r_min /
      (72.0 * cert.ratio_R * cert.c_R * n *
       std::sqrt(static_cast<double>(m) * static_cast<double>(d) *
                 std::log(4.0 * static_cast<double>(m) / delta)));
  return b;
}

TwoLayerNet init_weights(const NetShape& shape, const Activation& act,
                         const InitScheme& scheme, const Dataset* ds_for_stats,
                         InitStats* stats) {
  TwoLayerNet net;
  net.m1 = shape.m1;
  net.m2 = shape.m2;
  net.activation = act;
  net.w = Matrix(shape.m1 + shape.m2, shape.d);
  if (scheme.omega_init < 0.0) throw std::invalid_argument("init_weights: negative omega_init");
  if (scheme.omega_init > 0.0) {
    CounterRng rng(scheme.seed);
    for (std::size_t j = 0; j < net.w.rows(); ++j)
      for (std::size_t k = 0; k < net.w.cols(); ++k)
        net.w(j, k) = scheme.omega_init * rng.next_gaussian();
  }
  net.validate();

  if (stats) {
    *stats = InitStats{};
    if (net.w.frobenius_norm_sq() > 0.0) stats->spec_norm = spectral_norm(net.w);
    for (std::size_t j = 0; j < net.w.rows(); ++j)
      stats->max_neuron_norm_sq = std::max(stats->max_neuron_norm_sq, norm_sq(net.w.row(j)));
    if (ds_for_stats) {
      auto mu = mu_hat(*ds_for_stats);
      const double mu_norm = norm(mu);
      if (mu_norm > 0.0) {
        for (std::size_t j = 0; j < net.w.rows(); ++j)
          stats->max_mu_inner =
              std::max(stats->max_mu_inner, std::abs(dot(net.w.row(j), mu)) / mu_norm);
      }
    }
  }
  return net;
}

TrainResult train(const TrainConfig& cfg, const Dataset& ds) {
  if (!(cfg.alpha >= 0.0)) throw std::invalid_argument("train: negative alpha");
  if (cfg.steps < 0) throw std::invalid_argument("train: negative step count");
  ds.validate();

  TrainResult out;
  out.net = init_weights(cfg.shape, cfg.activation, cfg.init);
  const Geometry geo = make_geometry(ds);

  double cum_g = 0.0;
  for (long step = 0; step <= cfg.steps; ++step) {
    const bool record = should_record(step, cfg.steps, cfg.record_every);
    BatchEval ev = evaluate_batch(out.net, ds, cfg.loss, true);
    check_finite(ev, step);
    if (record)
      out.trace.rows.push_back(make_row(step, kAbsent, out.net, ds, ev, geo, cfg.monitors,
                                        cum_g, /*flow_constant=*/false));
    if (step == cfg.steps) break;
    cum_g += ev.sigmoid_risk;
    if (cfg.alpha != 0.0) {
      if (!ev.gradient.all_finite()) throw DivergedError(step);
      for (std::size_t k = 0; k < out.net.w.size(); ++k)
        out.net.w.data()[k] -= cfg.alpha * ev.gradient.data()[k];
    }
  }
  return out;
}

FlowResult flow_emulate(const TwoLayerNet& net0, const Dataset& ds, LossKind loss,
                        double eta, double horizon, double stop_loss,
                        const FlowOptions& opts) {
  if (!(eta > 0.0)) throw std::invalid_argument("flow_emulate: eta must be positive");
  ds.validate();
  net0.validate();

  FlowResult out;
  out.net = net0;
  const Geometry geo = make_geometry(ds);
  const long max_steps = static_cast<long>(std::ceil(horizon / eta));

  double cum_g = 0.0;
  for (long step = 0;; ++step) {
    const double t = static_cast<double>(step) * eta;
    BatchEval ev = evaluate_batch(out.net, ds, loss, true);
    check_finite(ev, step);

    const bool stop = (ev.loss < stop_loss) || (step >= max_steps);
    if (stop || should_record(step, max_steps, opts.record_every))
      out.trace.rows.push_back(make_row(step, t, out.net, ds, ev, geo, opts.monitors, cum_g,
                                        /*flow_constant=*/true));
    if (ev.loss < stop_loss) {
      out.reached_stop_loss = true;
      out.stop_time = t;
      break;
    }
    if (step >= max_steps) break;

    cum_g += ev.sigmoid_risk;
    if (!ev.gradient.all_finite()) throw DivergedError(step);
    for (std::size_t k = 0; k < out.net.w.size(); ++k)
      out.net.w.data()[k] -= eta * ev.gradient.data()[k];
  }
  return out;
}

}  // namespace leakybias
