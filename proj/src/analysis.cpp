#include "leakybias/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "leakybias/rng.hpp"
#include "leakybias/training.hpp"

namespace leakybias {

namespace {

constexpr double kSpectralTol = 1e-10;
constexpr int kSpectralCap = 10000;
constexpr std::uint64_t kFallbackSeed = 0x5eedbea7;

// Largest eigenvalue of the symmetric PSD matrix g, optionally deflated
// against the unit vector q1 (for the second eigenvalue). Returns the
// Rayleigh-quotient limit and leaves the final iterate in v.
struct EigResult {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

EigResult power_iterate(const Matrix& g, std::vector<double>& v,
                        const std::vector<double>* deflate_q, double deflate_lambda) {
  const std::size_t k = g.rows();
  auto project_out = [&](std::vector<double>& x) {
    if (!deflate_q) return;
    const double c = dot(*deflate_q, x);
    for (std::size_t i = 0; i < k; ++i) x[i] -= c * (*deflate_q)[i];
  };

  project_out(v);
  double nv = norm(v);
  if (nv == 0.0) return {0.0, true, 0};
  scale(1.0 / nv, v);

  EigResult res;
  double prev = 0.0;
  for (res.iterations = 1; res.iterations <= kSpectralCap; ++res.iterations) {
    std::vector<double> gv = matvec(g, v);
    if (deflate_q) {
      // g v - lambda1 q1 (q1.v), then re-orthogonalize for stability
      const double c = dot(*deflate_q, v);
      for (std::size_t i = 0; i < k; ++i) gv[i] -= deflate_lambda * (*deflate_q)[i] * c;
      project_out(gv);
    }
    const double lambda = dot(v, gv);  // Rayleigh quotient of the current iterate
    const double ng = norm(gv);
    if (ng == 0.0) {
      res.value = 0.0;
      res.converged = true;
      return res;
    }
    for (std::size_t i = 0; i < k; ++i) v[i] = gv[i] / ng;
    if (res.iterations > 1 && std::abs(lambda - prev) <= kSpectralTol * std::abs(lambda)) {
      res.value = lambda;
      res.converged = true;
      return res;
    }
    prev = lambda;
  }
  res.value = prev;
  res.converged = false;
  return res;
}

// Deterministic start: normalized all-ones, with a seeded random restart to
// guard against a start vector orthogonal to the top eigenspace (detected by
// the restart producing a larger Rayleigh limit).
EigResult top_eigenvalue(const Matrix& g, const std::vector<double>* deflate_q,
                         double deflate_lambda, std::vector<double>* out_vec) {
  const std::size_t k = g.rows();
  std::vector<double> v(k, 1.0);
  EigResult a = power_iterate(g, v, deflate_q, deflate_lambda);

  std::vector<double> vr(k);
  CounterRng rng(kFallbackSeed);
  for (auto& x : vr) x = rng.next_gaussian();
  EigResult b = power_iterate(g, vr, deflate_q, deflate_lambda);

  if (b.value > a.value * (1.0 + 1e-12)) {
    if (out_vec) *out_vec = vr;
    return b;
  }
  if (out_vec) *out_vec = v;
  return a;
}

Matrix smaller_gram(const Matrix& w) {
  return w.rows() <= w.cols() ? row_gram(w) : col_gram(w);
}

const char* bool_cell(bool b) { return b ? "1" : "0"; }

}  // namespace

SpectralEstimate top_two_singular_values_sq(const Matrix& w) {
  if (w.empty() || w.frobenius_norm_sq() == 0.0)
    throw std::invalid_argument("spectral estimate undefined for the zero matrix");
  const Matrix g = smaller_gram(w);
  SpectralEstimate est;
  std::vector<double> q1;
  EigResult top = top_eigenvalue(g, nullptr, 0.0, &q1);
  est.sigma1_sq = top.value;
  est.iterations = top.iterations;
  est.converged = top.converged;
  if (g.rows() > 1) {
    EigResult second = top_eigenvalue(g, &q1, top.value, nullptr);
    est.sigma2_sq = std::max(0.0, second.value);
    est.iterations += second.iterations;
    est.converged = est.converged && second.converged;
  }
  return est;
}

double spectral_norm(const Matrix& w) {
  return std::sqrt(top_two_singular_values_sq(w).sigma1_sq);
}

double stable_rank(const Matrix& w) {
  const auto est = top_two_singular_values_sq(w);
  return w.frobenius_norm_sq() / est.sigma1_sq;
}

double rank2_residual(const Matrix& w) {
  const auto est = top_two_singular_values_sq(w);
  const double fro_sq = w.frobenius_norm_sq();
  return std::clamp(1.0 - (est.sigma1_sq + est.sigma2_sq) / fro_sq, 0.0, 1.0);
}

double loss_ratio(const TwoLayerNet& net, const Dataset& ds) {
  const auto f = forward_all(net, ds);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double lg = log_loss_sigmoid(LossKind::Logistic, ds.ys[i] * f[i]);
    lo = std::min(lo, lg);
    hi = std::max(hi, lg);
  }
  return std::exp(hi - lo);
}

std::vector<double> mu_hat(const Dataset& ds) {
  std::vector<double> mu(ds.d(), 0.0);
  for (std::size_t i = 0; i < ds.n(); ++i) axpy(ds.ys[i], ds.xs.row(i), mu);
  return mu;
}

ProxyPl proxy_pl(const TwoLayerNet& net, const Dataset& ds, LossKind loss) {
  const auto ev = evaluate_batch(net, ds, loss, true);
  double r_min = std::numeric_limits<double>::infinity(), r_max = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double nm = norm(ds.xs.row(i));
    r_min = std::min(r_min, nm);
    r_max = std::max(r_max, nm);
  }
  const double ratio = r_max / r_min;
  const double sqrt_n = std::sqrt(static_cast<double>(ds.n()));
  ProxyPl out;
  out.lhs = ev.gradient.frobenius_norm();
  out.rhs_gd = net.activation.gamma * r_min / (2.0 * std::sqrt(2.0) * ratio * sqrt_n) *
               ev.sigmoid_risk;
  out.rhs_flow = std::sqrt(2.0) * r_min * net.activation.gamma / (3.0 * ratio * sqrt_n) *
                 ev.sigmoid_risk;
  return out;
}

MuAlignment mu_alignment(const Matrix& w, const Dataset& ds) {
  const auto mu = mu_hat(ds);
  const double mu_norm = norm(mu);
  if (mu_norm == 0.0) throw std::invalid_argument("mu_alignment: mu-hat is the zero vector");
  MuAlignment out;
  out.cosine.resize(w.rows());
  out.signed_inner.resize(w.rows());
  out.min_cosine = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < w.rows(); ++j) {
    const double inner = dot(w.row(j), mu);
    const double wn = norm(w.row(j));
    out.signed_inner[j] = inner;
    out.cosine[j] = wn > 0.0 ? std::abs(inner) / (wn * mu_norm)
                             : std::numeric_limits<double>::quiet_NaN();
    out.min_cosine = std::min(out.min_cosine, out.cosine[j]);
  }
  return out;
}

std::size_t BoundReport::violations() const {
  std::size_t v = 0;
  for (const auto& c : checks)
    if (!c.pass) ++v;
  return v;
}

std::string BoundReport::to_text() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %8s %16s %16s %6s\n", "bound", "step", "lhs",
                "rhs", "pass");
  os << line;
  for (const auto& c : checks) {
    std::snprintf(line, sizeof(line), "%-24s %8ld %16.8g %16.8g %6s\n", c.bound.c_str(),
                  c.step, c.lhs, c.rhs, c.pass ? "yes" : "NO");
    os << line;
  }
  os << "violations: " << violations();
  if (loss_bound_skipped) os << "  (loss bound skipped: alpha = 0)";
  os << "\n";
  return os.str();
}

void BoundReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("BoundReport: cannot open " + path.string());
  out << "bound,step,lhs,rhs,pass\n";
  char buf[40];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof(buf), "%.17g", c.lhs);
    out << c.bound << ',' << c.step << ',' << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", c.rhs);
    out << buf << ',' << bool_cell(c.pass) << "\n";
  }
}

BoundReport check_trace_bounds(const TrainingTrace& trace,
                               const OrthogonalityCertificate& cert,
                               const TrainConfig& cfg) {
  BoundReport rep;
  if (trace.rows.empty()) return rep;

  const double gamma = cfg.activation.gamma;
  const double r = cert.ratio_R;
  const double loss0 = trace.rows.front().loss;
  rep.c1 = 64.0 * loss0 * r * r / (gamma * gamma);
  rep.c2 = 256.0 * cert.c_R * r * r * r * r / (gamma * gamma);
  rep.loss_bound_skipped = cfg.alpha == 0.0;

  const double n = static_cast<double>(cert.n);
  const double fro0 = trace.rows.front().fro_norm;
  const double sqrt_n = std::sqrt(n);
  const double fro_coeff = std::sqrt(2.0 * cert.c_R) * cert.r_max * cfg.alpha / sqrt_n;
  const double spec_coeff = cfg.alpha * gamma * cert.r_min / (4.0 * std::sqrt(2.0) * r * sqrt_n);
  const double margin1_rhs = gamma * gamma * cfg.alpha * cert.r_min * cert.r_min / (32.0 * n);

  double prev_min_neuron = -std::numeric_limits<double>::infinity();
  for (const auto& row : trace.rows) {
    const long t = row.step;
    if (!rep.loss_bound_skipped && t >= 2 && std::isfinite(row.loss)) {
      const double rhs = std::sqrt(rep.c1 * n / (cert.r_min * cert.r_min * cfg.alpha *
                                                 static_cast<double>(t)));
      rep.checks.push_back({"loss_upper", t, row.loss, rhs, row.loss <= rhs});
    }
    if (std::isfinite(row.loss_ratio))
      rep.checks.push_back({"loss_ratio", t, row.loss_ratio, cert.c_R, row.loss_ratio <= cert.c_R});
    if (std::isfinite(row.proxy_pl_lhs) && std::isfinite(row.proxy_pl_rhs))
      rep.checks.push_back(
          {"proxy_pl", t, row.proxy_pl_lhs, row.proxy_pl_rhs, row.proxy_pl_lhs >= row.proxy_pl_rhs});
    if (t >= 1 && std::isfinite(row.stable_rank))
      rep.checks.push_back({"stable_rank", t, row.stable_rank, rep.c2, row.stable_rank <= rep.c2});
    if (t >= 1 && std::isfinite(row.fro_norm) && std::isfinite(row.cum_sigmoid_risk)) {
      const double rhs = fro0 + fro_coeff * row.cum_sigmoid_risk;
      rep.checks.push_back({"fro_upper", t, row.fro_norm, rhs, row.fro_norm <= rhs});
    }
    if (t >= 1 && std::isfinite(row.spec_norm) && std::isfinite(row.cum_sigmoid_risk)) {
      const double rhs = spec_coeff * row.cum_sigmoid_risk;
      rep.checks.push_back({"spec_lower", t, row.spec_norm, rhs, row.spec_norm >= rhs});
    }
    if (t == 1 && std::isfinite(row.min_margin) && cfg.alpha > 0.0)
      rep.checks.push_back(
          {"margin_step1", t, row.min_margin, margin1_rhs, row.min_margin >= margin1_rhs});
    if (t >= 1 && std::isfinite(row.min_neuron_norm)) {
      rep.checks.push_back({"neuron_norm_monotone", t, row.min_neuron_norm, prev_min_neuron,
                            row.min_neuron_norm >= prev_min_neuron});
      prev_min_neuron = row.min_neuron_norm;
    }
  }
  return rep;
}

}  // namespace leakybias
