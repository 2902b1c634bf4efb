#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "leakybias/dataset.hpp"
#include "leakybias/model.hpp"
#include "leakybias/trace.hpp"

namespace leakybias {

// Top singular value estimates from power iteration on the smaller Gram
// matrix. converged is false when the 10^4 iteration cap was hit; the values
// are then reported at reduced precision rather than failing.
struct SpectralEstimate {
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  bool converged = true;
  int iterations = 0;
};

SpectralEstimate top_two_singular_values_sq(const Matrix& w);

double spectral_norm(const Matrix& w);

// ||W||_F^2 / ||W||_2^2. Throws std::invalid_argument on W = 0.
double stable_rank(const Matrix& w);

// 1 - (sigma1^2 + sigma2^2) / ||W||_F^2, clamped to [0,1].
double rank2_residual(const Matrix& w);

// max over ordered pairs of g(y_i f_i) / g(y_j f_j), logistic loss, computed
// in log space so margins of a few hundred do not overflow.
double loss_ratio(const TwoLayerNet& net, const Dataset& ds);

struct ProxyPl {
  double lhs = 0.0;       // ||grad L||_F
  double rhs_gd = 0.0;    // gamma R_min / (2 sqrt(2) R sqrt(n)) * G-hat
  double rhs_flow = 0.0;  // sqrt(2) R_min gamma / (3 R sqrt(n)) * G-hat
};

ProxyPl proxy_pl(const TwoLayerNet& net, const Dataset& ds,
                 LossKind loss = LossKind::Logistic);

struct MuAlignment {
  std::vector<double> cosine;        // |<w_j, mu>| / (||w_j|| ||mu||)
  std::vector<double> signed_inner;  // <w_j, mu>
  double min_cosine = 0.0;
};

// mu here is mu-hat = sum_i y_i x_i. Throws on mu-hat = 0.
MuAlignment mu_alignment(const Matrix& w, const Dataset& ds);

std::vector<double> mu_hat(const Dataset& ds);

struct BoundCheck {
  std::string bound;
  long step = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = true;
};

struct BoundReport {
  std::vector<BoundCheck> checks;
  bool loss_bound_skipped = false;  // alpha = 0 traces have no loss bound
  double c1 = 0.0;                  // 64 L(W0) R^2 / gamma^2
  double c2 = 0.0;                  // 16^2 C_R R^4 / gamma^2

  std::size_t violations() const;
  bool all_pass() const { return violations() == 0; }
  std::string to_text() const;
  void write_csv(const std::filesystem::path& path) const;  // bound,step,lhs,rhs,pass
};

struct TrainConfig;  // training.hpp

// Trajectory-level inequalities at every recorded step: the loss bound with
// the explicit proof constant C1, the Frobenius upper / spectral lower bounds
// through the running sigmoid-risk sum, stable rank <= C2 for t >= 1, loss
// ratio <= C_R, the proxy-PL inequality, the step-1 margin bound, and
// monotonicity of the smallest neuron norm.
BoundReport check_trace_bounds(const TrainingTrace& trace,
                               const OrthogonalityCertificate& cert,
                               const TrainConfig& cfg);

}  // namespace leakybias
