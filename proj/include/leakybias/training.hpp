#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "leakybias/analysis.hpp"
#include "leakybias/dataset.hpp"
#include "leakybias/model.hpp"
#include "leakybias/trace.hpp"

namespace leakybias {

struct InitScheme {
  double omega_init = 0.0;  // per-entry std dev; 0 gives W0 = 0 exactly
  std::uint64_t seed = 0;
};

struct NetShape {
  std::size_t m1 = 1;
  std::size_t m2 = 1;
  std::size_t d = 1;
};

// Monitor names: stable_rank, spec_norm, fro_norm, loss_ratio, proxy_pl,
// mu_align, rank2_residual, min_margin. Loss and sigmoid risk are always on.
std::set<std::string> all_monitors();

struct TrainConfig {
  NetShape shape;
  Activation activation;
  LossKind loss = LossKind::Logistic;
  double alpha = 0.0;
  long steps = 0;
  InitScheme init;
  long record_every = 1;  // steps 0, 1, 2 and the final step are always kept
  std::set<std::string> monitors = all_monitors();
};

// Step-size and initialization-variance budgets under which the descent,
// loss-ratio and stable-rank guarantees are proved:
//   alpha_max          = gamma^2 / (5 n R_max^2 R^2 C_R max(1,H))
//   omega_max(alpha)   = alpha gamma^2 R_min / (72 R C_R n sqrt(m d log(4m/delta)))
struct HyperBudget {
  double alpha_max = 0.0;
  double delta = 0.0;
  double omega_coeff = 0.0;  // omega_max = omega_coeff * alpha

  double omega_max(double alpha) const { return omega_coeff * alpha; }
};

HyperBudget derive_budget(const OrthogonalityCertificate& cert, std::size_t m,
                          std::size_t d, double delta, double smoothness_H);

struct InitStats {
  double spec_norm = 0.0;
  double max_neuron_norm_sq = 0.0;
  double max_mu_inner = 0.0;  // max_j |<w_j, mu-bar>| against the unit mu-hat
};

TwoLayerNet init_weights(const NetShape& shape, const Activation& act,
                         const InitScheme& scheme,
                         const Dataset* ds_for_stats = nullptr,
                         InitStats* stats = nullptr);

struct DivergedError : std::runtime_error {
  DivergedError(long step)
      : std::runtime_error("training diverged at step " + std::to_string(step)),
        step(step) {}
  long step;
};

struct TrainResult {
  TrainingTrace trace;
  TwoLayerNet net;
};

// Full-batch gradient descent, exactly cfg.steps updates. Monitors are
// evaluated on pre-update weights; row 0 is the initialization.
TrainResult train(const TrainConfig& cfg, const Dataset& ds);

struct FlowOptions {
  long record_every = 1;
  std::set<std::string> monitors = all_monitors();
};

struct FlowResult {
  TrainingTrace trace;
  TwoLayerNet net;
  bool reached_stop_loss = false;
  double stop_time = 0.0;  // flow time when the loss first dropped below stop_loss
};

// Forward-Euler emulation of gradient flow with step eta, run until flow time
// reaches `horizon` or the loss drops below `stop_loss`.
FlowResult flow_emulate(const TwoLayerNet& net0, const Dataset& ds, LossKind loss,
                        double eta, double horizon, double stop_loss,
                        const FlowOptions& opts = {});

}  // namespace leakybias
