#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "leakybias/dataset.hpp"
#include "leakybias/model.hpp"

namespace leakybias {

struct SolverStalled : std::runtime_error {
  explicit SolverStalled(const std::string& what) : std::runtime_error(what) {}
};

struct NotSeparable : std::runtime_error {
  explicit NotSeparable(const std::string& what) : std::runtime_error(what) {}
};

// Solution of the convex pair problem
//   min (m1/2)||v||^2 + (m2/2)||u||^2
//   s.t. i in I+ : (m1/sqrt(m)) v.x_i - gamma (m2/sqrt(m)) u.x_i >= 1
//        i in I- : (m2/sqrt(m)) u.x_i - gamma (m1/sqrt(m)) v.x_i >= 1
// The duals coincide with the KKT multipliers of the parameter-space
// margin-maximization problem.
struct QpSolution {
  std::vector<double> v;
  std::vector<double> u;
  std::vector<double> duals;   // length n, nonnegative
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::size_t m1 = 1, m2 = 1;
  double gamma = 0.5;

  // z = (m1 v - m2 u)/sqrt(m), the linear predictor realizing the decision
  // boundary of the induced network.
  std::vector<double> predictor() const;
};

// Dual projected-gradient ascent on the n-variable bound-constrained concave
// quadratic, with an active-set polish; primal recovered from stationarity.
QpSolution solve_qp(const Dataset& ds, std::size_t m1, std::size_t m2, double gamma,
                    std::uint64_t dual_start_seed = 0);

// W with rows [0,m1) = v and rows [m1,m) = u; rank <= 2 by construction.
TwoLayerNet build_kkt_network(const QpSolution& sol);

// Hard-margin linear SVM z* = argmin ||z|| s.t. y_i z.x_i >= 1, via dual
// coordinate ascent. Throws NotSeparable when the cap is hit infeasible.
std::vector<double> solve_svm(const Dataset& ds);

struct KktReport {
  bool margins_equal_one = false;
  double max_margin_deviation = 0.0;

  bool rank_le_2 = false;
  double rank2_resid = 0.0;

  bool lambda_in_bounds = false;
  double lambda_min = 0.0, lambda_max = 0.0;
  double lambda_lower_bound = 0.0;  // 1 / (2 R_max^2)
  double lambda_upper_bound = 0.0;  // 3 / (2 gamma^2 R_min^2)

  bool sign_pattern_ok = false;     // y_i v.x_i > 0 and y_i u.x_i < 0 for all i

  bool global_opt_ok = false;       // objective vs feasible perturbations
  double max_objective_gap = 0.0;   // most negative (perturbed - solution) seen
  bool objective_identity_ok = false;  // ||W||_F^2 = m1||v||^2 + m2||u||^2

  bool linear_boundary_ok = false;  // sign(f(x)) = sign(z.x) on probes
  double probe_agreement = 0.0;
  std::size_t probes_checked = 0;

  bool z_margin_ok = false;         // y_i z.x_i >= 1 - tol
  double z_margin_min = 0.0;
  double norm_ratio = 0.0;          // ||z|| / ||z*||
  double norm_ratio_bound = 0.0;    // 2 / (kappa + gamma)
  double kappa = 0.0;

  bool all_pass() const;
  std::string to_text() const;
  std::string to_csv() const;  // check,measured,threshold,pass
};

// Checks all seven KKT-limit properties of the network induced by `sol`:
// unit margins, rank <= 2, dual bounds, sign pattern, global optimality via
// feasibility-projected perturbations, exact boundary linearity on random
// probes plus training points, and the approximate-max-margin bound against
// the hard-margin solution.
KktReport verify_theorem(const QpSolution& sol, const Dataset& ds,
                         std::size_t probe_count, std::uint64_t probe_seed = 0x9b0be5);

struct LambdaRecovery {
  std::vector<double> lambda;
  double residual = 0.0;  // relative misfit of the stationarity equations
};

// Fits nonnegative multipliers to the stationarity equations of the mean
// positive and mean negative neuron, with activation slopes fixed from the
// measured sign pattern (1 on the active side, gamma on the inactive side).
LambdaRecovery recover_lambda(const TwoLayerNet& net, const Dataset& ds);

struct CounterexampleFixture {
  Dataset ds;                    // x1=(-1,0,0), x2=(eps,sqrt(1-eps^2),0), x3=(0,0,1)
  std::array<double, 3> lambda;  // 8/(4eps+5), 8/(4eps+5), 8/5
  std::vector<double> z;         // closed-form predictor
  double gamma = 0.5;
  double epsilon = 0.0;
};

// The 3-point fixture whose KKT predictor provably fails to maximize the
// linear margin. Requires eps in (0, 1/72].
CounterexampleFixture counterexample(double epsilon);

}  // namespace leakybias
