#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "leakybias/dataset.hpp"
#include "leakybias/linalg.hpp"

namespace leakybias {

enum class ActivationKind { LeakyRelu, SmoothLeaky };

// LeakyRelu:    phi(z) = max(z, gamma z), subgradient at 0 fixed to gamma.
// SmoothLeaky:  phi(z) = gamma z + (1-gamma) log(0.5 (1+e^z)),
//               gamma-leaky and 1/4-smooth.
struct Activation {
  ActivationKind kind = ActivationKind::LeakyRelu;
  double gamma = 0.5;

  double value(double z) const;
  double derivative(double z) const;
  // Second derivative; empty for the non-smooth LeakyRelu.
  std::optional<double> second_derivative(double z) const;
  // Smoothness constant H; empty for LeakyRelu.
  std::optional<double> smoothness() const {
    if (kind == ActivationKind::SmoothLeaky) return 0.25;
    return std::nullopt;
  }
};

struct ActEval {
  double value;
  double derivative;
  std::optional<double> second_derivative;
};

inline ActEval act_eval(const Activation& a, double z) {
  return {a.value(z), a.derivative(z), a.second_derivative(z)};
}

enum class LossKind { Exponential, Logistic };

double loss_value(LossKind kind, double q);      // ell(q)
double loss_sigmoid(LossKind kind, double q);    // g(q) = -ell'(q)
double log_loss_sigmoid(LossKind kind, double q);  // log g(q), evaluated stably

// Two-layer net with the second layer frozen at +-1/sqrt(m): rows [0, m1) of W
// carry a_j = +1/sqrt(m), rows [m1, m1+m2) carry a_j = -1/sqrt(m). The 1/sqrt(m)
// factor is applied once per forward/grad, never materialized per neuron.
struct TwoLayerNet {
  Matrix w;  // m x d
  std::size_t m1 = 1;
  std::size_t m2 = 1;
  Activation activation;

  std::size_t m() const { return m1 + m2; }
  std::size_t d() const { return w.cols(); }
  double second_layer_sign(std::size_t j) const { return j < m1 ? 1.0 : -1.0; }

  void validate() const;
};

double forward(const TwoLayerNet& net, std::span<const double> x);

// Per-sample outputs f(x_i; W), in dataset order.
std::vector<double> forward_all(const TwoLayerNet& net, const Dataset& ds);

double empirical_loss(const TwoLayerNet& net, const Dataset& ds, LossKind loss);
double sigmoid_risk(const TwoLayerNet& net, const Dataset& ds,
                    LossKind loss = LossKind::Logistic);

// Everything the training loop needs from one pass over the batch. Per-sample
// terms are reduced in a fixed order for bit-reproducibility.
struct BatchEval {
  Matrix preacts;             // m x n, <w_j, x_i>
  std::vector<double> f;      // network outputs
  std::vector<double> g;      // g(y_i f_i) = -ell'(y_i f_i)
  double loss = 0.0;          // L-hat
  double sigmoid_risk = 0.0;  // G-hat
  double min_margin = 0.0;    // min_i y_i f_i
  Matrix gradient;            // m x d, filled when with_gradient
};

BatchEval evaluate_batch(const TwoLayerNet& net, const Dataset& ds, LossKind loss,
                         bool with_gradient = true);

Matrix grad(const TwoLayerNet& net, const Dataset& ds, LossKind loss);

// Checkpoint format: one header line then m rows of d floats at 17 significant
// digits. Unknown trailing header tokens (e.g. meta=qp) round-trip untouched.
void save_network(const TwoLayerNet& net, const std::filesystem::path& path,
                  const std::string& extra_header = "");
TwoLayerNet load_network(const std::filesystem::path& path);

}  // namespace leakybias
