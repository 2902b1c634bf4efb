#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "leakybias/linalg.hpp"

namespace leakybias {

struct Dataset {
  Matrix xs;                // n x d, rows are samples
  std::vector<double> ys;   // labels, each exactly +1 or -1
  std::uint64_t seed = 0;
  std::string meta;         // generator descriptor

  std::size_t n() const { return xs.rows(); }
  std::size_t d() const { return xs.cols(); }

  // Labels before noise injection, when the generator recorded them in the
  // meta string (mixture data); otherwise the observed labels.
  std::vector<double> clean_labels() const;

  void validate() const;  // throws std::invalid_argument on a broken invariant
};

// Geometry summary feeding every hypothesis check and hyperparameter formula.
struct OrthogonalityCertificate {
  std::size_t n = 0;
  double r_min = 0.0;       // min_i ||x_i||
  double r_max = 0.0;       // max_i ||x_i||
  double ratio_R = 1.0;     // r_max / r_min
  double p = 0.0;           // max_{i != j} |<x_i, x_j>|
  double c_R = 0.0;         // 10 R^2 / gamma^2 + 10
  double gamma = 0.0;
  bool thm32_holds = false; // r_min^2 >= 3 gamma^-3 R^2 n p
  bool thm42_holds = false; // r_min^2 >= 5 gamma^-2 C_R n p
};

// Exact O(n^2 d) computation; comparisons are non-strict with zero tolerance.
OrthogonalityCertificate certify(const Dataset& ds, double gamma);

// Rows drawn N(0, diag(sigma_diag)), labels uniform +-1 independent of x.
// Draw order per stream: all n*d coordinates row-major, then n label bits.
Dataset gen_gaussian(std::size_t n, std::size_t d,
                     const std::vector<double>& sigma_diag, std::uint64_t seed);
Dataset gen_gaussian(std::size_t n, std::size_t d, std::uint64_t seed);  // sigma = I

// Binary cluster mixture: x = c * mu + N(0, I_d) with ||mu|| = d^beta and all
// entries of mu equal and positive; the observed label flips off the clean
// label c with probability noise_rate. Clean labels are kept in meta.
Dataset gen_mixture(std::size_t n, std::size_t d, double beta, double noise_rate,
                    std::uint64_t seed);

// Noisy 2-xor: z uniform on {+-mu1, +-mu2} with mu1 = mu_norm*e1, mu2 =
// mu_norm*e2, x = z + noise_scale * N(0, I_d), y = sign(|<mu1,x>| - |<mu2,x>|).
Dataset gen_xor(std::size_t n, std::size_t d, double mu_norm, std::uint64_t seed,
                double noise_scale = 1.0);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Parse failures carry the 1-based line number and, when known, the byte
// offset within that line.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line, std::size_t offset = 0)
      : std::runtime_error(what + " (line " + std::to_string(line) +
                           (offset ? ", offset " + std::to_string(offset) : "") + ")"),
        line(line),
        offset(offset) {}
  std::size_t line;
  std::size_t offset;
};

}  // namespace leakybias
