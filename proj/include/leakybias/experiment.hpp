#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace leakybias {

enum class Preset { RankVsDimension, RankVsInit, FlowToKkt, XorFailure, Custom };

Preset preset_from_name(const std::string& name);
std::string preset_name(Preset p);

struct ExperimentConfig {
  Preset preset = Preset::RankVsDimension;
  // Swept parameter values; which key is swept depends on the preset
  // (rank_vs_dimension: "d"; rank_vs_init: "omega_mult"; others: "d").
  std::map<std::string, std::vector<double>> grid;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  bool plot = false;
  bool force = false;
  int jobs = 0;  // 0: LEAKYBIAS_JOBS env var, else hardware concurrency

  // Scalar knobs consumed by the presets; filled with preset defaults when
  // absent. Recognized: n, m, steps, alpha, gamma, beta, noise_rate, mu_exp,
  // omega_mult, eta, horizon_mult, eval_n.
  std::map<std::string, double> params;

  void apply_preset_defaults();
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct CellResult {
  std::string cell_id;
  double grid_value = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // or "error:<what>"
  double final_loss = 0.0;
  double stable_rank_init = 0.0;
  double stable_rank_final = 0.0;
  double rel_stable_rank = 0.0;
  double clean_accuracy = -1.0;  // -1 when the preset has no accuracy notion
  double kkt_cosine = -1.0;      // flow_to_kkt only
  std::filesystem::path trace_path;
};

struct SweepSummary {
  std::vector<CellResult> cells;  // |grid| x |seeds| rows, fixed order
  std::filesystem::path summary_csv;
  std::size_t failed = 0;

  // Mean over seeds of rel_stable_rank, keyed by grid value (ok cells only).
  std::map<double, double> mean_rel_stable_rank() const;
};

// Executes the grid in parallel, one trace CSV per cell, a summary CSV, and
// (if cfg.plot) one SVG per figure analog. Refuses to overwrite an existing
// summary unless cfg.force.
SweepSummary run_preset(const ExperimentConfig& cfg);

// Rebuilds the SVGs of a finished sweep from its CSV files alone, so repeated
// invocations produce byte-identical output.
void regenerate_report(const std::filesystem::path& output_dir);

}  // namespace leakybias
