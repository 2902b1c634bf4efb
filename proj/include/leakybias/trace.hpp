#pragma once

#include <filesystem>
#include <limits>
#include <vector>

namespace leakybias {

constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

// One recorded step. Monitor fields left NaN serialize as empty CSV cells.
// cum_sigmoid_risk and min_neuron_norm are bookkeeping for the bound checks
// and are not part of the CSV schema.
struct TraceRow {
  long step = 0;
  double flow_time = kAbsent;  // step * eta for flow runs, absent for GD
  double loss = kAbsent;
  double sigmoid_risk = kAbsent;
  double min_margin = kAbsent;
  double stable_rank = kAbsent;
  double spec_norm = kAbsent;
  double fro_norm = kAbsent;
  double loss_ratio = kAbsent;
  double proxy_pl_lhs = kAbsent;
  double proxy_pl_rhs = kAbsent;
  double mu_align_min = kAbsent;
  double rank2_residual = kAbsent;

  double cum_sigmoid_risk = kAbsent;  // sum of G-hat over all steps s < step
  double min_neuron_norm = kAbsent;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;

  const TraceRow& at_step(long step) const;  // throws if the step was not recorded
  bool has_step(long step) const;
};

inline constexpr const char* kTraceCsvHeader =
    "step,flow_time,loss,sigmoid_risk,min_margin,stable_rank,spec_norm,"
    "fro_norm,loss_ratio,proxy_pl_lhs,proxy_pl_rhs,mu_align_min,rank2_residual";

void write_trace_csv(const TrainingTrace& trace, const std::filesystem::path& path);

// Inverse of write_trace_csv; round-trips every recorded value bit-exactly.
// The bookkeeping fields are not serialized and come back NaN.
TrainingTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace leakybias
