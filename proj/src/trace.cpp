#include "leakybias/trace.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace leakybias {

const TraceRow& TrainingTrace::at_step(long step) const {
  for (const auto& row : rows)
    if (row.step == step) return row;
  throw std::out_of_range("trace: step " + std::to_string(step) + " was not recorded");
}

bool TrainingTrace::has_step(long step) const {
  for (const auto& row : rows)
    if (row.step == step) return true;
  return false;
}

namespace {

void put_cell(std::ofstream& out, double v) {
  out << ',';
  if (std::isnan(v)) return;  // absent monitor -> empty cell
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

TrainingTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trace_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader)
    throw std::runtime_error("read_trace_csv: unexpected header in " + path.string());

  TrainingTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> cells;
    std::size_t start = 0;
    while (start <= line.size()) {
      auto comma = line.find(',', start);
      const std::string tok =
          line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      cells.push_back(tok.empty() ? kAbsent : std::strtod(tok.c_str(), nullptr));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 13)
      throw std::runtime_error("read_trace_csv: malformed row in " + path.string());
    TraceRow r;
    r.step = static_cast<long>(cells[0]);
    r.flow_time = cells[1];
    r.loss = cells[2];
    r.sigmoid_risk = cells[3];
    r.min_margin = cells[4];
    r.stable_rank = cells[5];
    r.spec_norm = cells[6];
    r.fro_norm = cells[7];
    r.loss_ratio = cells[8];
    r.proxy_pl_lhs = cells[9];
    r.proxy_pl_rhs = cells[10];
    r.mu_align_min = cells[11];
    r.rank2_residual = cells[12];
    trace.rows.push_back(r);
  }
  return trace;
}

void write_trace_csv(const TrainingTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path.string());
  out << kTraceCsvHeader << "\n";
  for (const auto& r : trace.rows) {
    out << r.step;
    put_cell(out, r.flow_time);
    put_cell(out, r.loss);
    put_cell(out, r.sigmoid_risk);
    put_cell(out, r.min_margin);
    put_cell(out, r.stable_rank);
    put_cell(out, r.spec_norm);
    put_cell(out, r.fro_norm);
    put_cell(out, r.loss_ratio);
    put_cell(out, r.proxy_pl_lhs);
    put_cell(out, r.proxy_pl_rhs);
    put_cell(out, r.mu_align_min);
    put_cell(out, r.rank2_residual);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_trace_csv: write failed for " + path.string());
}

}  // namespace leakybias
