#include "leakybias/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "leakybias/margin.hpp"
#include "leakybias/rng.hpp"
#include "leakybias/svg.hpp"
#include "leakybias/training.hpp"

namespace leakybias {

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double frobenius_cosine(const Matrix& a, const Matrix& b) {
  double num = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) num += a.data()[k] * b.data()[k];
  return num / (a.frobenius_norm() * b.frobenius_norm());
}

struct CellContext {
  const ExperimentConfig* cfg;
  std::string grid_key;
  double grid_value;
  std::uint64_t seed;
  std::string cell_id;
};

double param(const ExperimentConfig& cfg, const std::string& key, double fallback) {
  auto it = cfg.params.find(key);
  return it == cfg.params.end() ? fallback : it->second;
}

struct CellOutput {
  CellResult result;
  TrainingTrace trace;
  std::vector<std::pair<double, double>> kkt_curve;  // flow time, cosine
};

double accuracy_against(const TwoLayerNet& net, const Dataset& eval,
                        const std::vector<double>& labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval.n(); ++i) {
    const double f = forward(net, eval.xs.row(i));
    const double pred = f > 0.0 ? 1.0 : -1.0;
    if (pred == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(eval.n());
}

CellOutput run_mixture_gd_cell(const CellContext& ctx) {
  const auto& cfg = *ctx.cfg;
  const bool sweep_init = cfg.preset == Preset::RankVsInit;
  const std::size_t d = static_cast<std::size_t>(
      sweep_init ? param(cfg, "d", 10000) : ctx.grid_value);
  const double omega_mult = sweep_init ? ctx.grid_value : param(cfg, "omega_mult", 0.02);
  const std::size_t n = static_cast<std::size_t>(param(cfg, "n", 64));
  const std::size_t m = static_cast<std::size_t>(param(cfg, "m", 64));
  const double gamma = param(cfg, "gamma", 0.1);
  const double beta = param(cfg, "beta", 0.26);
  const double noise_rate = param(cfg, "noise_rate", 0.15);
  const double alpha = param(cfg, "alpha", sweep_init ? 0.16 : 0.01);
  const long steps = static_cast<long>(param(cfg, "steps", 60));
  const std::size_t eval_n = static_cast<std::size_t>(param(cfg, "eval_n", 500));

  const Dataset ds = gen_mixture(n, d, beta, noise_rate, substream(ctx.seed, 0xce11));
  const double omega_tf = std::sqrt(2.0 / static_cast<double>(m + d));

  TrainConfig tc;
  tc.shape = {m / 2, m - m / 2, d};
  tc.activation = {ActivationKind::SmoothLeaky, gamma};
  tc.loss = LossKind::Logistic;
  tc.alpha = alpha;
  tc.steps = steps;
  tc.init = {omega_mult * omega_tf, substream(ctx.seed, 0x1417)};
  tc.record_every = std::max<long>(1, steps / 40);
  tc.monitors = {"stable_rank", "spec_norm", "fro_norm", "min_margin"};

  CellOutput out;
  auto res = train(tc, ds);
  out.trace = std::move(res.trace);
  out.result.final_loss = out.trace.rows.back().loss;
  out.result.stable_rank_init = out.trace.rows.front().stable_rank;
  out.result.stable_rank_final = out.trace.rows.back().stable_rank;
  out.result.rel_stable_rank = out.result.stable_rank_final / out.result.stable_rank_init;

  const Dataset eval = gen_mixture(eval_n, d, beta, 0.0, substream(ctx.seed, 0xe7a1));
  out.result.clean_accuracy = accuracy_against(res.net, eval, eval.ys);
  return out;
}

CellOutput run_flow_to_kkt_cell(const CellContext& ctx) {
  const auto& cfg = *ctx.cfg;
  const std::size_t d = static_cast<std::size_t>(ctx.grid_value);
  const std::size_t n = static_cast<std::size_t>(param(cfg, "n", 8));
  const double gamma = param(cfg, "gamma", 0.5);
  const double eta = param(cfg, "eta", 1e-3);
  const double horizon_mult = param(cfg, "horizon_mult", 50.0);

  const Dataset ds = gen_gaussian(n, d, substream(ctx.seed, 0xce11));
  const auto cert = certify(ds, gamma);

  TwoLayerNet net0;
  net0.m1 = net0.m2 = 1;
  net0.activation = {ActivationKind::LeakyRelu, gamma};
  net0.w = Matrix(2, d);

  const double stop_loss = std::log(2.0) / static_cast<double>(n);
  const double loss0 = empirical_loss(net0, ds, LossKind::Logistic);
  const double tau_bound = 85.0 * loss0 * cert.ratio_R * cert.ratio_R *
                           std::pow(static_cast<double>(n), 3.0) /
                           (gamma * gamma * cert.r_min * cert.r_min);

  FlowOptions opts;
  opts.record_every = 64;
  opts.monitors = {"stable_rank", "fro_norm", "min_margin"};
  auto flow = flow_emulate(net0, ds, LossKind::Logistic, eta, tau_bound, stop_loss, opts);
  if (!flow.reached_stop_loss) throw std::runtime_error("flow did not reach the loss threshold");

  const auto qp = solve_qp(ds, 1, 1, gamma);
  const auto kkt = build_kkt_network(qp);

  CellOutput out;
  out.trace = std::move(flow.trace);
  const double t0 = std::max(flow.stop_time, eta);
  out.kkt_curve.push_back({t0, frobenius_cosine(flow.net.w, kkt.w)});

  // continue in log-spaced segments up to horizon_mult * t0
  TwoLayerNet net = std::move(flow.net);
  const int segments = 16;
  double t_now = t0;
  for (int s = 1; s <= segments; ++s) {
    const double t_target = t0 * std::pow(horizon_mult, static_cast<double>(s) / segments);
    if (t_target <= t_now) continue;
    auto seg = flow_emulate(net, ds, LossKind::Logistic, eta, t_target - t_now, 0.0, opts);
    net = std::move(seg.net);
    t_now = t_target;
    out.kkt_curve.push_back({t_now, frobenius_cosine(net.w, kkt.w)});
  }
  out.result.kkt_cosine = out.kkt_curve.back().second;
  out.result.final_loss = empirical_loss(net, ds, LossKind::Logistic);
  out.result.stable_rank_init = kAbsent;
  out.result.stable_rank_final = stable_rank(net.w);
  out.result.rel_stable_rank = kAbsent;
  return out;
}

CellOutput run_xor_cell(const CellContext& ctx) {
  const auto& cfg = *ctx.cfg;
  const std::size_t d = static_cast<std::size_t>(ctx.grid_value);
  const std::size_t n = static_cast<std::size_t>(param(cfg, "n", 64));
  const double gamma = param(cfg, "gamma", 0.5);
  const double eta = param(cfg, "eta", 5e-4);
  const double mu_exp = param(cfg, "mu_exp", 0.3);
  const std::size_t eval_n = static_cast<std::size_t>(param(cfg, "eval_n", 10000));
  const double horizon_mult = param(cfg, "horizon_mult", 5.0);

  const double mu_norm = std::pow(static_cast<double>(d), mu_exp);
  const Dataset ds = gen_xor(n, d, mu_norm, substream(ctx.seed, 0xce11));
  const auto cert = certify(ds, gamma);

  TwoLayerNet net0;
  net0.m1 = net0.m2 = 2;
  net0.activation = {ActivationKind::LeakyRelu, gamma};
  net0.w = Matrix(4, d);

  const double stop_loss = std::log(2.0) / static_cast<double>(n);
  const double loss0 = empirical_loss(net0, ds, LossKind::Logistic);
  const double tau_bound = 85.0 * loss0 * cert.ratio_R * cert.ratio_R *
                           std::pow(static_cast<double>(n), 3.0) /
                           (gamma * gamma * cert.r_min * cert.r_min);

  FlowOptions opts;
  opts.record_every = 64;
  opts.monitors = {"stable_rank", "fro_norm", "min_margin"};
  auto flow = flow_emulate(net0, ds, LossKind::Logistic, eta, tau_bound, stop_loss, opts);
  if (!flow.reached_stop_loss) throw std::runtime_error("flow did not reach the loss threshold");

  // keep flowing past interpolation so the direction settles
  auto tail = flow_emulate(flow.net, ds, LossKind::Logistic, eta,
                           horizon_mult * std::max(flow.stop_time, eta), 0.0, opts);

  CellOutput out;
  out.trace = std::move(flow.trace);
  for (const auto& row : tail.trace.rows)
    if (row.step > 0) {
      TraceRow shifted = row;
      shifted.step += out.trace.rows.back().step;
      shifted.flow_time += out.trace.rows.back().flow_time;
      out.trace.rows.push_back(shifted);
    }

  const Dataset eval = gen_xor(eval_n, d, mu_norm, substream(ctx.seed, 0xe7a1));
  out.result.clean_accuracy = accuracy_against(tail.net, eval, eval.ys);
  out.result.final_loss = empirical_loss(tail.net, ds, LossKind::Logistic);
  out.result.stable_rank_init = kAbsent;
  out.result.stable_rank_final = stable_rank(tail.net.w);
  out.result.rel_stable_rank = kAbsent;
  return out;
}

CellOutput run_custom_cell(const CellContext& ctx) {
  const auto& cfg = *ctx.cfg;
  const std::size_t d = static_cast<std::size_t>(ctx.grid_value);
  const std::size_t n = static_cast<std::size_t>(param(cfg, "n", 16));
  const std::size_t m = static_cast<std::size_t>(param(cfg, "m", 16));
  const double gamma = param(cfg, "gamma", 0.5);
  const int data_kind = static_cast<int>(param(cfg, "data", 0));  // 0 gauss, 1 mixture, 2 xor
  const int act_kind = static_cast<int>(param(cfg, "act", 1));    // 0 leaky, 1 smooth
  const int loss_kind = static_cast<int>(param(cfg, "loss", 1));  // 0 exp, 1 logistic
  const long steps = static_cast<long>(param(cfg, "steps", 1000));

  Dataset ds;
  if (data_kind == 1)
    ds = gen_mixture(n, d, param(cfg, "beta", 0.26), param(cfg, "noise_rate", 0.0),
                     substream(ctx.seed, 0xce11));
  else if (data_kind == 2)
    ds = gen_xor(n, d, std::pow(static_cast<double>(d), param(cfg, "mu_exp", 0.3)),
                 substream(ctx.seed, 0xce11));
  else
    ds = gen_gaussian(n, d, substream(ctx.seed, 0xce11));

  const auto cert = certify(ds, gamma);
  const auto budget = derive_budget(cert, m, d, param(cfg, "delta", 0.05),
                                    act_kind == 1 ? 0.25 : 0.0);

  TrainConfig tc;
  tc.shape = {m / 2, m - m / 2, d};
  tc.activation = {act_kind == 1 ? ActivationKind::SmoothLeaky : ActivationKind::LeakyRelu, gamma};
  tc.loss = loss_kind == 0 ? LossKind::Exponential : LossKind::Logistic;
  tc.alpha = param(cfg, "alpha", budget.alpha_max);
  tc.steps = steps;
  tc.init = {param(cfg, "omega", budget.omega_max(tc.alpha)), substream(ctx.seed, 0x1417)};
  tc.record_every = std::max<long>(1, steps / 100);

  CellOutput out;
  auto res = train(tc, ds);
  out.trace = std::move(res.trace);
  out.result.final_loss = out.trace.rows.back().loss;
  out.result.stable_rank_init = out.trace.rows.front().stable_rank;
  out.result.stable_rank_final = out.trace.rows.back().stable_rank;
  out.result.rel_stable_rank =
      out.result.stable_rank_final / out.result.stable_rank_init;
  return out;
}

CellOutput run_cell(const CellContext& ctx) {
  switch (ctx.cfg->preset) {
    case Preset::RankVsDimension:
    case Preset::RankVsInit:
      return run_mixture_gd_cell(ctx);
    case Preset::FlowToKkt:
      return run_flow_to_kkt_cell(ctx);
    case Preset::XorFailure:
      return run_xor_cell(ctx);
    case Preset::Custom:
      return run_custom_cell(ctx);
  }
  throw std::logic_error("unknown preset");
}

std::string grid_key_for(Preset p) {
  return p == Preset::RankVsInit ? "omega_mult" : "d";
}

struct SummaryRow {
  std::string preset;
  std::string cell_id;
  double grid_value = 0.0;
  std::string seed;
  std::string status;
  std::string trace_file;
};

std::vector<SummaryRow> read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("report: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("report: empty summary " + path.string());
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (start <= line.size()) {
      auto comma = line.find(',', start);
      cells.push_back(
          line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() < 12) continue;
    SummaryRow r;
    r.preset = cells[0];
    r.cell_id = cells[1];
    r.grid_value = std::strtod(cells[2].c_str(), nullptr);
    r.seed = cells[3];
    r.status = cells[4];
    r.trace_file = cells[11];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

void regenerate_report(const std::filesystem::path& dir) {
  const auto rows = read_summary(dir / "summary.csv");
  if (rows.empty()) return;
  const std::string preset = rows.front().preset;

  if (preset == "rank_vs_dimension" || preset == "rank_vs_init" || preset == "custom") {
    const std::string key = preset == "rank_vs_init" ? "omega_mult" : "d";
    SvgChart chart;
    chart.title = preset;
    chart.x_label = "step";
    chart.y_label = "stable rank / initial stable rank";
    std::vector<double> values;
    for (const auto& r : rows)
      if (std::find(values.begin(), values.end(), r.grid_value) == values.end())
        values.push_back(r.grid_value);
    for (double v : values) {
      SvgSeries series;
      series.label = key + "=" + fmt(v);
      std::vector<double> sum, steps;
      std::size_t count = 0;
      for (const auto& r : rows) {
        if (r.grid_value != v || r.status != "ok") continue;
        const auto trace = read_trace_csv(dir / r.trace_file);
        if (trace.rows.empty() || !std::isfinite(trace.rows.front().stable_rank)) continue;
        if (sum.empty()) {
          sum.assign(trace.rows.size(), 0.0);
          for (const auto& row : trace.rows) steps.push_back(static_cast<double>(row.step));
        }
        const double sr0 = trace.rows.front().stable_rank;
        for (std::size_t k = 0; k < trace.rows.size() && k < sum.size(); ++k)
          sum[k] += trace.rows[k].stable_rank / sr0;
        ++count;
      }
      if (!count) continue;
      for (std::size_t k = 0; k < sum.size(); ++k) {
        series.x.push_back(steps[k]);
        series.y.push_back(sum[k] / static_cast<double>(count));
      }
      chart.series.push_back(std::move(series));
    }
    write_svg(chart, dir / (preset + ".svg"));
  } else if (preset == "flow_to_kkt") {
    SvgChart chart;
    chart.title = "flow direction vs KKT direction";
    chart.x_label = "flow time";
    chart.y_label = "cosine";
    chart.log_x = true;
    for (const auto& r : rows) {
      if (r.status != "ok") continue;
      const auto curve_path = dir / (r.cell_id + "_kkt.csv");
      std::ifstream in(curve_path);
      if (!in) continue;
      std::string line;
      std::getline(in, line);  // header
      SvgSeries s;
      s.label = "seed=" + r.seed;
      while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        s.x.push_back(std::strtod(line.substr(0, comma).c_str(), nullptr));
        s.y.push_back(std::strtod(line.substr(comma + 1).c_str(), nullptr));
      }
      chart.series.push_back(std::move(s));
    }
    write_svg(chart, dir / "flow_to_kkt.svg");
  } else {
    SvgChart chart;
    chart.title = preset;
    chart.x_label = "flow time";
    chart.y_label = "training loss";
    chart.log_y = true;
    for (const auto& r : rows) {
      if (r.status != "ok") continue;
      const auto trace = read_trace_csv(dir / r.trace_file);
      SvgSeries s;
      s.label = "seed=" + r.seed;
      for (const auto& row : trace.rows) {
        s.x.push_back(row.flow_time);
        s.y.push_back(row.loss);
      }
      chart.series.push_back(std::move(s));
    }
    write_svg(chart, dir / (preset + ".svg"));
  }
}

Preset preset_from_name(const std::string& name) {
  if (name == "rank_vs_dimension") return Preset::RankVsDimension;
  if (name == "rank_vs_init") return Preset::RankVsInit;
  if (name == "flow_to_kkt") return Preset::FlowToKkt;
  if (name == "xor_failure") return Preset::XorFailure;
  if (name == "custom") return Preset::Custom;
  throw std::invalid_argument("unknown preset '" + name + "'");
}

std::string preset_name(Preset p) {
  switch (p) {
    case Preset::RankVsDimension: return "rank_vs_dimension";
    case Preset::RankVsInit: return "rank_vs_init";
    case Preset::FlowToKkt: return "flow_to_kkt";
    case Preset::XorFailure: return "xor_failure";
    case Preset::Custom: return "custom";
  }
  return "?";
}

void ExperimentConfig::apply_preset_defaults() {
  const std::string key = grid_key_for(preset);
  if (grid.find(key) == grid.end() || grid.at(key).empty()) {
    switch (preset) {
      case Preset::RankVsDimension: grid[key] = {1024.0, 4096.0, 16384.0}; break;
      case Preset::RankVsInit: grid[key] = {0.01, 0.1, 1.0, 10.0, 100.0}; break;
      case Preset::FlowToKkt: grid[key] = {512.0}; break;
      case Preset::XorFailure: grid[key] = {4096.0}; break;
      case Preset::Custom: grid[key] = {1024.0}; break;
    }
  }
  if (seeds.empty()) seeds = {1, 2};
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  ExperimentConfig cfg;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // strip comments and surrounding blanks
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected key=value", line_no);
    const std::string k = line.substr(0, eq);
    const std::string v = line.substr(eq + 1);
    auto split_doubles = [&] {
      std::vector<double> out;
      std::istringstream vs(v);
      std::string tok;
      while (std::getline(vs, tok, ',')) out.push_back(std::stod(tok));
      return out;
    };
    if (section == "experiment" || section.empty()) {
      if (k == "preset") cfg.preset = preset_from_name(v);
      else if (k == "out") cfg.output_dir = v;
      else if (k == "plot") cfg.plot = v == "1" || v == "true";
      else if (k == "force") cfg.force = v == "1" || v == "true";
      else if (k == "jobs") cfg.jobs = std::stoi(v);
      else if (k == "seeds") {
        std::istringstream vs(v);
        std::string tok;
        while (std::getline(vs, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
      } else throw ParseError("unknown experiment key '" + k + "'", line_no);
    } else if (section == "grid") {
      cfg.grid[k] = split_doubles();
    } else if (section == "params") {
      cfg.params[k] = std::stod(v);
    } else {
      throw ParseError("unknown section '" + section + "'", line_no);
    }
  }
  return cfg;
}

std::map<double, double> SweepSummary::mean_rel_stable_rank() const {
  std::map<double, std::pair<double, std::size_t>> acc;
  for (const auto& c : cells) {
    if (c.status != "ok" || !std::isfinite(c.rel_stable_rank)) continue;
    auto& [sum, count] = acc[c.grid_value];
    sum += c.rel_stable_rank;
    ++count;
  }
  std::map<double, double> out;
  for (const auto& [v, sc] : acc) out[v] = sc.first / static_cast<double>(sc.second);
  return out;
}

SweepSummary run_preset(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.apply_preset_defaults();
  if (cfg.output_dir.empty()) throw std::invalid_argument("run_preset: output_dir required");

  std::filesystem::create_directories(cfg.output_dir);
  const auto summary_path = cfg.output_dir / "summary.csv";
  if (std::filesystem::exists(summary_path) && !cfg.force)
    throw std::runtime_error("run_preset: " + summary_path.string() +
                             " exists; pass force to overwrite");

  const std::string key = grid_key_for(cfg.preset);
  std::vector<CellContext> cells;
  for (double v : cfg.grid.at(key))
    for (std::uint64_t seed : cfg.seeds) {
      CellContext ctx;
      ctx.cfg = &cfg;
      ctx.grid_key = key;
      ctx.grid_value = v;
      ctx.seed = seed;
      ctx.cell_id = preset_name(cfg.preset) + "_" + key + fmt(v) + "_s" + std::to_string(seed);
      cells.push_back(ctx);
    }

  int jobs = cfg.jobs;
  if (jobs <= 0) {
    if (const char* env = std::getenv("LEAKYBIAS_JOBS")) jobs = std::atoi(env);
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs <= 0) jobs = 1;
  }

  std::vector<CellOutput> outputs(cells.size());
  std::mutex queue_mutex;
  std::size_t next_cell = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t c;
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        if (next_cell >= cells.size()) return;
        c = next_cell++;
      }
      try {
        outputs[c] = run_cell(cells[c]);
        outputs[c].result.status = "ok";
      } catch (const std::exception& e) {
        outputs[c].result.status = std::string("error:") + e.what();
      }
      outputs[c].result.cell_id = cells[c].cell_id;
      outputs[c].result.grid_value = cells[c].grid_value;
      outputs[c].result.seed = cells[c].seed;
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::min<int>(jobs, static_cast<int>(cells.size())); ++j)
    pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  SweepSummary summary;
  summary.summary_csv = summary_path;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& res = outputs[c].result;
    if (res.status == "ok") {
      res.trace_path = cfg.output_dir / (cells[c].cell_id + ".csv");
      write_trace_csv(outputs[c].trace, res.trace_path);
      if (!outputs[c].kkt_curve.empty()) {
        std::ofstream kk(cfg.output_dir / (cells[c].cell_id + "_kkt.csv"));
        kk << "flow_time,cosine\n";
        char buf[40];
        for (auto [t, cosv] : outputs[c].kkt_curve) {
          std::snprintf(buf, sizeof(buf), "%.17g", t);
          kk << buf << ',';
          std::snprintf(buf, sizeof(buf), "%.17g", cosv);
          kk << buf << "\n";
        }
      }
    } else {
      ++summary.failed;
    }
    summary.cells.push_back(res);
  }

  {
    std::ofstream out(summary_path);
    if (!out) throw std::runtime_error("run_preset: cannot write " + summary_path.string());
    out << "preset,cell_id," << key
        << ",seed,status,final_loss,stable_rank_init,stable_rank_final,rel_stable_rank,"
           "clean_accuracy,kkt_cosine,trace_file\n";
    for (const auto& r : summary.cells) {
      // commas in error text would break the csv
      std::string status = r.status;
      std::replace(status.begin(), status.end(), ',', ';');
      out << preset_name(cfg.preset) << ',' << r.cell_id << ',' << fmt(r.grid_value) << ','
          << r.seed << ',' << status << ',' << fmt(r.final_loss) << ','
          << fmt(r.stable_rank_init) << ',' << fmt(r.stable_rank_final) << ','
          << fmt(r.rel_stable_rank) << ',' << fmt(r.clean_accuracy) << ','
          << fmt(r.kkt_cosine) << ',' << r.trace_path.filename().string() << "\n";
    }
  }

  if (cfg.plot) regenerate_report(cfg.output_dir);
  return summary;
}

}  // namespace leakybias
