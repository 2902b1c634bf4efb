// Command-line harness around the dataset, training, margin and sweep APIs.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "leakybias/analysis.hpp"
#include "leakybias/experiment.hpp"
#include "leakybias/margin.hpp"
#include "leakybias/training.hpp"

namespace fs = std::filesystem;
using namespace leakybias;

namespace {

struct DataArgs {
  std::string path;
  std::string kind = "gaussian";
  std::size_t n = 16;
  std::size_t d = 1024;
  std::uint64_t seed = 1;
  double beta = 0.26;
  double noise_rate = 0.15;
  double mu_exp = 0.3;
};

void add_data_options(CLI::App* cmd, DataArgs& args, bool generation_only) {
  if (!generation_only)
    cmd->add_option("--data", args.path, "dataset file to load instead of generating");
  cmd->add_option("--kind", args.kind, "gaussian | mixture | xor")
      ->check(CLI::IsMember({"gaussian", "mixture", "xor"}));
  cmd->add_option("--n", args.n, "sample count");
  cmd->add_option("--d", args.d, "input dimension");
  cmd->add_option("--seed", args.seed, "generator seed");
  cmd->add_option("--beta", args.beta, "mixture mean exponent, ||mu|| = d^beta");
  cmd->add_option("--noise-rate", args.noise_rate, "mixture label flip probability");
  cmd->add_option("--mu-exp", args.mu_exp, "xor cluster norm exponent");
}

Dataset resolve_dataset(const DataArgs& args) {
  if (!args.path.empty()) return load_dataset(args.path);
  if (args.kind == "mixture")
    return gen_mixture(args.n, args.d, args.beta, args.noise_rate, args.seed);
  if (args.kind == "xor")
    return gen_xor(args.n, args.d, std::pow(static_cast<double>(args.d), args.mu_exp),
                   args.seed);
  return gen_gaussian(args.n, args.d, args.seed);
}

void print_certificate(const OrthogonalityCertificate& c) {
  std::printf("n=%zu\n", c.n);
  std::printf("r_min=%.10g\nr_max=%.10g\nratio_R=%.10g\np=%.10g\nc_R=%.10g\ngamma=%.10g\n",
              c.r_min, c.r_max, c.ratio_R, c.p, c.c_R, c.gamma);
  std::printf("thm32_holds=%s\n", c.thm32_holds ? "true" : "false");
  std::printf("thm42_holds=%s\n", c.thm42_holds ? "true" : "false");
}

Activation parse_act(const std::string& name, double gamma) {
  return {name == "smooth" ? ActivationKind::SmoothLeaky : ActivationKind::LeakyRelu, gamma};
}

LossKind parse_loss(const std::string& name) {
  return name == "exp" ? LossKind::Exponential : LossKind::Logistic;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-layer leaky network implicit-bias laboratory"};
  app.require_subcommand(1);

  // ---- generate ----
  DataArgs gen_args;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "generate a dataset and write it to disk");
  add_data_options(gen, gen_args, true);
  gen->add_option("--out", gen_out, "output dataset file")->required();

  // ---- certify ----
  DataArgs cert_args;
  double cert_gamma = 0.5;
  auto* cert_cmd = app.add_subcommand("certify", "compute the near-orthogonality certificate");
  add_data_options(cert_cmd, cert_args, false);
  cert_cmd->add_option("--gamma", cert_gamma, "leak factor");

  // ---- train ----
  DataArgs train_args;
  std::string train_out, train_act = "smooth", train_loss = "logistic";
  std::size_t train_m1 = 16, train_m2 = 16;
  double train_gamma = 0.5, train_alpha = -1.0, train_omega = -1.0, train_delta = 0.05;
  long train_steps = 1000, train_record = 10;
  bool train_bounds = false;
  auto* train_cmd = app.add_subcommand("train", "full-batch gradient descent");
  add_data_options(train_cmd, train_args, false);
  train_cmd->add_option("--m1", train_m1, "positive neurons");
  train_cmd->add_option("--m2", train_m2, "negative neurons");
  train_cmd->add_option("--act", train_act, "leaky | smooth")
      ->check(CLI::IsMember({"leaky", "smooth"}));
  train_cmd->add_option("--loss", train_loss, "logistic | exp")
      ->check(CLI::IsMember({"logistic", "exp"}));
  train_cmd->add_option("--gamma", train_gamma, "leak factor");
  train_cmd->add_option("--alpha", train_alpha, "step size (negative: use alpha_max)");
  train_cmd->add_option("--omega", train_omega, "init std dev (negative: use omega_max)");
  train_cmd->add_option("--delta", train_delta, "budget confidence parameter");
  train_cmd->add_option("--steps", train_steps, "GD steps");
  train_cmd->add_option("--record-every", train_record, "trace recording stride");
  train_cmd->add_flag("--bounds", train_bounds, "emit the trajectory bound report");
  train_cmd->add_option("--out", train_out, "output directory")->required();

  // ---- flow ----
  DataArgs flow_args;
  std::string flow_out, flow_loss = "logistic";
  std::size_t flow_m1 = 1, flow_m2 = 1;
  double flow_gamma = 0.5, flow_eta = 1e-3, flow_horizon = -1.0, flow_stop = -1.0;
  long flow_record = 64;
  auto* flow_cmd = app.add_subcommand("flow", "forward-Euler gradient flow emulation");
  add_data_options(flow_cmd, flow_args, false);
  flow_cmd->add_option("--m1", flow_m1, "positive neurons");
  flow_cmd->add_option("--m2", flow_m2, "negative neurons");
  flow_cmd->add_option("--loss", flow_loss, "logistic | exp")
      ->check(CLI::IsMember({"logistic", "exp"}));
  flow_cmd->add_option("--gamma", flow_gamma, "leak factor");
  flow_cmd->add_option("--eta", flow_eta, "Euler step");
  flow_cmd->add_option("--horizon", flow_horizon,
                       "flow-time horizon (negative: convergence-time bound)");
  flow_cmd->add_option("--stop-loss", flow_stop, "stop threshold (negative: log(2)/n)");
  flow_cmd->add_option("--record-every", flow_record, "trace recording stride");
  flow_cmd->add_option("--out", flow_out, "output directory")->required();

  // ---- solve-qp ----
  DataArgs qp_args;
  std::string qp_out;
  std::size_t qp_m1 = 1, qp_m2 = 1;
  double qp_gamma = 0.5;
  auto* qp_cmd = app.add_subcommand("solve-qp", "solve the convex pair problem");
  add_data_options(qp_cmd, qp_args, false);
  qp_cmd->add_option("--m1", qp_m1, "positive neurons");
  qp_cmd->add_option("--m2", qp_m2, "negative neurons");
  qp_cmd->add_option("--gamma", qp_gamma, "leak factor");
  qp_cmd->add_option("--out", qp_out, "write the induced network checkpoint here");

  // ---- solve-svm ----
  DataArgs svm_args;
  std::string svm_out;
  auto* svm_cmd = app.add_subcommand("solve-svm", "hard-margin linear SVM");
  add_data_options(svm_cmd, svm_args, false);
  svm_cmd->add_option("--out", svm_out, "write z* as a one-row csv");

  // ---- verify ----
  DataArgs verify_args;
  std::string verify_out;
  std::size_t verify_m1 = 4, verify_m2 = 4, verify_probes = 10000;
  double verify_gamma = 0.5;
  auto* verify_cmd =
      app.add_subcommand("verify", "solve the QP, build the KKT net, check all limit properties");
  add_data_options(verify_cmd, verify_args, false);
  verify_cmd->add_option("--m1", verify_m1, "positive neurons");
  verify_cmd->add_option("--m2", verify_m2, "negative neurons");
  verify_cmd->add_option("--gamma", verify_gamma, "leak factor");
  verify_cmd->add_option("--probes", verify_probes, "random boundary probes");
  verify_cmd->add_option("--out", verify_out, "write the report csv here");

  // ---- sweep ----
  std::string sweep_preset = "rank_vs_dimension", sweep_config, sweep_out = "sweep_out";
  std::vector<std::uint64_t> sweep_seeds;
  bool sweep_force = false, sweep_plot = false;
  int sweep_jobs = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment preset grid");
  sweep_cmd->add_option("--preset", sweep_preset,
                        "rank_vs_dimension | rank_vs_init | flow_to_kkt | xor_failure | custom");
  sweep_cmd->add_option("--config", sweep_config, "experiment config file");
  sweep_cmd->add_option("--out", sweep_out, "output directory");
  sweep_cmd->add_option("--seed", sweep_seeds, "seed list");
  sweep_cmd->add_flag("--force", sweep_force, "overwrite an existing summary");
  sweep_cmd->add_flag("--plot", sweep_plot, "emit SVG charts");
  sweep_cmd->add_option("--jobs", sweep_jobs, "parallel cells (default: LEAKYBIAS_JOBS or cores)");

  // ---- report ----
  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "regenerate SVGs from a sweep's CSV files");
  report_cmd->add_option("--out", report_dir, "sweep output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2
  }

  try {
    if (*gen) {
      const Dataset ds = resolve_dataset(gen_args);
      save_dataset(ds, gen_out);
      std::printf("wrote %s (n=%zu d=%zu seed=%llu)\n", gen_out.c_str(), ds.n(), ds.d(),
                  static_cast<unsigned long long>(ds.seed));
      return 0;
    }

    if (*cert_cmd) {
      const Dataset ds = resolve_dataset(cert_args);
      print_certificate(certify(ds, cert_gamma));
      return 0;
    }

    if (*train_cmd) {
      const Dataset ds = resolve_dataset(train_args);
      const auto cert = certify(ds, train_gamma);
      const Activation act = parse_act(train_act, train_gamma);
      const auto budget =
          derive_budget(cert, train_m1 + train_m2, ds.d(), train_delta,
                        act.smoothness().value_or(0.0));
      TrainConfig cfg;
      cfg.shape = {train_m1, train_m2, ds.d()};
      cfg.activation = act;
      cfg.loss = parse_loss(train_loss);
      cfg.alpha = train_alpha >= 0.0 ? train_alpha : budget.alpha_max;
      cfg.steps = train_steps;
      cfg.init = {train_omega >= 0.0 ? train_omega : budget.omega_max(cfg.alpha),
                  train_args.seed ^ 0x1417};
      cfg.record_every = train_record;
      if (cfg.alpha > budget.alpha_max)
        std::printf("warning: alpha %.3g exceeds the step-size budget %.3g; "
                    "guarantees do not apply\n",
                    cfg.alpha, budget.alpha_max);
      if (cfg.init.omega_init > budget.omega_max(cfg.alpha))
        std::printf("warning: omega %.3g exceeds the initialization budget %.3g\n",
                    cfg.init.omega_init, budget.omega_max(cfg.alpha));

      fs::create_directories(train_out);
      const auto res = train(cfg, ds);
      write_trace_csv(res.trace, fs::path(train_out) / "trace.csv");
      save_network(res.net, fs::path(train_out) / "net.txt");
      std::printf("final loss %.10g over %ld steps; trace in %s\n",
                  res.trace.rows.back().loss, train_steps,
                  (fs::path(train_out) / "trace.csv").c_str());
      if (train_bounds) {
        const auto rep = check_trace_bounds(res.trace, cert, cfg);
        rep.write_csv(fs::path(train_out) / "bounds.csv");
        std::fputs(rep.to_text().c_str(), stdout);
        return rep.all_pass() ? 0 : 1;
      }
      return 0;
    }

    if (*flow_cmd) {
      const Dataset ds = resolve_dataset(flow_args);
      const auto cert = certify(ds, flow_gamma);
      TwoLayerNet net0;
      net0.m1 = flow_m1;
      net0.m2 = flow_m2;
      net0.activation = {ActivationKind::LeakyRelu, flow_gamma};
      net0.w = Matrix(flow_m1 + flow_m2, ds.d());
      const double stop =
          flow_stop >= 0.0 ? flow_stop : std::log(2.0) / static_cast<double>(ds.n());
      const double loss0 = empirical_loss(net0, ds, parse_loss(flow_loss));
      const double horizon =
          flow_horizon > 0.0
              ? flow_horizon
              : 85.0 * loss0 * cert.ratio_R * cert.ratio_R *
                    std::pow(static_cast<double>(ds.n()), 3.0) /
                    (flow_gamma * flow_gamma * cert.r_min * cert.r_min);
      FlowOptions opts;
      opts.record_every = flow_record;
      const auto res = flow_emulate(net0, ds, parse_loss(flow_loss), flow_eta, horizon, stop, opts);
      fs::create_directories(flow_out);
      write_trace_csv(res.trace, fs::path(flow_out) / "trace.csv");
      save_network(res.net, fs::path(flow_out) / "net.txt");
      if (res.reached_stop_loss)
        std::printf("reached loss < %.6g at flow time %.6g (bound %.6g)\n", stop,
                    res.stop_time, horizon);
      else
        std::printf("horizon %.6g reached with loss %.10g\n", horizon,
                    res.trace.rows.back().loss);
      return 0;
    }

    if (*qp_cmd) {
      const Dataset ds = resolve_dataset(qp_args);
      const auto sol = solve_qp(ds, qp_m1, qp_m2, qp_gamma);
      std::printf("objective=%.12g kkt_residual=%.3g\n", sol.objective, sol.kkt_residual);
      for (std::size_t i = 0; i < sol.duals.size(); ++i)
        std::printf("lambda[%zu]=%.12g\n", i, sol.duals[i]);
      if (!qp_out.empty()) {
        save_network(build_kkt_network(sol), qp_out, "meta=qp");
        std::printf("wrote %s\n", qp_out.c_str());
      }
      return 0;
    }

    if (*svm_cmd) {
      const Dataset ds = resolve_dataset(svm_args);
      const auto z = solve_svm(ds);
      std::printf("|z*| = %.12g\n", norm(z));
      if (!svm_out.empty()) {
        std::ofstream out(svm_out);
        char buf[40];
        for (std::size_t k = 0; k < z.size(); ++k) {
          std::snprintf(buf, sizeof(buf), "%.17g", z[k]);
          out << (k ? "," : "") << buf;
        }
        out << "\n";
        std::printf("wrote %s\n", svm_out.c_str());
      }
      return 0;
    }

    if (*verify_cmd) {
      const Dataset ds = resolve_dataset(verify_args);
      const auto sol = solve_qp(ds, verify_m1, verify_m2, verify_gamma);
      const auto rep = verify_theorem(sol, ds, verify_probes);
      std::fputs(rep.to_text().c_str(), stdout);
      if (!verify_out.empty()) {
        std::ofstream out(verify_out);
        out << rep.to_csv();
      }
      return rep.all_pass() ? 0 : 1;
    }

    if (*sweep_cmd) {
      ExperimentConfig cfg;
      if (!sweep_config.empty()) cfg = load_experiment_config(sweep_config);
      if (sweep_cmd->count("--preset") || sweep_config.empty())
        cfg.preset = preset_from_name(sweep_preset);
      if (!sweep_seeds.empty()) cfg.seeds = sweep_seeds;
      if (sweep_cmd->count("--out") || cfg.output_dir.empty()) cfg.output_dir = sweep_out;
      cfg.force = cfg.force || sweep_force;
      cfg.plot = cfg.plot || sweep_plot;
      if (sweep_jobs > 0) cfg.jobs = sweep_jobs;
      const auto summary = run_preset(cfg);
      std::printf("%zu cells, %zu failed; summary in %s\n", summary.cells.size(),
                  summary.failed, summary.summary_csv.c_str());
      return summary.failed == 0 ? 0 : 1;
    }

    if (*report_cmd) {
      regenerate_report(report_dir);
      std::printf("regenerated charts in %s\n", report_dir.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
