#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "leakybias/experiment.hpp"

using namespace leakybias;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("leakybias_" + tag)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config file parsing") {
  const auto path = fs::temp_directory_path() / "leakybias_exp.cfg";
  {
    std::ofstream out(path);
    out << "# comment\n"
        << "[experiment]\n"
        << "preset=rank_vs_init\n"
        << "seeds=3,4\n"
        << "plot=true\n"
        << "[grid]\n"
        << "omega_mult=0.1,1,10\n"
        << "[params]\n"
        << "n=24\n"
        << "steps=10\n";
  }
  const auto cfg = load_experiment_config(path);
  CHECK(cfg.preset == Preset::RankVsInit);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(cfg.plot);
  CHECK(cfg.grid.at("omega_mult") == std::vector<double>{0.1, 1.0, 10.0});
  CHECK(cfg.params.at("n") == 24.0);
  fs::remove(path);
  CHECK_THROWS(preset_from_name("nope"));
}

TEST_CASE("sweep writes one row per cell and refuses to overwrite") {
  TempDir dir("sweep_basic");
  ExperimentConfig cfg;
  cfg.preset = Preset::RankVsDimension;
  cfg.grid["d"] = {128.0, 256.0};
  cfg.seeds = {1, 2, 3};
  cfg.output_dir = dir.path;
  cfg.jobs = 2;
  cfg.params["n"] = 16;
  cfg.params["m"] = 8;
  cfg.params["steps"] = 6;
  cfg.params["eval_n"] = 50;

  const auto summary = run_preset(cfg);
  CHECK(summary.cells.size() == 6);  // |grid| x |seeds|
  CHECK(summary.failed == 0);
  CHECK(fs::exists(dir.path / "summary.csv"));
  for (const auto& cell : summary.cells) {
    CHECK(cell.status == "ok");
    CHECK(fs::exists(cell.trace_path));
    CHECK(cell.rel_stable_rank > 0.0);
  }

  // summary.csv row count matches
  std::ifstream in(dir.path / "summary.csv");
  std::string line;
  int rows = -1;  // discount header
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 6);

  CHECK_THROWS(run_preset(cfg));  // summary exists, no force
  cfg.force = true;
  CHECK_NOTHROW(run_preset(cfg));
}

TEST_CASE("report regeneration is byte-identical") {
  TempDir dir("sweep_report");
  ExperimentConfig cfg;
  cfg.preset = Preset::RankVsDimension;
  cfg.grid["d"] = {128.0};
  cfg.seeds = {5};
  cfg.output_dir = dir.path;
  cfg.plot = true;
  cfg.params["n"] = 12;
  cfg.params["m"] = 8;
  cfg.params["steps"] = 5;
  cfg.params["eval_n"] = 50;
  run_preset(cfg);

  const auto svg = dir.path / "rank_vs_dimension.svg";
  REQUIRE(fs::exists(svg));
  const std::string first = slurp(svg);
  regenerate_report(dir.path);
  CHECK(slurp(svg) == first);
  regenerate_report(dir.path);
  CHECK(slurp(svg) == first);
}

TEST_CASE("flow_to_kkt preset records a rising cosine curve") {
  TempDir dir("sweep_kkt");
  ExperimentConfig cfg;
  cfg.preset = Preset::FlowToKkt;
  cfg.grid["d"] = {256.0};
  cfg.seeds = {9};
  cfg.output_dir = dir.path;
  cfg.plot = true;
  cfg.params["horizon_mult"] = 20;
  const auto summary = run_preset(cfg);
  REQUIRE(summary.failed == 0);
  CHECK(summary.cells[0].kkt_cosine > 0.9);
  CHECK(summary.cells[0].stable_rank_final <= 2.0 + 1e-6);

  // the cosine curve file exists, rises, and feeds the chart
  const auto curve = dir.path / (summary.cells[0].cell_id + "_kkt.csv");
  REQUIRE(fs::exists(curve));
  std::ifstream in(curve);
  std::string line;
  std::getline(in, line);
  CHECK(line == "flow_time,cosine");
  double first = -1.0, last = -1.0;
  while (std::getline(in, line)) {
    const double c = std::strtod(line.substr(line.find(',') + 1).c_str(), nullptr);
    if (first < 0.0) first = c;
    last = c;
  }
  CHECK(last >= first);
  CHECK(fs::exists(dir.path / "flow_to_kkt.svg"));
}

TEST_CASE("failed cells are recorded and the sweep continues") {
  TempDir dir("sweep_partial");
  ExperimentConfig cfg;
  cfg.preset = Preset::Custom;
  cfg.grid["d"] = {64.0};
  cfg.seeds = {1};
  cfg.output_dir = dir.path;
  cfg.params["alpha"] = 1e9;  // diverges instantly
  cfg.params["omega"] = 1.0;
  cfg.params["loss"] = 0;  // exponential
  cfg.params["n"] = 4;
  cfg.params["m"] = 4;
  cfg.params["steps"] = 20;
  const auto summary = run_preset(cfg);
  CHECK(summary.cells.size() == 1);
  CHECK(summary.failed == 1);
  CHECK(summary.cells[0].status.rfind("error:", 0) == 0);
  CHECK(fs::exists(dir.path / "summary.csv"));
}
