// Experiment runner for the plug-and-play splitting toolkit.
//
//   pnpcli run <config-file>                 run all configured solvers/seeds
//   pnpcli grid-gamma <config-file> --grid a,b,c
//                                            denoiser-scaling grid search
//   pnpcli report <run-dir>... [-o out.csv]  aligned comparison CSV
//
// Exit code is 0 only when every run completed without tripping the
// divergence guard. Relative output_dir paths resolve against
// $PNPKIT_OUTPUT_ROOT when set.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pnp/pnp.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const pnp::ExperimentConfig cfg = pnp::config_from_file(config_path);
  const pnp::RunArtifacts art = pnp::run_experiment(cfg);
  for (const pnp::SolverSummary& s : art.summaries)
    std::printf("%-22s seed %-6llu %s  final ||x - truth|| = %.6g\n", s.solver.c_str(),
                static_cast<unsigned long long>(s.seed), s.diverged ? "DIVERGED" : "ok      ",
                s.final_err);
  std::printf("artifacts: %s\n", art.dir.string().c_str());
  return art.all_ok ? 0 : 1;
}

int cmd_grid(const std::string& config_path, const std::string& grid_arg) {
  pnp::ExperimentConfig cfg = pnp::config_from_file(config_path);
  std::vector<double> grid;
  for (const std::string& item : pnp::split_list(grid_arg)) grid.push_back(std::stod(item));
  try {
    const auto [best, table] = pnp::grid_search_gamma(cfg, grid);
    std::printf("%-12s %-16s %s\n", "gamma", "final_err", "status");
    for (const pnp::GammaRow& row : table)
      std::printf("%-12g %-16.8g %s\n", row.gamma, row.final_err,
                  row.diverged ? "diverged" : "ok");
    std::printf("best gamma = %g\n", best);
    return 0;
  } catch (const pnp::GridSearchError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    for (const pnp::GammaRow& row : e.table)
      std::fprintf(stderr, "  gamma %-10g -> diverged\n", row.gamma);
    return 1;
  }
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out_path) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  if (out_path.empty()) {
    pnp::compare_report(paths, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw pnp::InputError("cannot open " + out_path);
    pnp::compare_report(paths, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plug-and-play proximal splitting experiment runner"};
  app.require_subcommand(1);

  std::string config_path, grid_arg, report_out;
  std::vector<std::string> report_dirs;

  CLI::App* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "key = value config file")->required();

  CLI::App* grid = app.add_subcommand("grid-gamma", "grid search the denoiser scaling gamma");
  grid->add_option("config", config_path, "key = value config file")->required();
  grid->add_option("--grid", grid_arg, "comma-separated gamma values")->required();

  CLI::App* report = app.add_subcommand("report", "aligned error-vs-cost series across runs");
  report->add_option("dirs", report_dirs, "run directories")->required()->expected(-1);
  report->add_option("-o,--out", report_out, "output CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(config_path);
    if (grid->parsed()) return cmd_grid(config_path, grid_arg);
    return cmd_report(report_dirs, report_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
