// Command-line driver: single solves and convergence studies.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "hvicontact/experiments.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string preset;
  std::optional<std::size_t> ny;
  std::optional<double> eps;
  std::optional<std::size_t> levels;
  std::optional<std::size_t> ref_level;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
};

hvicontact::RunConfig load(const Options& opt) {
  std::string text;
  if (!opt.config_path.empty()) {
    std::ifstream is(opt.config_path);
    if (!is) throw std::runtime_error("cannot read config '" + opt.config_path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    text = ss.str();
  }
  hvicontact::RunConfig cfg = hvicontact::parse_config(text);
  // Command-line flags take precedence over the file.
  if (!opt.preset.empty()) cfg.preset = opt.preset;
  if (opt.ny) cfg.ny = *opt.ny;
  if (opt.eps) cfg.solver.eps = *opt.eps;
  if (opt.levels) cfg.levels = *opt.levels;
  if (opt.ref_level) cfg.ref_level = *opt.ref_level;
  if (opt.out) cfg.out = *opt.out;
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.deterministic) cfg.deterministic = true;
  return cfg;
}

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", opt.preset, "built-in dataset (paper-sec5)");
  cmd->add_option("--ny", opt.ny, "cells across the height (h = 1/ny)");
  cmd->add_option("--eps", opt.eps, "outer stopping tolerance in the V-norm");
  cmd->add_option("--levels", opt.levels, "study levels h = 1 ... 2^-(levels-1)");
  cmd->add_option("--ref-level", opt.ref_level, "reference level, h = 2^-ref_level");
  cmd->add_option("--out", opt.out, "output directory");
  cmd->add_option("--seed", opt.seed, "seed of the residual diagnostic");
  cmd->add_flag("--deterministic", opt.deterministic, "sequential, bit-reproducible execution");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static frictional contact with nonmonotone friction bound"};
  app.require_subcommand(1);
  Options opt;
  CLI::App* solve = app.add_subcommand("solve", "solve on one mesh and export the displacement");
  CLI::App* converge = app.add_subcommand("converge", "run the mesh convergence study");
  add_common(solve, opt);
  add_common(converge, opt);
  CLI11_PARSE(app, argc, argv);

  try {
    const hvicontact::RunConfig cfg = load(opt);
    if (solve->parsed()) {
      const auto result = hvicontact::run_single(cfg);
      std::cout << hvicontact::single_report(hvicontact::resolve(cfg), result);
      std::cout << "wrote " << cfg.out << "/solution.csv, solution.vtk, deformed.gp, report.txt\n";
      return result.solution.converged ? 0 : 2;
    }
    const auto rec = hvicontact::run_convergence(cfg);
    std::printf("%-12s %s\n", "h", "error");
    for (const auto& e : rec.entries) std::printf("%-12.6g %.6e\n", e.h, e.error);
    std::printf("slope (all levels) = %.4f\n", rec.slope);
    if (rec.slope_without_coarsest) std::printf("slope (without h = 1) = %.4f\n", *rec.slope_without_coarsest);
    std::cout << "wrote " << cfg.out << "/convergence.csv, convergence.gp\n";
    return 0;
  } catch (const hvicontact::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
