#pragma once

#include <Eigen/Dense>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hvicontact/contact_laws.hpp"
#include "hvicontact/elasticity.hpp"
#include "hvicontact/mesh.hpp"
#include "hvicontact/solver.hpp"

namespace hvicontact {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kSampleLawsPreset = "paper-sec5";

/// Everything a run needs. Physical parameters are optional until a preset
/// or the config file supplies them; resolve() checks completeness.
struct RunConfig {
  std::optional<std::string> preset;
  std::optional<double> lambda;
  std::optional<double> eta;
  std::optional<std::array<double, 2>> f0;
  std::optional<std::array<double, 2>> fN;
  /// "nonmonotone", "none" or "constant-friction".
  std::optional<std::string> laws;
  double friction_bound = 0.0;
  LawConstants constants;

  std::size_t ny = 8;
  /// Study levels h = 1, 1/2, ..., 2^-(levels-1).
  std::size_t levels = 5;
  /// Reference solution at h = 2^-ref_level.
  std::size_t ref_level = 6;

  SolverConfig solver;
  std::string out = "out";
  std::uint64_t seed = 1;
  std::size_t residual_dirs = 200;
  bool deterministic = false;
  double plot_scale = 1.0;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void config_fail(std::size_t line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

inline double parse_real(const std::string& key, const std::string& value, std::size_t line) {
  double out = 0.0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) config_fail(line, "cannot parse '" + value + "' as a number for key '" + key + "'");
  if (!std::isfinite(out)) config_fail(line, "value for key '" + key + "' must be finite");
  return out;
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& value, std::size_t line) {
  Int out{};
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (ec != std::errc() || ptr != last) config_fail(line, "cannot parse '" + value + "' as an integer for key '" + key + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value, std::size_t line) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  config_fail(line, "cannot parse '" + value + "' as a boolean for key '" + key + "'");
}

inline std::array<double, 2> parse_pair(const std::string& key, const std::string& value, std::size_t line) {
  std::string v = value;
  for (char& c : v) {
    if (c == ',') c = ' ';
  }
  std::istringstream is(v);
  std::string a, b, extra;
  if (!(is >> a >> b) || (is >> extra)) config_fail(line, "key '" + key + "' expects two numbers, got '" + value + "'");
  return {parse_real(key, a, line), parse_real(key, b, line)};
}

}  // namespace detail

/// Parses key = value lines ('#' starts a comment) on top of `base`.
inline RunConfig parse_config(std::string_view text, RunConfig base = RunConfig{}) {
  RunConfig cfg = std::move(base);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) detail::config_fail(line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) detail::config_fail(line_no, "empty key");
    if (value.empty()) detail::config_fail(line_no, "empty value for key '" + key + "'");

    auto real = [&] { return detail::parse_real(key, value, line_no); };
    auto positive = [&] {
      const double v = real();
      if (!(v > 0.0)) detail::config_fail(line_no, "key '" + key + "' must be positive");
      return v;
    };
    auto count = [&] { return detail::parse_integer<std::size_t>(key, value, line_no); };

    if (key == "preset") cfg.preset = value;
    else if (key == "lambda") cfg.lambda = real();
    else if (key == "eta") cfg.eta = real();
    else if (key == "f0") cfg.f0 = detail::parse_pair(key, value, line_no);
    else if (key == "fN") cfg.fN = detail::parse_pair(key, value, line_no);
    else if (key == "laws") {
      if (value != "nonmonotone" && value != "none" && value != "constant-friction") {
        detail::config_fail(line_no, "unknown law set '" + value + "' (nonmonotone, none, constant-friction)");
      }
      cfg.laws = value;
    }
    else if (key == "friction_bound") cfg.friction_bound = real();
    else if (key == "c_nu0") cfg.constants.c_nu0 = real();
    else if (key == "c_nu1") cfg.constants.c_nu1 = real();
    else if (key == "alpha_nu") cfg.constants.alpha_nu = real();
    else if (key == "c_tau") cfg.constants.c_tau = real();
    else if (key == "alpha_tau") cfg.constants.alpha_tau = real();
    else if (key == "h_bar_tau") cfg.constants.h_bar_tau = real();
    else if (key == "L_htau") cfg.constants.L_htau = real();
    else if (key == "m_alpha") cfg.constants.m_alpha = real();
    else if (key == "m_L") cfg.constants.m_L = real();
    else if (key == "ny") cfg.ny = count();
    else if (key == "levels") cfg.levels = count();
    else if (key == "ref_level") cfg.ref_level = count();
    else if (key == "eps") cfg.solver.eps = positive();
    else if (key == "max_outer") cfg.solver.max_outer = detail::parse_integer<int>(key, value, line_no);
    else if (key == "inner_start") {
      if (value == "previous") cfg.solver.inner_start = InnerStart::Previous;
      else if (value == "zero") cfg.solver.inner_start = InnerStart::Zero;
      else detail::config_fail(line_no, "unknown inner_start '" + value + "' (previous, zero)");
    }
    else if (key == "x_tol") cfg.solver.powell.x_tol = positive();
    else if (key == "f_tol") cfg.solver.powell.f_tol = positive();
    else if (key == "max_sweeps") cfg.solver.powell.max_sweeps = detail::parse_integer<int>(key, value, line_no);
    else if (key == "golden_tol") cfg.solver.powell.line_search.golden_tol = positive();
    else if (key == "initial_step") cfg.solver.powell.line_search.initial_step = positive();
    else if (key == "bracket_growth") cfg.solver.powell.line_search.bracket_growth = positive();
    else if (key == "max_expansions") cfg.solver.powell.line_search.max_expansions = detail::parse_integer<int>(key, value, line_no);
    else if (key == "out") cfg.out = value;
    else if (key == "seed") cfg.seed = detail::parse_integer<std::uint64_t>(key, value, line_no);
    else if (key == "residual_dirs") cfg.residual_dirs = count();
    else if (key == "deterministic") cfg.deterministic = detail::parse_bool(key, value, line_no);
    else if (key == "plot_scale") cfg.plot_scale = real();
    else detail::config_fail(line_no, "unknown key '" + key + "'");
  }
  return cfg;
}

/// Fills physical parameters missing from `cfg` with the named preset
/// (cfg.preset) and checks that every required key is present.
inline RunConfig resolve(RunConfig cfg) {
  if (cfg.preset) {
    if (*cfg.preset != kSampleLawsPreset) throw ConfigError("unknown preset '" + *cfg.preset + "'");
    if (!cfg.lambda) cfg.lambda = 4.0;
    if (!cfg.eta) cfg.eta = 4.0;
    if (!cfg.f0) cfg.f0 = std::array<double, 2>{-1.2, -0.9};
    if (!cfg.fN) cfg.fN = std::array<double, 2>{0.0, 0.0};
    if (!cfg.laws) cfg.laws = "nonmonotone";
  }
  auto require = [](bool present, const char* key) {
    if (!present) throw ConfigError("config: missing required key '" + std::string(key) + "'");
  };
  require(cfg.lambda.has_value(), "lambda");
  require(cfg.eta.has_value(), "eta");
  require(cfg.f0.has_value(), "f0");
  require(cfg.fN.has_value(), "fN");
  require(cfg.laws.has_value(), "laws");
  if (!(*cfg.eta > 0.0) || !(*cfg.lambda >= 0.0)) throw ConfigError("config: need eta > 0 and lambda >= 0");
  if (cfg.ny == 0) throw ConfigError("config: ny must be >= 1");
  if (cfg.levels == 0) throw ConfigError("config: levels must be >= 1");
  cfg.solver.validate();
  return cfg;
}

inline ContactLawSet make_laws(const RunConfig& cfg) {
  ContactLawSet laws;
  const std::string& name = cfg.laws.value();
  if (name == "nonmonotone") laws = nonmonotone_friction_laws();
  else if (name == "none") laws = zero_laws();
  else laws = with_constant_friction_bound(nonmonotone_friction_laws(), cfg.friction_bound);
  // User constants override the built-in ones.
  const LawConstants& c = cfg.constants;
  auto take = [](std::optional<double>& dst, const std::optional<double>& src) {
    if (src) dst = src;
  };
  take(laws.constants.c_nu0, c.c_nu0);
  take(laws.constants.c_nu1, c.c_nu1);
  take(laws.constants.alpha_nu, c.alpha_nu);
  take(laws.constants.c_tau, c.c_tau);
  take(laws.constants.alpha_tau, c.alpha_tau);
  take(laws.constants.h_bar_tau, c.h_bar_tau);
  take(laws.constants.L_htau, c.L_htau);
  take(laws.constants.m_alpha, c.m_alpha);
  take(laws.constants.m_L, c.m_L);
  return laws;
}

inline ContactProblem make_problem(const RunConfig& cfg, std::size_t ny) {
  Loads loads;
  loads.f0 = cfg.f0.value();
  loads.fN = cfg.fN.value();
  return ContactProblem(mesh_for_ny(ny), Material{cfg.lambda.value(), cfg.eta.value()}, loads, make_laws(cfg));
}

// ---------------------------------------------------------------------------
// Writers

namespace detail {

inline std::string fmt_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << content;
  if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace detail

/// One row per node: x,y,ux,uy.
inline std::string solution_csv(const Mesh& mesh, const Vector& nodal) {
  DofMap::check_size(nodal, 2 * mesh.num_nodes(), "solution_csv");
  std::ostringstream os;
  os << "x,y,ux,uy\n";
  for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
    const Point2& p = mesh.nodes()[n];
    os << detail::fmt_real(p.x) << ',' << detail::fmt_real(p.y) << ','
       << detail::fmt_real(nodal[static_cast<Eigen::Index>(2 * n)]) << ','
       << detail::fmt_real(nodal[static_cast<Eigen::Index>(2 * n + 1)]) << '\n';
  }
  return os.str();
}

/// Legacy ASCII VTK unstructured grid with displacement point data.
inline std::string solution_vtk(const Mesh& mesh, const Vector& nodal) {
  DofMap::check_size(nodal, 2 * mesh.num_nodes(), "solution_vtk");
  const std::size_t nn = mesh.num_nodes();
  const std::size_t nt = mesh.triangles().size();
  std::ostringstream os;
  os << "# vtk DataFile Version 3.0\n"
     << "hvicontact displacement h=" << detail::fmt_real(mesh.h()) << "\n"
     << "ASCII\n"
     << "DATASET UNSTRUCTURED_GRID\n"
     << "POINTS " << nn << " double\n";
  for (const Point2& p : mesh.nodes()) os << detail::fmt_real(p.x) << ' ' << detail::fmt_real(p.y) << " 0\n";
  os << "CELLS " << nt << ' ' << 4 * nt << '\n';
  for (const auto& tri : mesh.triangles()) os << "3 " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
  os << "CELL_TYPES " << nt << '\n';
  for (std::size_t t = 0; t < nt; ++t) os << "5\n";
  os << "POINT_DATA " << nn << '\n' << "VECTORS displacement double\n";
  for (std::size_t n = 0; n < nn; ++n) {
    os << detail::fmt_real(nodal[static_cast<Eigen::Index>(2 * n)]) << ' '
       << detail::fmt_real(nodal[static_cast<Eigen::Index>(2 * n + 1)]) << " 0\n";
  }
  return os.str();
}

/// Gnuplot script drawing reference and displaced nodes from solution.csv.
inline std::string deformation_gnuplot(double scale) {
  std::ostringstream os;
  os << "# usage: gnuplot -e \"scale=5\" deformed.gp\n"
     << "if (!exists(\"scale\")) scale = " << detail::fmt_real(scale) << "\n"
     << "set datafile separator ','\n"
     << "set terminal pngcairo size 1000,600\n"
     << "set output 'deformed.png'\n"
     << "set size ratio -1\n"
     << "set xlabel 'x'\n"
     << "set ylabel 'y'\n"
     << "plot 'solution.csv' skip 1 using 1:2 with points pt 7 ps 0.4 lc rgb 'gray' title 'reference', \\\n"
     << "     'solution.csv' skip 1 using ($1+scale*$3):($2+scale*$4) with points pt 7 ps 0.5 lc rgb 'blue' "
        "title 'displaced'\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Single solve

struct SingleRunResult {
  Mesh mesh;
  Solution solution;
  Vector nodal;
  ResidualReport residual;
  ConstantsReport advisory;
};

inline std::string single_report(const RunConfig& cfg, const SingleRunResult& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "h = " << r.mesh.h() << " (nx = " << r.mesh.nx() << ", ny = " << r.mesh.ny() << ")\n";
  os << "laws = " << cfg.laws.value_or("?") << "\n";
  os << "converged = " << (r.solution.converged ? "true" : "false") << "\n";
  os << "outer_iterations = " << r.solution.outer_iters << "\n";
  os << "history =";
  for (double v : r.solution.history) os << ' ' << v;
  os << "\ninner_sweeps =";
  for (int s : r.solution.inner_sweeps) os << ' ' << s;
  os << "\nresidual_worst = " << r.residual.worst << " over " << r.residual.directions << " directions\n";
  os << "m_A = " << r.advisory.m_A << "\n";
  os << "c_gamma = " << r.advisory.c_gamma << "\n";
  if (r.advisory.H_s_holds) {
    os << "H_s_holds = " << (*r.advisory.H_s_holds ? "true" : "false") << "\n";
  } else {
    os << "H_s_holds = incomplete (m_alpha and m_L not supplied)\n";
  }
  return os.str();
}

/// Solves on mesh h = 1/cfg.ny and writes solution.csv, solution.vtk,
/// deformed.gp and report.txt into cfg.out.
inline SingleRunResult run_single(const RunConfig& raw) {
  const RunConfig cfg = resolve(raw);
  const ContactProblem problem = make_problem(cfg, cfg.ny);
  Solution sol = fixed_point_solve(problem, cfg.solver);
  const ResidualReport residual =
      hvi_residual_check(sol.u, problem.functional, problem.system, problem.dofs, cfg.residual_dirs, cfg.seed);
  const ConstantsReport advisory =
      constants_advisory(problem.material, problem.functional.laws().constants, problem.mesh, problem.dofs, problem.system);
  Vector nodal = problem.dofs.to_nodal(sol.u);
  SingleRunResult result{problem.mesh, std::move(sol), std::move(nodal), residual, advisory};

  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);
  detail::write_file(out / "solution.csv", solution_csv(result.mesh, result.nodal));
  detail::write_file(out / "solution.vtk", solution_vtk(result.mesh, result.nodal));
  detail::write_file(out / "deformed.gp", deformation_gnuplot(cfg.plot_scale));
  detail::write_file(out / "report.txt", single_report(cfg, result));
  return result;
}

// ---------------------------------------------------------------------------
// Convergence study

struct ConvergenceEntry {
  double h = 0.0;
  double error = 0.0;
};

struct ConvergenceRecord {
  std::vector<ConvergenceEntry> entries;
  /// Least-squares slope of log(error) against log(h) over every level.
  double slope = 0.0;
  /// Same fit without the coarsest level (only with four or more levels).
  std::optional<double> slope_without_coarsest;
  std::size_t ref_level = 0;
  bool complete = false;
};

/// Least-squares slope of log(error) versus log(h).
inline double fit_loglog_slope(const std::vector<ConvergenceEntry>& entries) {
  if (entries.size() < 2) throw std::invalid_argument("fit_loglog_slope: need at least two points");
  double mx = 0.0, my = 0.0;
  for (const auto& e : entries) {
    if (!(e.h > 0.0) || !(e.error > 0.0)) throw std::invalid_argument("fit_loglog_slope: h and error must be positive");
    mx += std::log(e.h);
    my += std::log(e.error);
  }
  const double n = static_cast<double>(entries.size());
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& e : entries) {
    const double dx = std::log(e.h) - mx;
    sxy += dx * (std::log(e.error) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline std::string convergence_csv(const std::vector<ConvergenceEntry>& entries, const std::string& trailer = {}) {
  std::ostringstream os;
  os << "h,error\n";
  for (const auto& e : entries) os << detail::fmt_real(e.h) << ',' << detail::fmt_real(e.error) << '\n';
  if (!trailer.empty()) os << "# " << trailer << '\n';
  return os.str();
}

inline std::string convergence_gnuplot(const ConvergenceRecord& rec) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set terminal pngcairo size 800,600\n"
     << "set output 'convergence.png'\n"
     << "set logscale xy\n"
     << "set format xy '%g'\n"
     << "set xlabel 'h'\n"
     << "set ylabel 'error in V-norm'\n"
     << "set key top left\n"
     << "set grid\n"
     << "# fitted slope " << detail::fmt_real(rec.slope) << "\n";
  const double c = rec.entries.empty() ? 1.0 : rec.entries.back().error / rec.entries.back().h;
  os << "plot 'convergence.csv' skip 1 using 1:2 with linespoints pt 7 title 'error', \\\n"
     << "     " << detail::fmt_real(c) << "*x with lines dt 2 title 'O(h)'\n";
  return os.str();
}

/// Solves at h = 1, 1/2, ..., 2^-(levels-1) and at the reference level,
/// prolongates every coarse solution onto the reference mesh and measures
/// the V-norm error there. Writes convergence.csv and convergence.gp.
inline ConvergenceRecord run_convergence(const RunConfig& raw) {
  const RunConfig cfg = resolve(raw);
  if (cfg.ref_level < cfg.levels) {
    throw ConfigError("config: ref_level must be finer than every study level (ref_level >= levels)");
  }
  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out);

  struct LevelResult {
    Mesh mesh;
    Vector nodal;
  };
  auto solve_level = [&cfg](std::size_t level) {
    const ContactProblem problem = make_problem(cfg, std::size_t{1} << level);
    const Solution sol = fixed_point_solve(problem, cfg.solver);
    if (!sol.converged) {
      throw std::runtime_error("fixed point iteration did not converge at h = 2^-" + std::to_string(level));
    }
    return LevelResult{problem.mesh, problem.dofs.to_nodal(sol.u)};
  };

  ConvergenceRecord rec;
  rec.ref_level = cfg.ref_level;
  std::vector<LevelResult> results;
  try {
    if (cfg.deterministic) {
      for (std::size_t l = 0; l < cfg.levels; ++l) results.push_back(solve_level(l));
    } else {
      std::vector<std::future<LevelResult>> jobs;
      for (std::size_t l = 0; l < cfg.levels; ++l) jobs.push_back(std::async(std::launch::async, solve_level, l));
      for (auto& job : jobs) results.push_back(job.get());
    }
    const LevelResult reference = solve_level(cfg.ref_level);
    const DofMap ref_dofs(reference.mesh);
    const AssembledSystem ref_system =
        assemble(reference.mesh, ref_dofs, Material{*cfg.lambda, *cfg.eta}, Loads{*cfg.f0, *cfg.fN});
    for (const LevelResult& level : results) {
      const Vector diff = reference.nodal - prolongate_nodal(level.nodal, level.mesh, reference.mesh);
      rec.entries.push_back({level.mesh.h(), vnorm(ref_system, ref_dofs.to_free(diff))});
    }
  } catch (const std::exception& e) {
    detail::write_file(out / "convergence.csv", convergence_csv(rec.entries, std::string("incomplete: ") + e.what()));
    throw;
  }

  if (rec.entries.size() >= 2) rec.slope = fit_loglog_slope(rec.entries);
  if (rec.entries.size() >= 4) {
    rec.slope_without_coarsest = fit_loglog_slope({rec.entries.begin() + 1, rec.entries.end()});
  }
  rec.complete = true;
  detail::write_file(out / "convergence.csv", convergence_csv(rec.entries));
  detail::write_file(out / "convergence.gp", convergence_gnuplot(rec));
  return rec;
}

}  // namespace hvicontact
