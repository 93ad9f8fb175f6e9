#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hvicontact/experiments.hpp"

using namespace hvicontact;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hvicontact_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

std::string error_of(const std::string& text) {
  try {
    (void)resolve(parse_config(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, MaterialKeys) {
  const RunConfig cfg = parse_config("eta = 4\nlambda = 4");
  EXPECT_EQ(cfg.eta, 4.0);
  EXPECT_EQ(cfg.lambda, 4.0);
  EXPECT_FALSE(cfg.f0.has_value());
}

TEST(Config, UnknownKeyNamed) {
  const std::string msg = error_of("bogus = 1");
  EXPECT_NE(msg.find("bogus"), std::string::npos);
  EXPECT_NE(msg.find("line 1"), std::string::npos);
}

TEST(Config, PresetFillsEverything) {
  RunConfig base;
  base.preset = std::string(kSampleLawsPreset);
  const RunConfig cfg = resolve(parse_config("", base));
  EXPECT_EQ(*cfg.lambda, 4.0);
  EXPECT_EQ(*cfg.eta, 4.0);
  EXPECT_EQ(*cfg.f0, (std::array<double, 2>{-1.2, -0.9}));
  EXPECT_EQ(*cfg.fN, (std::array<double, 2>{0.0, 0.0}));
  EXPECT_EQ(*cfg.laws, "nonmonotone");
}

TEST(Config, FileValuesOverridePresetDefaults) {
  const RunConfig cfg = resolve(parse_config("preset = paper-sec5\nlambda = 1.5\nf0 = 0.5, -2\neps = 1e-7\n"));
  EXPECT_EQ(*cfg.lambda, 1.5);
  EXPECT_EQ(*cfg.eta, 4.0);
  EXPECT_EQ(*cfg.f0, (std::array<double, 2>{0.5, -2.0}));
  EXPECT_EQ(cfg.solver.eps, 1e-7);
}

TEST(Config, CommentsBlankLinesAndSolverKeys) {
  const RunConfig cfg = parse_config(
      "# a comment\n\n  ny = 16   # trailing\nmax_outer=50\ninner_start = zero\nx_tol = 1e-9\nseed = 77\n"
      "deterministic = yes\nlaws = constant-friction\nfriction_bound = 0.25\nm_alpha = 0\nm_L = 0.5\n");
  EXPECT_EQ(cfg.ny, 16u);
  EXPECT_EQ(cfg.solver.max_outer, 50);
  EXPECT_EQ(cfg.solver.inner_start, InnerStart::Zero);
  EXPECT_EQ(cfg.solver.powell.x_tol, 1e-9);
  EXPECT_EQ(cfg.seed, 77u);
  EXPECT_TRUE(cfg.deterministic);
  EXPECT_EQ(cfg.friction_bound, 0.25);
  EXPECT_EQ(*cfg.constants.m_L, 0.5);
  const ContactLawSet laws = make_laws(resolve(parse_config("preset = paper-sec5", cfg)));
  EXPECT_EQ(laws.h_tau(-1.0), 0.25);
  EXPECT_EQ(*laws.constants.m_L, 0.5);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("eta = 4\nlambda = abc").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("eta 4").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("f0 = 1").find("f0"), std::string::npos);
  EXPECT_NE(error_of("eps = -1").find("eps"), std::string::npos);
  EXPECT_NE(error_of("lambda = inf").find("lambda"), std::string::npos);
  EXPECT_NE(error_of("laws = weird").find("weird"), std::string::npos);
  EXPECT_NE(error_of("eta = 4\nlambda = 4\nf0 = 0,0\nlaws = none").find("missing required key 'fN'"),
            std::string::npos);
  EXPECT_NE(error_of("inner_start = sideways").find("sideways"), std::string::npos);
  EXPECT_NE(error_of("preset = other").find("other"), std::string::npos);
}

TEST(Convergence, TwoPointSlopeIsExact) {
  EXPECT_DOUBLE_EQ(fit_loglog_slope({{1.0, 0.1}, {0.5, 0.05}}), 1.0);
  EXPECT_THROW(fit_loglog_slope({{1.0, 0.1}}), std::invalid_argument);
  EXPECT_THROW(fit_loglog_slope({{1.0, 0.1}, {0.5, 0.0}}), std::invalid_argument);
}

TEST(Convergence, CsvFormat) {
  const std::string csv = convergence_csv({{1.0, 0.5}, {0.5, 0.25}});
  EXPECT_EQ(csv, "h,error\n1,0.5\n0.5,0.25\n");
  EXPECT_NE(convergence_csv({}, "incomplete: boom").find("# incomplete: boom"), std::string::npos);
}

TEST(SingleRun, ZeroLoadsGiveZeroDisplacementFiles) {
  RunConfig cfg = parse_config("lambda = 4\neta = 4\nf0 = 0, 0\nfN = 0, 0\nlaws = nonmonotone\nny = 2\n");
  cfg.out = scratch_dir("zero").string();
  cfg.residual_dirs = 10;
  const SingleRunResult r = run_single(cfg);
  EXPECT_TRUE(r.solution.converged);
  const auto lines = lines_of(slurp(fs::path(cfg.out) / "solution.csv"));
  ASSERT_EQ(lines.size(), 1 + r.mesh.num_nodes());
  EXPECT_EQ(lines[0], "x,y,ux,uy");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    EXPECT_EQ(lines[i].substr(lines[i].find(',', lines[i].find(',') + 1)), ",0,0");
  }
  EXPECT_TRUE(fs::exists(fs::path(cfg.out) / "deformed.gp"));
  EXPECT_TRUE(fs::exists(fs::path(cfg.out) / "report.txt"));
}

TEST(SingleRun, PresetQuarterMeshShowsDownwardContact) {
  RunConfig cfg;
  cfg.preset = std::string(kSampleLawsPreset);
  cfg.ny = 4;
  cfg.out = scratch_dir("preset4").string();
  const SingleRunResult r = run_single(cfg);
  ASSERT_TRUE(r.solution.converged);
  double min_uy = 0.0;
  for (std::size_t n : r.mesh.contact_line_nodes()) min_uy = std::min(min_uy, r.nodal[2 * n + 1]);
  EXPECT_LT(min_uy, 0.0);
  const std::string report = slurp(fs::path(cfg.out) / "report.txt");
  EXPECT_NE(report.find("converged = true"), std::string::npos);
  EXPECT_NE(report.find("H_s_holds = incomplete"), std::string::npos);
}

TEST(SingleRun, VtkSectionsHaveConsistentCounts) {
  const Mesh m = mesh_for_ny(2);
  const std::string vtk = solution_vtk(m, Vector::Zero(2 * m.num_nodes()));
  const auto lines = lines_of(vtk);
  ASSERT_GE(lines.size(), 5u);
  EXPECT_EQ(lines[0].rfind("# vtk DataFile Version", 0), 0u);
  EXPECT_EQ(lines[2], "ASCII");
  EXPECT_EQ(lines[3], "DATASET UNSTRUCTURED_GRID");

  auto section = [&](const std::string& key) -> std::size_t {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].rfind(key + " ", 0) == 0) return i;
    }
    ADD_FAILURE() << "missing section " << key;
    return 0;
  };
  const std::size_t points = section("POINTS");
  const std::size_t cells = section("CELLS");
  const std::size_t types = section("CELL_TYPES");
  const std::size_t data = section("POINT_DATA");
  EXPECT_EQ(lines[points], "POINTS 15 double");
  EXPECT_EQ(cells - points - 1, 15u);
  EXPECT_EQ(lines[cells], "CELLS 16 64");
  EXPECT_EQ(types - cells - 1, 16u);
  EXPECT_EQ(lines[types], "CELL_TYPES 16");
  EXPECT_EQ(data - types - 1, 16u);
  EXPECT_EQ(lines[data], "POINT_DATA 15");
  EXPECT_EQ(lines[data + 1], "VECTORS displacement double");
  EXPECT_EQ(lines.size() - data - 2, 15u);
}

TEST(ConvergenceRun, DeterministicRunsAreByteIdentical) {
  RunConfig cfg;
  cfg.preset = std::string(kSampleLawsPreset);
  cfg.levels = 3;
  cfg.ref_level = 4;
  cfg.deterministic = true;
  const fs::path first = scratch_dir("det_a");
  const fs::path second = scratch_dir("det_b");
  cfg.out = first.string();
  const ConvergenceRecord a = run_convergence(cfg);
  cfg.out = second.string();
  const ConvergenceRecord b = run_convergence(cfg);
  EXPECT_EQ(slurp(first / "convergence.csv"), slurp(second / "convergence.csv"));
  ASSERT_EQ(a.entries.size(), 3u);
  for (std::size_t i = 0; i < a.entries.size(); ++i) EXPECT_EQ(a.entries[i].error, b.entries[i].error);
}

TEST(ConvergenceRun, RowsDecrease) {
  RunConfig cfg;
  cfg.preset = std::string(kSampleLawsPreset);
  cfg.levels = 4;
  cfg.ref_level = 4;
  cfg.out = scratch_dir("rows").string();
  const ConvergenceRecord rec = run_convergence(cfg);
  ASSERT_TRUE(rec.complete);
  ASSERT_EQ(rec.entries.size(), 4u);
  for (std::size_t i = 1; i < rec.entries.size(); ++i) {
    EXPECT_LT(rec.entries[i].h, rec.entries[i - 1].h);
    EXPECT_LT(rec.entries[i].error, rec.entries[i - 1].error);
  }
  EXPECT_TRUE(rec.slope_without_coarsest.has_value());
  EXPECT_TRUE(fs::exists(fs::path(cfg.out) / "convergence.gp"));
}

TEST(ConvergenceRun, RejectsCoarseReference) {
  RunConfig cfg;
  cfg.preset = std::string(kSampleLawsPreset);
  cfg.levels = 4;
  cfg.ref_level = 2;
  cfg.out = scratch_dir("bad").string();
  EXPECT_THROW(run_convergence(cfg), ConfigError);
}

TEST(ConvergenceRun, FailedLevelLeavesIncompleteCsv) {
  RunConfig cfg;
  cfg.preset = std::string(kSampleLawsPreset);
  cfg.levels = 2;
  cfg.ref_level = 2;
  cfg.deterministic = true;
  cfg.solver.max_outer = 1;
  cfg.out = scratch_dir("partial").string();
  EXPECT_THROW(run_convergence(cfg), std::runtime_error);
  EXPECT_NE(slurp(fs::path(cfg.out) / "convergence.csv").find("# incomplete:"), std::string::npos);
}

TEST(ConvergenceRun, LinearElasticityRate) {
  // Pure elasticity (J = 0); the least-squares slope is a frozen regression
  // value of this discretization: the clamped corners limit the
  // pre-asymptotic rate on these coarse levels.
  RunConfig cfg = parse_config("lambda = 4\neta = 4\nf0 = -1.2, -0.9\nfN = 0, 0\nlaws = none\n");
  cfg.levels = 5;
  cfg.ref_level = 5;
  cfg.out = scratch_dir("linear").string();
  const ConvergenceRecord rec = run_convergence(cfg);
  ASSERT_EQ(rec.entries.size(), 5u);
  EXPECT_NEAR(rec.slope, 0.735, 0.01);
  EXPECT_GT(rec.entries.back().error, 0.0);
  for (std::size_t i = 1; i < rec.entries.size(); ++i) EXPECT_LT(rec.entries[i].error, rec.entries[i - 1].error);
}
