#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <random>

#include "hvicontact/solver.hpp"
#include "oracles.hpp"

using namespace hvicontact;

namespace {

const Loads kPresetLoads{{-1.2, -0.9}, {0.0, 0.0}};

ContactProblem preset_problem(std::size_t ny) {
  return ContactProblem(mesh_for_ny(ny), Material{4.0, 4.0}, kPresetLoads, nonmonotone_friction_laws());
}

Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n01;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * n01(rng);
  return v;
}

// Solutions are shared between tests; each is computed once.
const Solution& preset_solution(std::size_t ny) {
  static std::map<std::size_t, Solution> cache;
  auto it = cache.find(ny);
  if (it == cache.end()) it = cache.emplace(ny, fixed_point_solve(preset_problem(ny), SolverConfig{})).first;
  return it->second;
}

double mean_ux(const DofMap& dofs, const Vector& u, const std::vector<std::size_t>& nodes) {
  const Vector nodal = dofs.to_nodal(u);
  double sum = 0.0;
  for (std::size_t n : nodes) sum += nodal[static_cast<Eigen::Index>(2 * n)];
  return sum / static_cast<double>(nodes.size());
}

}  // namespace

TEST(ReducedObjective, EqualsFullEnergyAfterBackSubstitution) {
  const ContactProblem p = preset_problem(1);
  const Eigen::Index nc = p.reduced.num_contact();
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector wc = random_vector(nc, rng, 0.2);
    const Vector vc = random_vector(nc, rng, 0.2);
    const Vector w = p.reduced.expand(wc);
    const Vector v = p.reduced.expand(vc);
    const double reduced = reduced_objective(p.reduced, p.functional, wc, vc);
    const double full = full_objective(p.system, p.dofs, p.functional, w, v);
    EXPECT_NEAR(reduced, full, 1e-10 * std::max(1.0, std::abs(full)));
  }
}

TEST(ReducedObjective, LinearCaseMinimumAndOffset) {
  const ContactProblem p(mesh_for_ny(1), Material{4.0, 4.0}, kPresetLoads, zero_laws());
  const Eigen::Index nc = p.reduced.num_contact();
  const DenseMatrix k(p.system.K);
  const Vector u = k.ldlt().solve(p.system.f);
  const double full_min = 0.5 * u.dot(k * u) - p.system.f.dot(u);
  const Vector vc = p.reduced.S().ldlt().solve(p.reduced.g());
  EXPECT_NEAR(reduced_objective(p.reduced, p.functional, Vector::Zero(nc), vc), full_min, 1e-10);

  const ContactProblem q = preset_problem(1);
  EXPECT_EQ(reduced_objective(q.reduced, q.functional, Vector::Zero(nc), Vector::Zero(nc)), q.reduced.offset());
  EXPECT_THROW(reduced_objective(q.reduced, q.functional, Vector::Zero(nc), Vector::Zero(nc + 1)),
               std::invalid_argument);
}

TEST(ReducedObjective, LineRestrictionMatchesDirectEvaluation) {
  const ContactProblem p = preset_problem(4);
  const Eigen::Index nc = p.reduced.num_contact();
  std::mt19937_64 rng(37);
  const ReducedObjective obj(p.reduced, p.functional, random_vector(nc, rng, 0.05));
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = random_vector(nc, rng, 0.05);
    Vector d = Vector::Zero(nc);
    if (trial % 2 == 0) {
      d[trial] = 1.0;  // sparse direction
    } else {
      d = random_vector(nc, rng, 1.0);
      d /= d.norm();
    }
    const double fx = obj(x);
    const auto line = obj.along(x, fx, d);
    for (double t : {-0.3, -1e-3, 0.0, 2e-4, 0.07, 0.5}) {
      EXPECT_NEAR(line(t), obj(Vector(x + t * d)), 1e-11 * std::max(1.0, std::abs(fx)));
    }
  }
}

TEST(InitialGuess, SolvesUnconstrainedElasticity) {
  const ContactProblem zero(mesh_for_ny(2), Material{}, Loads{}, nonmonotone_friction_laws());
  EXPECT_EQ(initial_guess(zero.system), Vector::Zero(zero.system.f.size()));

  const ContactProblem p = preset_problem(2);
  const Vector u = initial_guess(p.system);
  EXPECT_LE((p.system.K * u - p.system.f).norm(), 1e-10 * p.system.f.norm());
  double min_uy = 0.0;
  for (Eigen::Index i = 1; i < p.reduced.num_contact(); i += 2) min_uy = std::min(min_uy, u[i]);
  EXPECT_LT(min_uy, 0.0);
}

TEST(FixedPoint, LinearLimitTakesOneIteration) {
  const ContactProblem p(mesh_for_ny(4), Material{4.0, 4.0}, kPresetLoads, zero_laws());
  const Solution sol = fixed_point_solve(p, SolverConfig{});
  EXPECT_TRUE(sol.converged);
  EXPECT_EQ(sol.outer_iters, 1);
  const Vector direct = DenseMatrix(p.system.K).ldlt().solve(p.system.f);
  EXPECT_LE(vnorm(p.system, sol.u - direct), 1e-8 * vnorm(p.system, direct));
}

TEST(FixedPoint, ConstantFrictionBoundTakesTwoIterations) {
  for (double bound : {0.5, 2.0}) {
    const ContactProblem p(mesh_for_ny(4), Material{4.0, 4.0}, kPresetLoads,
                           with_constant_friction_bound(nonmonotone_friction_laws(), bound));
    const SolverConfig cfg;
    const Solution sol = fixed_point_solve(p, cfg);
    EXPECT_TRUE(sol.converged);
    EXPECT_EQ(sol.outer_iters, 2);
    ASSERT_EQ(sol.history.size(), 2u);
    EXPECT_LE(sol.history[1], cfg.eps);
  }
}

TEST(FixedPoint, PresetQuarterMeshHistoryAndDescent) {
  const Solution& sol = preset_solution(4);
  EXPECT_TRUE(sol.converged);
  ASSERT_GE(sol.history.size(), 2u);
  for (std::size_t k = 1; k < sol.history.size(); ++k) EXPECT_LE(sol.history[k], sol.history[k - 1]);
  for (std::size_t k = 0; k + 1 < sol.history.size(); ++k) EXPECT_GT(sol.history[k], SolverConfig{}.eps);
  for (const auto& d : sol.descent) EXPECT_LE(d[0], d[1]);
  EXPECT_EQ(sol.descent.size(), sol.history.size());
  EXPECT_EQ(sol.inner_sweeps.size(), sol.history.size());
}

TEST(FixedPoint, TraceMatchesSolution) {
  const ContactProblem p = preset_problem(4);
  const Solution& sol = preset_solution(4);
  const Vector nodal = p.dofs.to_nodal(sol.u);
  const auto line = p.mesh.contact_line_nodes();
  ASSERT_EQ(sol.trace.size(), line.size());
  for (std::size_t k = 0; k < line.size(); ++k) {
    EXPECT_EQ(sol.trace.u[k][0], nodal[static_cast<Eigen::Index>(2 * line[k])]);
    EXPECT_EQ(sol.trace.u[k][1], nodal[static_cast<Eigen::Index>(2 * line[k] + 1)]);
  }
}

TEST(FixedPoint, WarmStartIndependence) {
  // With the sample laws the smallness condition fails (j_nu saturates), and
  // the two starting rules end at different fixed points; this check is kept
  // as the uniqueness statement it encodes and is expected to fail here.
  const ContactProblem p = preset_problem(4);
  SolverConfig cold;
  cold.inner_start = InnerStart::Zero;
  const Solution& warm = preset_solution(4);
  const Solution b = fixed_point_solve(p, cold);
  EXPECT_TRUE(b.converged);
  EXPECT_LE(vnorm(p.system, warm.u - b.u), 10.0 * SolverConfig{}.eps);
}

TEST(FixedPoint, ZeroStartLimitIsNotAMinimizerOfItsOwnFunctional) {
  const ContactProblem p = preset_problem(4);
  const Eigen::Index nc = p.reduced.num_contact();
  SolverConfig cold;
  cold.inner_start = InnerStart::Zero;
  const Solution shallow = fixed_point_solve(p, cold);
  const Solution& deep = preset_solution(4);
  ASSERT_TRUE(shallow.converged);
  ASSERT_TRUE(deep.converged);

  // Powell restarted from the other limit finds a far lower value of
  // L(u_shallow, .), so u_shallow is only a local minimizer.
  const ReducedObjective at_shallow(p.reduced, p.functional, shallow.u.head(nc));
  const PowellResult escape = powell_minimize(at_shallow, Vector(deep.u.head(nc)), cold.powell);
  EXPECT_LT(escape.value, at_shallow(shallow.u.head(nc)) - 0.1);

  // The default limit survives the same test from both starts.
  const ReducedObjective at_deep(p.reduced, p.functional, deep.u.head(nc));
  const double own = at_deep(deep.u.head(nc));
  for (const Vector& x0 : {Vector(shallow.u.head(nc)), Vector(Vector::Zero(nc))})
    EXPECT_GE(powell_minimize(at_deep, x0, cold.powell).value, own - 1e-8);
}

TEST(FixedPoint, ContractionRatiosBelowOne) {
  const Solution& sol = preset_solution(8);
  EXPECT_TRUE(sol.converged);
  ASSERT_GE(sol.history.size(), 3u);
  for (std::size_t k = 1; k < sol.history.size(); ++k) EXPECT_LT(sol.history[k] / sol.history[k - 1], 1.0);
}

TEST(FixedPoint, QualitativeDeformation) {
  for (std::size_t ny : {4u, 8u}) {
    const ContactProblem p = preset_problem(ny);
    const Solution& sol = preset_solution(ny);
    double max_penetration = -1.0;
    for (std::size_t k = 0; k < sol.trace.size(); ++k) max_penetration = std::max(max_penetration, sol.trace.normal(k));
    EXPECT_GT(max_penetration, 0.0);
    const double top = mean_ux(p.dofs, sol.u, p.mesh.top_nodes());
    const double bottom = mean_ux(p.dofs, sol.u, p.mesh.contact_line_nodes());
    EXPECT_LT(top, bottom);
    EXPECT_LT(bottom, 0.0);
  }
}

TEST(FixedPoint, SmallestMeshMatchesGridSearch) {
  const ContactProblem p = preset_problem(1);
  const Solution sol = fixed_point_solve(p, SolverConfig{});
  ASSERT_TRUE(sol.converged);
  const Eigen::Index nc = p.reduced.num_contact();
  ASSERT_EQ(nc, 4);
  const Vector uc = sol.u.head(nc);
  // At the fixed point, u_c minimizes L(u, .); search for that minimizer independently.
  const ReducedObjective obj(p.reduced, p.functional, uc);
  const Vector oracle_min = oracle::grid_then_polish([&obj](const Eigen::VectorXd& v) { return obj(v); },
                                                     Vector::Constant(nc, -1.0), Vector::Constant(nc, 1.0), 21, 1e-8);
  EXPECT_LE((oracle_min - uc).lpNorm<Eigen::Infinity>(), 1e-3);
}

TEST(FixedPoint, NonConvergenceIsReported) {
  SolverConfig cfg;
  cfg.max_outer = 1;
  const Solution sol = fixed_point_solve(preset_problem(2), cfg);
  EXPECT_FALSE(sol.converged);
  EXPECT_EQ(sol.outer_iters, 1);

  SolverConfig starved;
  starved.powell.max_sweeps = 1;
  EXPECT_THROW(fixed_point_solve(preset_problem(4), starved), InnerSolverError);

  SolverConfig bad;
  bad.eps = 0.0;
  EXPECT_THROW(fixed_point_solve(preset_problem(1), bad), std::invalid_argument);
}

TEST(Residual, LinearProblemSatisfiesEquality) {
  const ContactProblem p(mesh_for_ny(4), Material{4.0, 4.0}, kPresetLoads, zero_laws());
  const Solution sol = fixed_point_solve(p, SolverConfig{});
  const ResidualReport r = hvi_residual_check(sol.u, p.functional, p.system, p.dofs, 200, 1);
  EXPECT_GE(r.worst, -1e-8);
  EXPECT_EQ(r.directions, 200 + 2 * p.dofs.num_contact());
}

TEST(Residual, ConvergedPresetAndPerturbedNonSolution) {
  const ContactProblem p = preset_problem(4);
  const Solution& sol = preset_solution(4);
  const ResidualReport good = hvi_residual_check(sol.u, p.functional, p.system, p.dofs, 200, 1);
  EXPECT_GE(good.worst, -1e-4);

  Vector perturbed = sol.u;
  perturbed[0] += 0.1;
  const ResidualReport bad = hvi_residual_check(perturbed, p.functional, p.system, p.dofs, 200, 1);
  EXPECT_LT(bad.worst, -1e-2);
}

TEST(Advisory, CoercivityAndSmallnessFlag) {
  const ContactProblem p = preset_problem(2);
  LawConstants c;
  const ConstantsReport incomplete = constants_advisory(p.material, c, p.mesh, p.dofs, p.system);
  EXPECT_EQ(incomplete.m_A, 8.0);
  EXPECT_FALSE(incomplete.complete);
  EXPECT_FALSE(incomplete.H_s_holds.has_value());

  c.m_alpha = 0.0;
  c.m_L = 0.0;
  const ConstantsReport zero = constants_advisory(p.material, c, p.mesh, p.dofs, p.system);
  EXPECT_TRUE(zero.complete);
  EXPECT_TRUE(*zero.H_s_holds);

  c.m_alpha = 1e6;
  EXPECT_FALSE(*constants_advisory(p.material, c, p.mesh, p.dofs, p.system).H_s_holds);
}

TEST(Advisory, TraceConstantMatchesDenseGeneralizedEigensolve) {
  const ContactProblem p = preset_problem(2);
  const ConstantsReport r = constants_advisory(p.material, LawConstants{}, p.mesh, p.dofs, p.system);
  const DenseMatrix gram(trace_gram(p.mesh, p.dofs));
  const DenseMatrix b(p.system.B);
  const Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> ges(gram, b);
  const double expected = std::sqrt(ges.eigenvalues().maxCoeff());
  EXPECT_NEAR(r.c_gamma, expected, 1e-6);
}

TEST(Advisory, TraceGramIntegratesContactLength) {
  const ContactProblem p = preset_problem(4);
  const SparseMatrix m = trace_gram(p.mesh, p.dofs);
  // phi = 1 at every non-corner node and 0 at the pinned corner:
  // int phi^2 = (2 - h) + h/3.
  Vector ones_x = Vector::Zero(m.rows());
  for (Eigen::Index i = 0; i < p.reduced.num_contact(); i += 2) ones_x[i] = 1.0;
  const double h = p.mesh.h();
  EXPECT_NEAR(ones_x.dot(m * ones_x), 2.0 - h + h / 3.0, 1e-12);
}
