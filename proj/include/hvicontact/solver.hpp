#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvicontact/contact_laws.hpp"
#include "hvicontact/elasticity.hpp"
#include "hvicontact/mesh.hpp"
#include "hvicontact/powell.hpp"

namespace hvicontact {

/// v -> L(w, v) on the condensed contact variables:
///   1/2 v^T S v - g^T v + offset + J(gamma w, gamma v).
///
/// Interior DOFs are eliminated exactly, which leaves the minimizer
/// unchanged because J only sees contact-node values.
class ReducedObjective {
 public:
  ReducedObjective(const ReducedProblem& reduced, const ContactFunctional& functional, Vector wc)
      : reduced_(&reduced), functional_(&functional), wc_(std::move(wc)) {
    DofMap::check_size(wc_, static_cast<std::size_t>(reduced.num_contact()), "ReducedObjective");
    if (functional.num_contact_dofs() != static_cast<std::size_t>(reduced.num_contact())) {
      throw std::invalid_argument("ReducedObjective: functional and reduced problem disagree");
    }
    w_edges_.reserve(functional.num_edges());
    for (std::size_t e = 0; e < functional.num_edges(); ++e) w_edges_.push_back(ContactFunctional::endpoints(wc_, e));
  }

  const Vector& first_argument() const noexcept { return wc_; }

  double operator()(const Vector& vc) const {
    DofMap::check_size(vc, static_cast<std::size_t>(reduced_->num_contact()), "reduced_objective");
    double j = 0.0;
    for (std::size_t e = 0; e < w_edges_.size(); ++e) {
      j += functional_->edge_value(e, w_edges_[e], ContactFunctional::endpoints(vc, e));
    }
    return reduced_->quadratic(vc) + j;
  }

  /// Restriction t -> L(w, x + t d) given fx = L(w, x). The quadratic part
  /// is expanded exactly and only edges touched by d are re-integrated.
  class Line {
   public:
    Line(const ReducedObjective& obj, const Vector& x, double fx, const Vector& d) : obj_(&obj), x_(&x), d_(&d), fx_(fx) {
      const DenseMatrix& S = obj.reduced_->S();
      std::vector<Eigen::Index> support;
      for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d[i] != 0.0) support.push_back(i);
      }
      Vector sd;
      if (support.size() * 4 < static_cast<std::size_t>(d.size())) {
        sd = Vector::Zero(d.size());
        for (Eigen::Index i : support) sd += d[i] * S.col(i);
      } else {
        sd = S * d;
      }
      slope_ = x.dot(sd) - obj.reduced_->g().dot(d);
      curvature_ = d.dot(sd);

      const std::size_t ne = obj.w_edges_.size();
      std::vector<char> touched(ne, 0);
      for (Eigen::Index i : support) {
        const std::size_t node = static_cast<std::size_t>(i) / 2;  // contact node k sits on edges k and k+1
        touched[node] = 1;
        if (node + 1 < ne) touched[node + 1] = 1;
      }
      for (std::size_t e = 0; e < ne; ++e) {
        if (!touched[e]) continue;
        edges_.push_back(e);
        base_j_ += obj.functional_->edge_value(e, obj.w_edges_[e], ContactFunctional::endpoints(x, e));
      }
    }

    double operator()(double t) const {
      if (t == 0.0) return fx_;
      double j = 0.0;
      for (std::size_t e : edges_) {
        std::array<double, 4> v = ContactFunctional::endpoints(*x_, e);
        const std::array<double, 4> dv = ContactFunctional::endpoints(*d_, e);
        for (int k = 0; k < 4; ++k) v[k] += t * dv[k];
        j += obj_->functional_->edge_value(e, obj_->w_edges_[e], v);
      }
      return fx_ + t * slope_ + 0.5 * t * t * curvature_ + (j - base_j_);
    }

   private:
    const ReducedObjective* obj_;
    const Vector* x_;
    const Vector* d_;
    double fx_;
    double slope_ = 0.0;
    double curvature_ = 0.0;
    double base_j_ = 0.0;
    std::vector<std::size_t> edges_;
  };

  Line along(const Vector& x, double fx, const Vector& d) const { return Line(*this, x, fx, d); }

 private:
  const ReducedProblem* reduced_;
  const ContactFunctional* functional_;
  Vector wc_;
  std::vector<std::array<double, 4>> w_edges_;
};

inline double reduced_objective(const ReducedProblem& reduced, const ContactFunctional& functional, const Vector& wc,
                                const Vector& vc) {
  return ReducedObjective(reduced, functional, wc)(vc);
}

/// Full energy L(w, v) = 1/2 v^T K v - f^T v + J(gamma w, gamma v) over free DOFs.
inline double full_objective(const AssembledSystem& system, const DofMap& dofs, const ContactFunctional& functional,
                             const Vector& w, const Vector& v) {
  DofMap::check_size(v, dofs.num_free(), "full_objective");
  DofMap::check_size(w, dofs.num_free(), "full_objective");
  const auto nc = static_cast<Eigen::Index>(dofs.num_contact());
  return 0.5 * v.dot(system.K * v) - system.f.dot(v) + functional.value(w.head(nc), v.head(nc));
}

/// Everything derived from one mesh, material, load and law choice.
struct ContactProblem {
  ContactProblem(Mesh mesh_in, const Material& material_in, const Loads& loads_in, ContactLawSet laws)
      : mesh(std::move(mesh_in)),
        material(material_in),
        loads(loads_in),
        dofs(mesh),
        system(assemble(mesh, dofs, material, loads)),
        reduced(schur_reduce(system, dofs)),
        functional(mesh, std::move(laws)) {}

  Mesh mesh;
  Material material;
  Loads loads;
  DofMap dofs;
  AssembledSystem system;
  ReducedProblem reduced;
  ContactFunctional functional;
};

/// Starting point of each inner minimization of L(u_{k-1}, .).
enum class InnerStart {
  /// The previous iterate u_{k-1}.
  Previous,
  /// The zero displacement. The sample laws make L(w, .) nonconvex, so the
  /// two rules can end at different fixed points.
  Zero,
};

struct SolverConfig {
  /// Outer stopping tolerance on ||u_k - u_{k-1}||_V.
  double eps = 1e-6;
  int max_outer = 200;
  PowellConfig powell;
  InnerStart inner_start = InnerStart::Previous;

  void validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("SolverConfig: eps must be positive");
    if (max_outer < 1) throw std::invalid_argument("SolverConfig: max_outer must be >= 1");
    powell.validate();
  }
};

struct Solution {
  /// Free-DOF displacement.
  Vector u;
  TraceField trace;
  int outer_iters = 0;
  /// ||u_k - u_{k-1}||_V for k = 1, 2, ...
  std::vector<double> history;
  bool converged = false;
  /// Powell sweeps used by each inner minimization.
  std::vector<int> inner_sweeps;
  /// L(u_{k-1}, u_k) and L(u_{k-1}, u_{k-1}) per outer step.
  std::vector<std::array<double, 2>> descent;
};

class InnerSolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solution of K u = f, i.e. the problem without contact tractions.
inline Vector initial_guess(const AssembledSystem& system) {
  if (system.K.rows() == 0) return Vector(0);
  Eigen::SimplicialLLT<SparseMatrix> llt(system.K);
  if (llt.info() != Eigen::Success) throw std::runtime_error("initial_guess: stiffness is not positive definite");
  return llt.solve(system.f);
}

inline Vector inner_start_point(const Vector& previous, InnerStart rule) {
  return rule == InnerStart::Zero ? Vector(Vector::Zero(previous.size())) : previous;
}

/// Fixed-point iteration u_k = argmin_v L(u_{k-1}, v), started from the
/// traction-free solution unless `start` is given. Each argmin is computed by
/// Powell's method on the contact variables, interior DOFs by back-substitution.
inline Solution fixed_point_solve(const ReducedProblem& reduced, const ContactFunctional& functional,
                                  const AssembledSystem& system, const DofMap& dofs, const SolverConfig& cfg,
                                  std::optional<Vector> start = std::nullopt) {
  cfg.validate();
  const auto nc = static_cast<Eigen::Index>(dofs.num_contact());
  Vector previous = start ? *start : initial_guess(system);
  DofMap::check_size(previous, dofs.num_free(), "fixed_point_solve(start)");

  Solution sol;
  sol.u = previous;
  for (int k = 1; k <= cfg.max_outer; ++k) {
    const ReducedObjective objective(reduced, functional, previous.head(nc));
    const Vector x0 = inner_start_point(previous.head(nc), cfg.inner_start);
    const PowellResult inner = powell_minimize(objective, x0, cfg.powell);
    if (!inner.converged) {
      throw InnerSolverError("fixed_point_solve: Powell did not converge in outer iteration " + std::to_string(k) +
                             " after " + std::to_string(inner.sweeps) + " sweeps");
    }
    const Vector current = reduced.expand(inner.x);
    sol.inner_sweeps.push_back(inner.sweeps);
    sol.descent.push_back({objective(inner.x), objective(previous.head(nc))});
    const double change = vnorm(system, current - previous);
    sol.history.push_back(change);
    sol.u = current;
    sol.outer_iters = k;
    previous = current;
    if (change <= cfg.eps) {
      sol.converged = true;
      break;
    }
  }
  sol.trace = TraceField::from_contact(sol.u.head(nc));
  return sol;
}

inline Solution fixed_point_solve(const ContactProblem& problem, const SolverConfig& cfg,
                                  std::optional<Vector> start = std::nullopt) {
  return fixed_point_solve(problem.reduced, problem.functional, problem.system, problem.dofs, cfg, std::move(start));
}

struct ResidualReport {
  /// Most negative value of <Au - f, v> + J^0(gamma u, gamma u; gamma v).
  double worst = std::numeric_limits<double>::infinity();
  std::size_t directions = 0;
};

/// Samples the discrete hemivariational inequality at u: random unit
/// directions over all free DOFs plus +-coordinate directions on the
/// contact DOFs. The generalized directional derivative is replaced by the
/// fixed-base-point estimate of directional_upper.
inline ResidualReport hvi_residual_check(const Vector& u, const ContactFunctional& functional,
                                         const AssembledSystem& system, const DofMap& dofs, std::size_t n_dirs,
                                         std::uint64_t seed,
                                         const std::vector<double>& deltas = {1e-4, 1e-5, 1e-6, 1e-7}) {
  DofMap::check_size(u, dofs.num_free(), "hvi_residual_check");
  const auto n = static_cast<Eigen::Index>(dofs.num_free());
  const auto nc = static_cast<Eigen::Index>(dofs.num_contact());
  const Vector residual = system.K * u - system.f;
  const Vector uc = u.head(nc);

  ResidualReport report;
  auto probe = [&](const Vector& v) {
    const double value = residual.dot(v) + directional_upper(functional, uc, uc, v.head(nc), deltas);
    report.worst = std::min(report.worst, value);
    ++report.directions;
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (std::size_t s = 0; s < n_dirs; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    const double norm = v.norm();
    if (norm == 0.0) continue;
    probe(v / norm);
  }
  for (Eigen::Index i = 0; i < nc; ++i) {
    for (double sign : {1.0, -1.0}) {
      v.setZero();
      v[i] = sign;
      probe(v);
    }
  }
  return report;
}

struct ConstantsReport {
  /// Coercivity constant of the elasticity operator, 2 eta.
  double m_A = 0.0;
  /// Norm of the trace map V -> L^2(Gamma_C)^2 on the current mesh.
  double c_gamma = 0.0;
  /// Unset when m_alpha or m_L is missing.
  std::optional<bool> H_s_holds;
  bool complete = false;
  int power_iterations = 0;
};

/// Mass matrix of the contact traces over the free DOFs.
inline SparseMatrix trace_gram(const Mesh& mesh, const DofMap& dofs) {
  std::vector<Eigen::Triplet<double>> triplets;
  const auto line = mesh.contact_line_nodes();
  for (std::size_t e = 0; e + 1 < line.size(); ++e) {
    const Point2& a = mesh.nodes()[line[e]];
    const Point2& b = mesh.nodes()[line[e + 1]];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const std::array<std::size_t, 2> nodes{line[e], line[e + 1]};
    for (int c = 0; c < 2; ++c) {
      for (int r = 0; r < 2; ++r) {
        for (int s = 0; s < 2; ++s) {
          const long fr = dofs.free_index(2 * nodes[r] + c);
          const long fs = dofs.free_index(2 * nodes[s] + c);
          if (fr < 0 || fs < 0) continue;
          triplets.emplace_back(fr, fs, len * (r == s ? 2.0 : 1.0) / 6.0);
        }
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(dofs.num_free());
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

/// Advisory check of m_A > (m_alpha + m_L) c_gamma^2.
///
/// c_gamma^2 is the largest eigenvalue of the pencil (trace Gram, B). Since
/// the trace Gram only touches contact DOFs, the pencil is condensed onto
/// them and the eigenvalue found by power iteration.
inline ConstantsReport constants_advisory(const Material& material, const LawConstants& constants, const Mesh& mesh,
                                          const DofMap& dofs, const AssembledSystem& system) {
  ConstantsReport report;
  report.m_A = 2.0 * material.eta;

  const auto nc = static_cast<Eigen::Index>(dofs.num_contact());
  if (nc > 0) {
    AssembledSystem gram{system.B, system.B, Vector::Zero(system.B.rows())};
    const ReducedProblem condensed(gram, nc);
    const DenseMatrix mc = DenseMatrix(trace_gram(mesh, dofs)).topLeftCorner(nc, nc);
    const Eigen::LLT<DenseMatrix> llt(condensed.S());
    Vector x = Vector::Ones(nc);
    double mu = 0.0;
    for (int it = 1; it <= 100000; ++it) {
      Vector y = llt.solve(mc * x);
      y /= y.norm();
      const double next = y.dot(mc * y) / y.dot(condensed.S() * y);
      x = std::move(y);
      report.power_iterations = it;
      if (std::abs(next - mu) <= 1e-15 * std::abs(next) && it > 10) {
        mu = next;
        break;
      }
      mu = next;
    }
    report.c_gamma = std::sqrt(mu);
  }

  if (constants.m_alpha && constants.m_L) {
    report.complete = true;
    report.H_s_holds = report.m_A > (*constants.m_alpha + *constants.m_L) * report.c_gamma * report.c_gamma;
  }
  return report;
}

}  // namespace hvicontact
