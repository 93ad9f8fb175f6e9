#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvicontact/mesh.hpp"

namespace hvicontact {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Lamé coefficients of the isotropic law A(tau) = 2 eta tau + lambda tr(tau) I.
struct Material {
  double lambda = 4.0;
  double eta = 4.0;
};

/// Constant body force density f0 and traction density fN on the Neumann part.
struct Loads {
  std::array<double, 2> f0{0.0, 0.0};
  std::array<double, 2> fN{0.0, 0.0};
};

/// Degree-of-freedom bookkeeping for P1 displacements.
///
/// Node n owns global DOFs 2n (x) and 2n+1 (y). Free DOFs are renumbered so
/// that the contact DOFs C (nodes on y = 0 with x > 0, sorted by x, x before
/// y) come first and the interior DOFs I follow in node order. DOFs of nodes
/// on x = 0 form the Dirichlet set D and carry no free index.
class DofMap {
 public:
  static constexpr long kConstrained = -1;

  explicit DofMap(const Mesh& mesh)
      : num_nodes_(mesh.num_nodes()), free_index_(2 * mesh.num_nodes(), kConstrained) {
    std::size_t next = 0;
    for (std::size_t i = 1; i <= mesh.nx(); ++i) {
      const std::size_t n = mesh.node_index(i, 0);
      contact_nodes_.push_back(n);
      free_index_[2 * n] = static_cast<long>(next++);
      free_index_[2 * n + 1] = static_cast<long>(next++);
    }
    num_contact_ = next;
    for (std::size_t n = 0; n < num_nodes_; ++n) {
      if (mesh.is_dirichlet_node(n)) {
        num_dirichlet_ += 2;
        continue;
      }
      if (mesh.row_of(n) == 0) continue;
      free_index_[2 * n] = static_cast<long>(next++);
      free_index_[2 * n + 1] = static_cast<long>(next++);
    }
    num_free_ = next;
    free_to_global_.resize(num_free_);
    for (std::size_t g = 0; g < free_index_.size(); ++g) {
      if (free_index_[g] != kConstrained) free_to_global_[static_cast<std::size_t>(free_index_[g])] = g;
    }
  }

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_global() const noexcept { return 2 * num_nodes_; }
  std::size_t num_free() const noexcept { return num_free_; }
  std::size_t num_contact() const noexcept { return num_contact_; }
  std::size_t num_interior() const noexcept { return num_free_ - num_contact_; }
  std::size_t num_dirichlet() const noexcept { return num_dirichlet_; }

  /// Free index of a global DOF, or kConstrained.
  long free_index(std::size_t global_dof) const { return free_index_.at(global_dof); }
  std::size_t global_of_free(std::size_t free_dof) const { return free_to_global_.at(free_dof); }
  /// Contact nodes (y = 0, x > 0) in increasing x.
  const std::vector<std::size_t>& contact_nodes() const noexcept { return contact_nodes_; }

  /// Expands a free-DOF vector to all nodal DOFs (zeros on D).
  Vector to_nodal(const Vector& free) const {
    check_size(free, num_free_, "DofMap::to_nodal");
    Vector out = Vector::Zero(static_cast<Eigen::Index>(num_global()));
    for (std::size_t k = 0; k < num_free_; ++k) out[static_cast<Eigen::Index>(free_to_global_[k])] = free[static_cast<Eigen::Index>(k)];
    return out;
  }

  /// Restricts a nodal vector to the free DOFs.
  Vector to_free(const Vector& nodal) const {
    check_size(nodal, num_global(), "DofMap::to_free");
    Vector out(static_cast<Eigen::Index>(num_free_));
    for (std::size_t k = 0; k < num_free_; ++k) out[static_cast<Eigen::Index>(k)] = nodal[static_cast<Eigen::Index>(free_to_global_[k])];
    return out;
  }

  static void check_size(const Vector& v, std::size_t n, const char* where) {
    if (static_cast<std::size_t>(v.size()) != n) {
      throw std::invalid_argument(std::string(where) + ": expected size " + std::to_string(n) + ", got " +
                                  std::to_string(v.size()));
    }
  }

 private:
  std::size_t num_nodes_;
  std::vector<long> free_index_;
  std::vector<std::size_t> free_to_global_;
  std::vector<std::size_t> contact_nodes_;
  std::size_t num_free_ = 0;
  std::size_t num_contact_ = 0;
  std::size_t num_dirichlet_ = 0;
};

/// A(tau) = 2 eta tau + lambda tr(tau) I.
inline Eigen::Matrix2d stress(const Material& m, const Eigen::Matrix2d& strain) {
  return 2.0 * m.eta * strain + m.lambda * strain.trace() * Eigen::Matrix2d::Identity();
}

/// Stiffness of a linear triangle for A(tau) = 2 eta tau + lambda tr(tau) I.
/// Local DOF order is (x0, y0, x1, y1, x2, y2).
inline Matrix6 element_stiffness(const std::array<Point2, 3>& p, double lambda, double eta) {
  const double twice_area = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y);
  if (!(std::abs(twice_area) > 0.0)) {
    throw std::invalid_argument("element_stiffness: degenerate triangle");
  }
  const double area = 0.5 * std::abs(twice_area);

  // Gradients of the barycentric coordinates.
  std::array<double, 3> dx{}, dy{};
  for (int a = 0; a < 3; ++a) {
    const Point2& pj = p[(a + 1) % 3];
    const Point2& pk = p[(a + 2) % 3];
    dx[a] = (pj.y - pk.y) / twice_area;
    dy[a] = (pk.x - pj.x) / twice_area;
  }

  // Voigt strain (exx, eyy, 2exy).
  Eigen::Matrix<double, 3, 6> strain = Eigen::Matrix<double, 3, 6>::Zero();
  for (int a = 0; a < 3; ++a) {
    strain(0, 2 * a) = dx[a];
    strain(1, 2 * a + 1) = dy[a];
    strain(2, 2 * a) = dy[a];
    strain(2, 2 * a + 1) = dx[a];
  }
  Eigen::Matrix3d law;
  law << lambda + 2.0 * eta, lambda, 0.0,
         lambda, lambda + 2.0 * eta, 0.0,
         0.0, 0.0, eta;
  Matrix6 k = area * strain.transpose() * law * strain;
  // Exact symmetry regardless of rounding in the triple product.
  return 0.5 * (k + k.transpose());
}

/// Operators over every nodal DOF, before Dirichlet elimination.
struct FullSystem {
  SparseMatrix K;
  SparseMatrix B;
  Vector f;
};

/// Operators restricted to the free DOFs.
///
/// K is the stiffness, f the load and B the Gram matrix of (eps(u), eps(v))_H,
/// i.e. the stiffness of (lambda, eta) = (0, 1/2).
struct AssembledSystem {
  SparseMatrix K;
  SparseMatrix B;
  Vector f;
};

namespace detail {

inline std::array<Point2, 3> triangle_points(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles()[t];
  return {mesh.nodes()[tri[0]], mesh.nodes()[tri[1]], mesh.nodes()[tri[2]]};
}

inline double edge_length(const Mesh& mesh, const BoundaryEdge& e) {
  const Point2& a = mesh.nodes()[e.nodes[0]];
  const Point2& b = mesh.nodes()[e.nodes[1]];
  return std::hypot(b.x - a.x, b.y - a.y);
}

/// Load vector over all nodal DOFs; vertex rules are exact for constant densities.
inline Vector assemble_load(const Mesh& mesh, const Loads& loads) {
  Vector f = Vector::Zero(static_cast<Eigen::Index>(2 * mesh.num_nodes()));
  for (std::size_t t = 0; t < mesh.triangles().size(); ++t) {
    const double third = mesh.signed_area(t) / 3.0;
    for (std::size_t n : mesh.triangles()[t]) {
      f[static_cast<Eigen::Index>(2 * n)] += loads.f0[0] * third;
      f[static_cast<Eigen::Index>(2 * n + 1)] += loads.f0[1] * third;
    }
  }
  for (const BoundaryEdge& e : mesh.boundary_edges()) {
    if (e.tag != BoundaryTag::Neumann) continue;
    const double half = 0.5 * edge_length(mesh, e);
    for (std::size_t n : e.nodes) {
      f[static_cast<Eigen::Index>(2 * n)] += loads.fN[0] * half;
      f[static_cast<Eigen::Index>(2 * n + 1)] += loads.fN[1] * half;
    }
  }
  return f;
}

/// Sequential element loop; the accumulation order is fixed, so results are
/// bit-reproducible.
template <class DofFn>
SparseMatrix assemble_stiffness(const Mesh& mesh, double lambda, double eta, std::size_t n, DofFn dof_of) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(36 * mesh.triangles().size());
  for (std::size_t t = 0; t < mesh.triangles().size(); ++t) {
    const Matrix6 ke = element_stiffness(triangle_points(mesh, t), lambda, eta);
    const auto& tri = mesh.triangles()[t];
    std::array<long, 6> dofs{};
    for (int a = 0; a < 3; ++a) {
      dofs[2 * a] = dof_of(2 * tri[a]);
      dofs[2 * a + 1] = dof_of(2 * tri[a] + 1);
    }
    for (int r = 0; r < 6; ++r) {
      if (dofs[r] < 0) continue;
      for (int c = 0; c < 6; ++c) {
        if (dofs[c] < 0) continue;
        triplets.emplace_back(dofs[r], dofs[c], ke(r, c));
      }
    }
  }
  SparseMatrix k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

}  // namespace detail

inline FullSystem assemble_full(const Mesh& mesh, const Material& material, const Loads& loads) {
  const std::size_t n = 2 * mesh.num_nodes();
  auto identity = [](std::size_t g) { return static_cast<long>(g); };
  return {detail::assemble_stiffness(mesh, material.lambda, material.eta, n, identity),
          detail::assemble_stiffness(mesh, 0.0, 0.5, n, identity), detail::assemble_load(mesh, loads)};
}

/// Assembles K, f and B with Dirichlet rows and columns dropped (the
/// prescribed displacement is zero, so no lifting term appears).
inline AssembledSystem assemble(const Mesh& mesh, const DofMap& dofs, const Material& material, const Loads& loads) {
  if (dofs.num_nodes() != mesh.num_nodes()) {
    throw std::invalid_argument("assemble: dof map does not belong to this mesh");
  }
  if (!(material.lambda >= 0.0) || !(material.eta > 0.0)) {
    throw std::invalid_argument("assemble: Lame coefficients must satisfy lambda >= 0, eta > 0");
  }
  auto free_of = [&dofs](std::size_t g) { return dofs.free_index(g); };
  AssembledSystem sys;
  sys.K = detail::assemble_stiffness(mesh, material.lambda, material.eta, dofs.num_free(), free_of);
  sys.B = detail::assemble_stiffness(mesh, 0.0, 0.5, dofs.num_free(), free_of);
  sys.f = dofs.to_free(detail::assemble_load(mesh, loads));
  return sys;
}

/// Energy norm ||v||_V = sqrt(v^T B v).
inline double vnorm(const AssembledSystem& system, const Vector& v) {
  DofMap::check_size(v, static_cast<std::size_t>(system.B.rows()), "vnorm");
  const double q = v.dot(system.B * v);
  return std::sqrt(std::max(q, 0.0));
}

/// Quadratic part of the energy condensed onto the contact DOFs.
///
/// For every contact vector v_c,
///   1/2 v_c^T S v_c - g^T v_c + offset = min_{v_I} 1/2 v^T K v - f^T v,
/// and the minimizing interior block is returned by interior().
class ReducedProblem {
 public:
  using Factorization = Eigen::SimplicialLLT<SparseMatrix>;

  /// The first num_contact free DOFs form the contact block, the rest is eliminated.
  ReducedProblem(const AssembledSystem& system, Eigen::Index num_contact)
      : nc_(num_contact), ni_(system.K.rows() - num_contact) {
    if (nc_ < 0 || ni_ < 0 || system.K.cols() != system.K.rows() || system.f.size() != system.K.rows()) {
      throw std::invalid_argument("schur_reduce: inconsistent system or contact block size");
    }
    const SparseMatrix kcc = system.K.topLeftCorner(nc_, nc_);
    const Vector fc = system.f.head(nc_);
    if (ni_ == 0) {
      S_ = DenseMatrix(kcc);
      g_ = fc;
      offset_ = 0.0;
      return;
    }
    kic_ = system.K.bottomLeftCorner(ni_, nc_);
    fi_ = system.f.tail(ni_);
    factor_ = std::make_shared<Factorization>(SparseMatrix(system.K.bottomRightCorner(ni_, ni_)));
    if (factor_->info() != Eigen::Success) {
      throw std::runtime_error("schur_reduce: interior stiffness is not positive definite");
    }
    const DenseMatrix x = factor_->solve(DenseMatrix(kic_));
    interior_load_ = factor_->solve(fi_);
    S_ = DenseMatrix(kcc) - kic_.transpose() * x;
    S_ = 0.5 * (S_ + S_.transpose()).eval();
    g_ = fc - kic_.transpose() * interior_load_;
    offset_ = -0.5 * fi_.dot(interior_load_);
  }

  Eigen::Index num_contact() const noexcept { return nc_; }
  Eigen::Index num_interior() const noexcept { return ni_; }
  const DenseMatrix& S() const noexcept { return S_; }
  const Vector& g() const noexcept { return g_; }
  double offset() const noexcept { return offset_; }

  /// 1/2 v^T S v - g^T v + offset.
  double quadratic(const Vector& vc) const {
    DofMap::check_size(vc, static_cast<std::size_t>(nc_), "ReducedProblem::quadratic");
    return 0.5 * vc.dot(S_ * vc) - g_.dot(vc) + offset_;
  }

  /// Interior block solving K_II v_I = f_I - K_IC v_c.
  Vector interior(const Vector& vc) const {
    DofMap::check_size(vc, static_cast<std::size_t>(nc_), "ReducedProblem::interior");
    if (ni_ == 0) return Vector(0);
    return factor_->solve(fi_ - kic_ * vc);
  }

  /// Free-DOF vector [v_c; v_I].
  Vector expand(const Vector& vc) const {
    Vector v(nc_ + ni_);
    v.head(nc_) = vc;
    v.tail(ni_) = interior(vc);
    return v;
  }

 private:
  Eigen::Index nc_;
  Eigen::Index ni_;
  DenseMatrix S_;
  Vector g_;
  double offset_ = 0.0;
  SparseMatrix kic_;
  Vector fi_;
  Vector interior_load_;
  std::shared_ptr<const Factorization> factor_;
};

inline ReducedProblem schur_reduce(const AssembledSystem& system, const DofMap& dofs) {
  if (static_cast<std::size_t>(system.K.rows()) != dofs.num_free()) {
    throw std::invalid_argument("schur_reduce: system and dof map disagree");
  }
  return ReducedProblem(system, static_cast<Eigen::Index>(dofs.num_contact()));
}

/// P1 interpolation of a nodal field (2 DOFs per node) from a coarse mesh
/// onto a nested refinement.
inline Vector prolongate_nodal(const Vector& coarse, const Mesh& coarse_mesh, const Mesh& fine_mesh) {
  DofMap::check_size(coarse, 2 * coarse_mesh.num_nodes(), "prolongate");
  const std::size_t r = fine_mesh.ny() / coarse_mesh.ny();
  if (r == 0 || fine_mesh.ny() != r * coarse_mesh.ny() || fine_mesh.nx() != r * coarse_mesh.nx() || (r & (r - 1)) != 0) {
    throw std::invalid_argument("prolongate: fine mesh is not a uniform refinement of the coarse mesh");
  }
  const double fr = static_cast<double>(r);
  Vector fine(static_cast<Eigen::Index>(2 * fine_mesh.num_nodes()));
  auto value = [&](std::size_t node, int comp) { return coarse[static_cast<Eigen::Index>(2 * node + comp)]; };
  for (std::size_t J = 0; J <= fine_mesh.ny(); ++J) {
    for (std::size_t I = 0; I <= fine_mesh.nx(); ++I) {
      std::size_t ci = I / r, cj = J / r;
      std::size_t li = I % r, lj = J % r;
      // Nodes on the far boundary belong to the last cell.
      if (ci == coarse_mesh.nx()) { ci -= 1; li = r; }
      if (cj == coarse_mesh.ny()) { cj -= 1; lj = r; }
      const double a = static_cast<double>(li) / fr;
      const double b = static_cast<double>(lj) / fr;
      const std::size_t p00 = coarse_mesh.node_index(ci, cj);
      const std::size_t p10 = coarse_mesh.node_index(ci + 1, cj);
      const std::size_t p01 = coarse_mesh.node_index(ci, cj + 1);
      const std::size_t p11 = coarse_mesh.node_index(ci + 1, cj + 1);
      const std::size_t fn = fine_mesh.node_index(I, J);
      for (int c = 0; c < 2; ++c) {
        double v;
        if (li == 0 && lj == 0) {
          v = value(p00, c);
        } else if (a >= b) {
          v = (1.0 - a) * value(p00, c) + (a - b) * value(p10, c) + b * value(p11, c);
        } else {
          v = (1.0 - b) * value(p00, c) + (b - a) * value(p01, c) + a * value(p11, c);
        }
        fine[static_cast<Eigen::Index>(2 * fn + c)] = v;
      }
    }
  }
  return fine;
}

/// Prolongation of a coarse nodal field, returned on the fine free DOFs.
inline Vector prolongate(const Vector& coarse_nodal, const Mesh& coarse_mesh, const Mesh& fine_mesh,
                         const DofMap& fine_dofs) {
  return fine_dofs.to_free(prolongate_nodal(coarse_nodal, coarse_mesh, fine_mesh));
}

}  // namespace hvicontact
