#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hvicontact {

/// Part of the boundary an edge belongs to.
enum class BoundaryTag { Dirichlet, Neumann, Contact };

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct BoundaryEdge {
  std::array<std::size_t, 2> nodes{};
  BoundaryTag tag = BoundaryTag::Neumann;
};

/// Uniform triangulation of the rectangle [0,2] x [0,1].
///
/// Nodes are numbered row by row, node (i, j) sits at (i/ny, j/ny) and has
/// index j*(nx+1) + i. Every square cell is split along its bottom-left to
/// top-right diagonal. Boundary edges are tagged
///   x = 0        -> Dirichlet
///   y = 0        -> Contact
///   y = 1, x = 2 -> Neumann
class Mesh {
 public:
  /// nx cells along x, ny cells along y. Only square cells are supported,
  /// so nx must equal 2*ny.
  Mesh(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny) {
    if (nx == 0 || ny == 0) {
      throw std::invalid_argument("Mesh: cell counts must be positive");
    }
    if (nx != 2 * ny) {
      throw std::invalid_argument("Mesh: nx must equal 2*ny (square cells), got nx=" +
                                  std::to_string(nx) + ", ny=" + std::to_string(ny));
    }
    build();
  }

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  /// Element edge length.
  double h() const noexcept { return 1.0 / static_cast<double>(ny_); }

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  const std::vector<Point2>& nodes() const noexcept { return nodes_; }
  const Point2& node(std::size_t n) const { return nodes_.at(n); }
  const std::vector<std::array<std::size_t, 3>>& triangles() const noexcept { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const noexcept { return boundary_edges_; }

  std::size_t node_index(std::size_t i, std::size_t j) const noexcept { return j * (nx_ + 1) + i; }
  std::size_t column_of(std::size_t n) const noexcept { return n % (nx_ + 1); }
  std::size_t row_of(std::size_t n) const noexcept { return n / (nx_ + 1); }

  /// Nodes on y = 0 sorted by increasing x, including the corner (0,0).
  std::vector<std::size_t> contact_line_nodes() const {
    std::vector<std::size_t> out(nx_ + 1);
    for (std::size_t i = 0; i <= nx_; ++i) out[i] = node_index(i, 0);
    return out;
  }

  /// Nodes on y = 1 sorted by increasing x.
  std::vector<std::size_t> top_nodes() const {
    std::vector<std::size_t> out(nx_ + 1);
    for (std::size_t i = 0; i <= nx_; ++i) out[i] = node_index(i, ny_);
    return out;
  }

  bool is_dirichlet_node(std::size_t n) const noexcept { return column_of(n) == 0; }

  /// Signed area of triangle t (positive for counterclockwise ordering).
  double signed_area(std::size_t t) const {
    const auto& tri = triangles_.at(t);
    const Point2& a = nodes_[tri[0]];
    const Point2& b = nodes_[tri[1]];
    const Point2& c = nodes_[tri[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  }

 private:
  void build() {
    const double fny = static_cast<double>(ny_);
    nodes_.reserve((nx_ + 1) * (ny_ + 1));
    for (std::size_t j = 0; j <= ny_; ++j) {
      for (std::size_t i = 0; i <= nx_; ++i) {
        // Integer index divided by ny keeps refined coordinates bit-identical.
        nodes_.push_back({static_cast<double>(i) / fny, static_cast<double>(j) / fny});
      }
    }

    triangles_.reserve(2 * nx_ * ny_);
    for (std::size_t j = 0; j < ny_; ++j) {
      for (std::size_t i = 0; i < nx_; ++i) {
        const std::size_t p00 = node_index(i, j);
        const std::size_t p10 = node_index(i + 1, j);
        const std::size_t p01 = node_index(i, j + 1);
        const std::size_t p11 = node_index(i + 1, j + 1);
        triangles_.push_back({p00, p10, p11});
        triangles_.push_back({p00, p11, p01});
      }
    }

    for (std::size_t i = 0; i < nx_; ++i) {
      boundary_edges_.push_back({{node_index(i, 0), node_index(i + 1, 0)}, BoundaryTag::Contact});
    }
    for (std::size_t j = 0; j < ny_; ++j) {
      boundary_edges_.push_back({{node_index(nx_, j), node_index(nx_, j + 1)}, BoundaryTag::Neumann});
    }
    for (std::size_t i = nx_; i > 0; --i) {
      boundary_edges_.push_back({{node_index(i, ny_), node_index(i - 1, ny_)}, BoundaryTag::Neumann});
    }
    for (std::size_t j = ny_; j > 0; --j) {
      boundary_edges_.push_back({{node_index(0, j), node_index(0, j - 1)}, BoundaryTag::Dirichlet});
    }
  }

  std::size_t nx_;
  std::size_t ny_;
  std::vector<Point2> nodes_;
  std::vector<std::array<std::size_t, 3>> triangles_;
  std::vector<BoundaryEdge> boundary_edges_;
};

inline Mesh build_uniform_mesh(std::size_t nx, std::size_t ny) { return Mesh(nx, ny); }

/// Uniform refinement: halves h, so every coarse node is also a fine node.
inline Mesh refine(const Mesh& mesh) { return Mesh(2 * mesh.nx(), 2 * mesh.ny()); }

/// Mesh with element size 1/ny.
inline Mesh mesh_for_ny(std::size_t ny) { return Mesh(2 * ny, ny); }

}  // namespace hvicontact
