#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvicontact/mesh.hpp"

namespace hvicontact {

/// Constants of the growth, Lipschitz and relaxed-monotonicity bounds of a
/// law triple. They are user supplied and only feed the advisory check of
/// the smallness condition m_A > (m_alpha + m_L) c_gamma^2.
struct LawConstants {
  std::optional<double> c_nu0;
  std::optional<double> c_nu1;
  std::optional<double> alpha_nu;
  std::optional<double> c_tau;
  std::optional<double> alpha_tau;
  std::optional<double> h_bar_tau;
  std::optional<double> L_htau;
  std::optional<double> m_alpha;
  std::optional<double> m_L;
};

/// The contact density j(x, w, v) = j_nu(v_nu) + h_tau(w_nu) j_tau(v_tau).
///
/// Breakpoints list the arguments where a law loses smoothness; the boundary
/// quadrature splits edges there. j_tau is assumed to depend on the norm of
/// its argument and may kink at zero.
struct ContactLawSet {
  std::function<double(double)> j_nu;
  std::function<double(double, double)> j_tau;
  std::function<double(double)> h_tau;
  std::vector<double> j_nu_breakpoints;
  std::vector<double> h_tau_breakpoints;
  LawConstants constants;
};

/// Normal compliance with saturation.
inline double eval_jnu(double xi) {
  if (xi < 0.0) return 0.0;
  if (xi < 0.1) return 10.0 * xi * xi;
  return 0.1;
}

inline double eval_jtau(double xi_x, double xi_y) { return std::log(std::hypot(xi_x, xi_y) + 1.0); }

/// Friction bound growing with penetration.
inline double eval_htau(double eta) { return eta < 0.0 ? 0.0 : 8.0 * eta; }

/// Built-in nonmonotone friction laws (saturated normal compliance,
/// logarithmic friction potential, penetration-proportional friction bound).
inline ContactLawSet nonmonotone_friction_laws() {
  ContactLawSet laws;
  laws.j_nu = eval_jnu;
  laws.j_tau = eval_jtau;
  laws.h_tau = eval_htau;
  laws.j_nu_breakpoints = {0.0, 0.1};
  laws.h_tau_breakpoints = {0.0};
  // |d/dxi ln(|xi|+1)| <= 1 and |j_nu'| <= 2. h_tau is unbounded, so no h_bar_tau.
  laws.constants.c_tau = 1.0;
  laws.constants.c_nu0 = 2.0;
  laws.constants.c_nu1 = 0.0;
  return laws;
}

/// J identically zero.
inline ContactLawSet zero_laws() {
  ContactLawSet laws;
  laws.j_nu = [](double) { return 0.0; };
  laws.j_tau = [](double, double) { return 0.0; };
  laws.h_tau = [](double) { return 0.0; };
  return laws;
}

/// Same laws with the friction bound frozen to a constant, so J no longer
/// depends on its first argument.
inline ContactLawSet with_constant_friction_bound(ContactLawSet laws, double bound) {
  laws.h_tau = [bound](double) { return bound; };
  laws.h_tau_breakpoints.clear();
  return laws;
}

/// Displacements at the nodes of y = 0 ordered by x, corner (0,0) first.
///
/// On y = 0 the outward normal is (0,-1): u_nu = -u_y and u_tau = (u_x, 0).
struct TraceField {
  std::vector<std::array<double, 2>> u;

  std::size_t size() const noexcept { return u.size(); }
  double normal(std::size_t k) const { return -u.at(k)[1]; }
  std::array<double, 2> tangential(std::size_t k) const { return {u.at(k)[0], 0.0}; }

  /// Inverse of the normal/tangential split: u = u_nu * nu + u_tau.
  static std::array<double, 2> compose(double u_nu, const std::array<double, 2>& u_tau) {
    return {u_tau[0], u_tau[1] - u_nu};
  }

  /// From a contact-DOF vector (x, y per contact node, corner excluded).
  static TraceField from_contact(const Eigen::VectorXd& vc) {
    TraceField t;
    const std::size_t n = static_cast<std::size_t>(vc.size()) / 2;
    t.u.resize(n + 1, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) {
      t.u[k + 1] = {vc[static_cast<Eigen::Index>(2 * k)], vc[static_cast<Eigen::Index>(2 * k + 1)]};
    }
    return t;
  }

  Eigen::VectorXd to_contact() const {
    Eigen::VectorXd vc(static_cast<Eigen::Index>(2 * (u.size() - 1)));
    for (std::size_t k = 1; k < u.size(); ++k) {
      vc[static_cast<Eigen::Index>(2 * (k - 1))] = u[k][0];
      vc[static_cast<Eigen::Index>(2 * (k - 1) + 1)] = u[k][1];
    }
    return vc;
  }
};

/// Boundary functional J(w, v) = int_{Gamma_C} j(x, w, v) da for P1 traces.
///
/// Traces are interpolated linearly along each contact edge. Each edge is
/// split where the interpolated arguments cross a law breakpoint and every
/// piece is integrated with 3-point Gauss-Legendre.
class ContactFunctional {
 public:
  ContactFunctional(const Mesh& mesh, ContactLawSet laws) : laws_(std::move(laws)) {
    const auto line = mesh.contact_line_nodes();
    lengths_.reserve(line.size() - 1);
    for (std::size_t e = 0; e + 1 < line.size(); ++e) {
      const Point2& a = mesh.nodes()[line[e]];
      const Point2& b = mesh.nodes()[line[e + 1]];
      lengths_.push_back(std::hypot(b.x - a.x, b.y - a.y));
    }
  }

  const ContactLawSet& laws() const noexcept { return laws_; }
  std::size_t num_edges() const noexcept { return lengths_.size(); }
  std::size_t num_contact_dofs() const noexcept { return 2 * lengths_.size(); }

  /// Density at one point from the normal part of w and the split of v.
  double density(double w_nu, double v_nu, double v_tau) const {
    return laws_.j_nu(v_nu) + laws_.h_tau(w_nu) * laws_.j_tau(v_tau, 0.0);
  }

  /// Contribution of edge e; w and v hold (x, y) at both endpoints.
  double edge_value(std::size_t e, const std::array<double, 4>& w, const std::array<double, 4>& v) const {
    std::array<double, 16> cuts{};
    std::size_t ncuts = 0;
    cuts[ncuts++] = 0.0;
    auto add_crossings = [&](double a, double b, const std::vector<double>& levels) {
      if (a == b) return;
      for (double level : levels) {
        const double s = (level - a) / (b - a);
        if (s > 0.0 && s < 1.0 && ncuts < cuts.size() - 1) cuts[ncuts++] = s;
      }
    };
    add_crossings(-v[1], -v[3], laws_.j_nu_breakpoints);
    add_crossings(-w[1], -w[3], laws_.h_tau_breakpoints);
    if ((v[0] < 0.0 && v[2] > 0.0) || (v[0] > 0.0 && v[2] < 0.0)) {
      cuts[ncuts++] = v[0] / (v[0] - v[2]);
    }
    cuts[ncuts++] = 1.0;
    std::sort(cuts.begin(), cuts.begin() + static_cast<std::ptrdiff_t>(ncuts));

    static constexpr std::array<double, 3> kNodes{0.11270166537925831, 0.5, 0.88729833462074169};
    static constexpr std::array<double, 3> kWeights{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    double sum = 0.0;
    for (std::size_t p = 0; p + 1 < ncuts; ++p) {
      const double s0 = cuts[p];
      const double len = cuts[p + 1] - s0;
      if (len <= 0.0) continue;
      double piece = 0.0;
      for (int q = 0; q < 3; ++q) {
        const double s = s0 + len * kNodes[q];
        const double t = 1.0 - s;
        piece += kWeights[q] * density(-(t * w[1] + s * w[3]), -(t * v[1] + s * v[3]), t * v[0] + s * v[2]);
      }
      sum += len * piece;
    }
    return lengths_[e] * sum;
  }

  /// J over contact-DOF vectors (corner value is the Dirichlet zero).
  double value(const Eigen::VectorXd& wc, const Eigen::VectorXd& vc) const {
    check(static_cast<std::size_t>(wc.size()), num_contact_dofs(), "ContactFunctional::value(w)");
    check(static_cast<std::size_t>(vc.size()), num_contact_dofs(), "ContactFunctional::value(v)");
    double sum = 0.0;
    for (std::size_t e = 0; e < lengths_.size(); ++e) sum += edge_value(e, endpoints(wc, e), endpoints(vc, e));
    return sum;
  }

  double value(const TraceField& w, const TraceField& v) const {
    check(w.size(), lengths_.size() + 1, "eval_J(w)");
    check(v.size(), lengths_.size() + 1, "eval_J(v)");
    double sum = 0.0;
    for (std::size_t e = 0; e < lengths_.size(); ++e) {
      sum += edge_value(e, {w.u[e][0], w.u[e][1], w.u[e + 1][0], w.u[e + 1][1]},
                        {v.u[e][0], v.u[e][1], v.u[e + 1][0], v.u[e + 1][1]});
    }
    return sum;
  }

  /// Endpoint values of edge e from a contact-DOF vector.
  static std::array<double, 4> endpoints(const Eigen::VectorXd& vc, std::size_t e) {
    std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
    if (e > 0) {
      out[0] = vc[static_cast<Eigen::Index>(2 * (e - 1))];
      out[1] = vc[static_cast<Eigen::Index>(2 * (e - 1) + 1)];
    }
    out[2] = vc[static_cast<Eigen::Index>(2 * e)];
    out[3] = vc[static_cast<Eigen::Index>(2 * e + 1)];
    return out;
  }

 private:
  static void check(std::size_t got, std::size_t want, const char* where) {
    if (got != want) {
      throw std::invalid_argument(std::string(where) + ": trace length " + std::to_string(got) + ", expected " +
                                  std::to_string(want));
    }
  }

  ContactLawSet laws_;
  std::vector<double> lengths_;
};

inline double eval_J(const Mesh& mesh, const ContactLawSet& laws, const TraceField& w, const TraceField& v) {
  return ContactFunctional(mesh, laws).value(w, v);
}

/// One-sided estimate of the generalized directional derivative
/// J^0_2(w, v; d): the largest difference quotient over the given steps.
/// The base point is held fixed, so this underestimates the limsup.
inline double directional_upper(const ContactFunctional& functional, const Eigen::VectorXd& wc,
                                const Eigen::VectorXd& vc, const Eigen::VectorXd& dc,
                                const std::vector<double>& deltas) {
  if (deltas.empty()) throw std::invalid_argument("directional_upper: empty step set");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0) || (i > 0 && !(deltas[i] < deltas[i - 1]))) {
      throw std::invalid_argument("directional_upper: steps must be positive and strictly decreasing");
    }
  }
  if (dc.size() != vc.size()) throw std::invalid_argument("directional_upper: direction size mismatch");
  const double base = functional.value(wc, vc);
  double best = -std::numeric_limits<double>::infinity();
  for (double delta : deltas) {
    const Eigen::VectorXd moved = vc + delta * dc;
    best = std::max(best, (functional.value(wc, moved) - base) / delta);
  }
  return best;
}

}  // namespace hvicontact
