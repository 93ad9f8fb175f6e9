#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hvicontact {

struct LineSearchConfig {
  /// First trial step of the bracketing phase.
  double initial_step = 1e-2;
  /// Ratio between successive bracketing intervals.
  double bracket_growth = 1.618033988749895;
  /// Golden-section stops once the bracket is narrower than this.
  double golden_tol = 1e-10;
  int max_expansions = 200;
};

struct PowellConfig {
  double x_tol = 1e-8;
  double f_tol = 1e-15;
  /// Zero selects 200 * dimension.
  int max_sweeps = 0;
  LineSearchConfig line_search;

  void validate() const {
    if (!(x_tol > 0.0) || !(f_tol > 0.0) || !(line_search.golden_tol > 0.0) || !(line_search.initial_step > 0.0)) {
      throw std::invalid_argument("PowellConfig: tolerances and initial step must be positive");
    }
    if (max_sweeps < 0) throw std::invalid_argument("PowellConfig: max_sweeps must be >= 1 (or 0 for default)");
    if (!(line_search.bracket_growth > 1.0) || line_search.max_expansions < 1) {
      throw std::invalid_argument("PowellConfig: bracket_growth must exceed 1 and max_expansions be >= 1");
    }
  }
};

/// Raised when a line search keeps decreasing without bound.
class UnboundedDirectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LineResult {
  double t = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Minimizes a unimodal 1D function: geometric bracketing from t0 followed
/// by golden-section search. Returns the best point evaluated.
///
/// No derivative or parabolic step is used, so kinks are handled.
template <class F>
LineResult line_minimize(F&& f, double t0, const LineSearchConfig& cfg, double f_t0) {
  LineResult best{t0, f_t0, 0};
  auto eval = [&](double t) {
    const double v = f(t);
    ++best.evaluations;
    if (v < best.value) {
      best.value = v;
      best.t = t;
    }
    return v;
  };

  double lo, mid, hi, f_mid;
  double a = t0, fa = f_t0;
  double b = t0 + cfg.initial_step;
  double fb = eval(b);
  bool bracketed = false;
  if (fb > fa) {
    const double c = t0 - cfg.initial_step;
    const double fc = eval(c);
    if (fc >= fa) {
      lo = c;
      mid = t0;
      hi = b;
      f_mid = fa;
      bracketed = true;
    } else {
      b = c;
      fb = fc;
    }
  }
  if (!bracketed) {
    // Walk downhill from a through b with growing steps.
    double c = b + cfg.bracket_growth * (b - a);
    double fc = eval(c);
    int expansions = 0;
    while (fc < fb) {
      if (++expansions > cfg.max_expansions) {
        throw UnboundedDirectionError("line_minimize: no bracket after " + std::to_string(cfg.max_expansions) +
                                      " expansions; objective appears unbounded below");
      }
      a = b;
      b = c;
      fb = fc;
      c = b + cfg.bracket_growth * (b - a);
      fc = eval(c);
    }
    lo = std::min(a, c);
    hi = std::max(a, c);
    mid = b;
    f_mid = fb;
  }

  constexpr double kR = 0.6180339887498949;
  constexpr double kC = 1.0 - kR;
  double x0 = lo, x3 = hi, x1, x2;
  if (hi - mid > mid - lo) {
    x1 = mid;
    x2 = mid + kC * (hi - mid);
  } else {
    x2 = mid;
    x1 = mid - kC * (mid - lo);
  }
  double f1 = (x1 == mid) ? f_mid : eval(x1);
  double f2 = (x2 == mid) ? f_mid : eval(x2);
  while (x3 - x0 > cfg.golden_tol) {
    if (f2 < f1) {
      x0 = x1;
      x1 = x2;
      x2 = kR * x2 + kC * x3;
      f1 = f2;
      f2 = eval(x2);
    } else {
      x3 = x2;
      x2 = x1;
      x1 = kR * x1 + kC * x0;
      f2 = f1;
      f1 = eval(x1);
    }
    if (x1 == x2) break;  // bracket below floating-point resolution
  }
  return best;
}

template <class F>
LineResult line_minimize(F&& f, double t0, const LineSearchConfig& cfg) {
  const double f0 = f(t0);
  LineResult r = line_minimize(f, t0, cfg, f0);
  r.evaluations += 1;
  return r;
}

/// Objectives may expose a cheap restriction to a line: obj.along(x, fx, d)
/// returns a callable t -> obj(x + t d), given fx = obj(x).
template <class Objective>
concept LineRestrictable = requires(const Objective& obj, const Eigen::VectorXd& x, double fx) {
  { obj.along(x, fx, x)(0.0) } -> std::convertible_to<double>;
};

struct PowellResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int sweeps = 0;
  bool converged = false;
  /// Objective after each sweep (non-increasing).
  std::vector<double> sweep_values;
  long evaluations = 0;
};

namespace detail {

template <class Objective>
LineResult minimize_along(const Objective& f, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& d,
                          const LineSearchConfig& cfg) {
  if constexpr (LineRestrictable<Objective>) {
    return line_minimize(f.along(x, fx, d), 0.0, cfg, fx);
  } else {
    Eigen::VectorXd trial(x.size());
    auto slice = [&](double t) {
      trial = x + t * d;
      return static_cast<double>(f(trial));
    };
    return line_minimize(slice, 0.0, cfg, fx);
  }
}

}  // namespace detail

/// Powell's conjugate direction method.
///
/// Each sweep line-minimizes along every direction of the set, then the
/// direction of largest decrease is replaced by the normalized sweep
/// displacement (subject to the usual extrapolation test). The set is reset
/// to the coordinate basis every n sweeps. Stops when a sweep moves less than
/// x_tol in the max norm or lowers f by less than f_tol (relative).
template <class Objective>
PowellResult powell_minimize(const Objective& f, Eigen::VectorXd x0, const PowellConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = x0.size();
  PowellResult res;
  res.x = std::move(x0);
  res.value = f(res.x);
  res.evaluations = 1;
  if (n == 0) {
    res.converged = true;
    return res;
  }
  const int max_sweeps = cfg.max_sweeps > 0 ? cfg.max_sweeps : static_cast<int>(200 * n);
  Eigen::MatrixXd dirs = Eigen::MatrixXd::Identity(n, n);

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    if (sweep > 1 && (sweep - 1) % n == 0) dirs.setIdentity();
    res.sweeps = sweep;
    const Eigen::VectorXd start = res.x;
    const double f_start = res.value;
    Eigen::Index biggest = 0;
    double biggest_drop = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double before = res.value;
      const LineResult lr = detail::minimize_along(f, res.x, res.value, dirs.col(i), cfg.line_search);
      res.evaluations += lr.evaluations;
      if (lr.value < res.value) {
        res.x += lr.t * dirs.col(i);
        res.value = lr.value;
      }
      if (before - res.value > biggest_drop) {
        biggest_drop = before - res.value;
        biggest = i;
      }
    }
    Eigen::VectorXd disp = res.x - start;
    const double moved = disp.lpNorm<Eigen::Infinity>();
    const double drop = f_start - res.value;
    if (moved < cfg.x_tol || drop <= cfg.f_tol * (std::abs(f_start) + std::abs(res.value))) {
      res.sweep_values.push_back(res.value);
      res.converged = true;
      return res;
    }

    const Eigen::VectorXd extrapolated = 2.0 * res.x - start;
    const double f_ext = f(extrapolated);
    ++res.evaluations;
    if (f_ext < f_start) {
      const double a = f_start - res.value - biggest_drop;
      const double b = f_start - f_ext;
      const double test = 2.0 * (f_start - 2.0 * res.value + f_ext) * a * a - biggest_drop * b * b;
      if (test < 0.0) {
        disp /= disp.norm();
        const LineResult lr = detail::minimize_along(f, res.x, res.value, disp, cfg.line_search);
        res.evaluations += lr.evaluations;
        if (lr.value < res.value) {
          res.x += lr.t * disp;
          res.value = lr.value;
        }
        dirs.col(biggest) = dirs.col(n - 1);
        dirs.col(n - 1) = disp;
      }
    }
    res.sweep_values.push_back(res.value);
  }
  return res;
}

}  // namespace hvicontact
