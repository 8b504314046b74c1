#pragma once

// Counter-term root finding, critical curves and the power-law fit of the
// gap near the critical line, all driven by the exact-diagonalization oracle.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phi4q/errors.hpp"
#include "phi4q/fock_space.hpp"

namespace phi4q::fock {

struct BisectionOptions {
  double tolerance = 1e-8;  // on gap^2 - target
  int max_iter = 200;
  std::optional<std::pair<double, double>> bracket;  // delta_m interval
};

/// Gap as a function of (delta_m, lambda) at fixed (L, m_sq, n_max).
inline double gap_at(const HamiltonianTerms& terms, double delta_m, double lambda) {
  return exact_spectrum(terms.hamiltonian(delta_m, lambda)).gap;
}

namespace detail {

template <class F>
double bisect(F&& f, double lo, double hi, const BisectionOptions& opt, const char* who) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (std::abs(flo) < opt.tolerance) return lo;
  if (std::abs(fhi) < opt.tolerance) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) {
    std::ostringstream os;
    os << who << ": no sign change on bracket [" << lo << ", " << hi << "] (f = " << flo << ", "
       << fhi << ")";
    throw BracketError(os.str());
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < opt.max_iter; ++it) {
    mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm) < opt.tolerance) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(mid))) break;
  }
  return mid;
}

}  // namespace detail

/// Default delta_m bracket: [-|m0_sq| - m_sq - lambda, m_sq + lambda].
inline std::pair<double, double> default_counterterm_bracket(const lattice::ModelParams& p) {
  return {-std::abs(p.m0_sq()) - p.m_sq - std::abs(p.lambda), p.m_sq + std::abs(p.lambda)};
}

/// delta_m such that gap^2 = target_m_sq, holding the reference mass m_sq
/// (and lambda) fixed; the bare mass follows as m_sq + delta_m.
inline double solve_counterterm(const HamiltonianTerms& terms, double lambda, double target_m_sq,
                                const BisectionOptions& opt = {}) {
  if (!(target_m_sq > 0.0)) throw ValidationError("solve_counterterm: target_m_sq must be > 0");
  const auto p = terms.base.with_lambda(lambda);
  const auto [lo, hi] = opt.bracket.value_or(default_counterterm_bracket(p));
  auto f = [&](double d) {
    const double g = gap_at(terms, d, lambda);
    return g * g - target_m_sq;
  };
  return detail::bisect(f, lo, hi, opt, "solve_counterterm");
}

inline double solve_counterterm(const lattice::ModelParams& params, double target_m_sq,
                                const BisectionOptions& opt = {}) {
  params.validate();
  return solve_counterterm(HamiltonianTerms(params), params.lambda, target_m_sq, opt);
}

/// Self-consistent counter term at fixed bare mass: the delta_m whose
/// reference mass m_sq = m0_sq - delta_m reproduces itself as the gap,
/// gap^2 = m0_sq - delta_m. The reference mass is searched in
/// [m_sq_lo, m_sq_hi].
inline double self_consistent_counterterm(int L, double m0_sq, double lambda, int n_max,
                                          double m_sq_lo = 1e-3,
                                          std::optional<double> m_sq_hi = std::nullopt,
                                          const BisectionOptions& opt = {}) {
  const double hi = m_sq_hi.value_or(4.0 + std::abs(m0_sq) + std::abs(lambda));
  if (!(m_sq_lo > 0.0) || !(hi > m_sq_lo))
    throw ValidationError("self_consistent_counterterm: invalid reference-mass bracket");
  auto f = [&](double m_sq) {
    const auto p = lattice::ModelParams::from_bare_mass(L, m_sq, m0_sq, lambda, n_max);
    const double g = mass_gap(p);
    return g * g - m_sq;
  };
  const double m_sq = detail::bisect(f, m_sq_lo, hi, opt, "self_consistent_counterterm");
  return m0_sq - m_sq;
}

struct CurvePoint {
  double lambda = 0.0;
  double m0_sq = std::numeric_limits<double>::quiet_NaN();
  double delta_m = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string error;
};

/// For each lambda, the bare mass at which gap^2 = target_gap_sq (reference
/// mass from `base`). Failed points carry ok = false and a message.
inline std::vector<CurvePoint> critical_curve(const std::vector<double>& lambda_grid,
                                              double target_gap_sq,
                                              const lattice::ModelParams& base,
                                              const BisectionOptions& opt = {}) {
  if (!(target_gap_sq > 0.0)) throw ValidationError("critical_curve: target_gap_sq must be > 0");
  base.validate();
  const HamiltonianTerms terms(base);
  std::vector<CurvePoint> out;
  out.reserve(lambda_grid.size());
  for (double lam : lambda_grid) {
    CurvePoint cp;
    cp.lambda = lam;
    try {
      cp.delta_m = solve_counterterm(terms, lam, target_gap_sq, opt);
      cp.m0_sq = base.m_sq + cp.delta_m;
      cp.ok = true;
    } catch (const NumericalError& e) {
      cp.error = e.what();
    }
    out.push_back(std::move(cp));
  }
  return out;
}

struct GapPoint {
  double lambda = 0.0;
  double gap = 0.0;
};

struct CriticalFit {
  double lambda_c = 0.0;
  double nu = 0.0;
  double amplitude = 0.0;
  double residual = 0.0;  // RMS of gap residuals
  std::pair<double, double> window{0.0, 0.0};
  std::vector<GapPoint> slopes;  // d(gap)/d(lambda) at interval midpoints
  int iterations = 0;
  bool converged = false;
};

/// Finite-difference slopes between consecutive points (sorted by lambda).
inline std::vector<GapPoint> slope_series(std::vector<GapPoint> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const GapPoint& a, const GapPoint& b) { return a.lambda < b.lambda; });
  std::vector<GapPoint> s;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double dl = pts[i + 1].lambda - pts[i].lambda;
    if (dl <= 0.0) continue;
    s.push_back({0.5 * (pts[i].lambda + pts[i + 1].lambda), (pts[i + 1].gap - pts[i].gap) / dl});
  }
  return s;
}

/// Picks the near-critical window from a gap-vs-lambda sweep: starting at
/// the gap minimum, skip the finite-size rounding region until the local
/// slope first reaches `plateau_fraction` of its maximum, then take the next
/// `count` points (the `count` smallest gaps of the linear regime).
inline std::vector<GapPoint> select_precritical_window(std::vector<GapPoint> pts,
                                                       std::size_t count = 6,
                                                       double plateau_fraction = 0.9) {
  std::sort(pts.begin(), pts.end(),
            [](const GapPoint& a, const GapPoint& b) { return a.lambda < b.lambda; });
  if (pts.size() < count + 1)
    throw ValidationError("select_precritical_window: not enough points");
  const auto imin = static_cast<std::size_t>(
      std::min_element(pts.begin(), pts.end(),
                       [](const GapPoint& a, const GapPoint& b) { return a.gap < b.gap; }) -
      pts.begin());
  std::vector<double> slope;
  for (std::size_t i = imin; i + 1 < pts.size(); ++i)
    slope.push_back((pts[i + 1].gap - pts[i].gap) / (pts[i + 1].lambda - pts[i].lambda));
  if (slope.empty()) throw ValidationError("select_precritical_window: gap minimum at grid end");
  const double smax = *std::max_element(slope.begin(), slope.end());
  std::size_t start = imin;
  for (std::size_t j = 0; j < slope.size(); ++j) {
    if (slope[j] >= plateau_fraction * smax) {
      start = imin + j;
      break;
    }
  }
  if (start + count > pts.size()) start = pts.size() - count;
  return {pts.begin() + static_cast<std::ptrdiff_t>(start),
          pts.begin() + static_cast<std::ptrdiff_t>(start + count)};
}

/// Least-squares fit of gap = A (lambda - lambda_c)^nu over points that lie
/// above lambda_c (Levenberg-Marquardt on (A, lambda_c, nu), seeded by a
/// straight-line fit).
inline CriticalFit critical_exponent_fit(std::vector<GapPoint> pts, int max_iter = 500) {
  if (pts.size() < 4) throw ValidationError("critical_exponent_fit: need at least 4 points");
  std::sort(pts.begin(), pts.end(),
            [](const GapPoint& a, const GapPoint& b) { return a.lambda < b.lambda; });
  for (const auto& p : pts)
    if (!(p.gap > 0.0)) throw ValidationError("critical_exponent_fit: gaps must be > 0");
  const auto [gmin, gmax] = std::minmax_element(
      pts.begin(), pts.end(), [](const GapPoint& a, const GapPoint& b) { return a.gap < b.gap; });
  if (gmax->gap - gmin->gap <= 1e-14 * std::max(1.0, gmax->gap))
    throw ValidationError("critical_exponent_fit: degenerate data (all gaps equal)");

  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd lam(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lam(i) = pts[static_cast<std::size_t>(i)].lambda;
    y(i) = pts[static_cast<std::size_t>(i)].gap;
  }
  const double lam_min = lam.minCoeff();
  const double span = lam.maxCoeff() - lam_min;

  // Straight-line seed.
  Eigen::MatrixXd design(n, 2);
  design.col(0) = lam;
  design.col(1).setOnes();
  const Eigen::Vector2d line = design.colPivHouseholderQr().solve(y);
  double amp = line(0);
  double lc = amp != 0.0 ? -line(1) / amp : lam_min - 0.1 * span;
  if (!(lc < lam_min)) lc = lam_min - 0.1 * std::max(span, 1e-3);
  if (!(amp > 0.0)) amp = y.maxCoeff() / std::max(lam.maxCoeff() - lc, 1e-12);
  double nu = 1.0;

  auto residuals = [&](double A, double c, double v, Eigen::VectorXd& r) {
    r.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) r(i) = A * std::pow(lam(i) - c, v) - y(i);
    return r.squaredNorm();
  };

  Eigen::VectorXd r;
  double cost = residuals(amp, lc, nu, r);
  double mu = 1e-3;
  int it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    Eigen::MatrixXd J(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = lam(i) - lc;
      const double dv = std::pow(d, nu);
      J(i, 0) = dv;
      J(i, 1) = -amp * nu * dv / d;
      J(i, 2) = amp * dv * std::log(d);
    }
    const Eigen::Matrix3d JtJ = J.transpose() * J;
    const Eigen::Vector3d g = J.transpose() * r;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      Eigen::Matrix3d A = JtJ;
      A.diagonal() += mu * JtJ.diagonal().cwiseMax(1e-12);
      const Eigen::Vector3d step = A.ldlt().solve(-g);
      const double na = amp + step(0), nc = lc + step(1), nn = nu + step(2);
      if (nc < lam_min && nn > 0.0 && std::isfinite(na)) {
        Eigen::VectorXd rn;
        const double c2 = residuals(na, nc, nn, rn);
        if (c2 < cost) {
          const double rel = (cost - c2) / std::max(cost, 1e-300);
          amp = na;
          lc = nc;
          nu = nn;
          r = rn;
          cost = c2;
          mu = std::max(mu * 0.3, 1e-12);
          accepted = true;
          if (rel < 1e-14 || step.norm() < 1e-12) converged = true;
          break;
        }
      }
      mu *= 10.0;
    }
    if (!accepted) {
      converged = true;  // no downhill step left
      break;
    }
    if (converged) break;
  }

  CriticalFit fit;
  fit.lambda_c = lc;
  fit.nu = nu;
  fit.amplitude = amp;
  fit.residual = std::sqrt(cost / static_cast<double>(n));
  fit.window = {lam_min, lam.maxCoeff()};
  fit.slopes = slope_series(pts);
  fit.iterations = it;
  fit.converged = converged;
  return fit;
}

}  // namespace phi4q::fock
