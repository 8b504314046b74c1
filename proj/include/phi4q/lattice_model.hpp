#pragma once

// Closed-form lattice quantities for the 1+1D phi^4 theory on a periodic
// chain with unit lattice spacing: the momentum grid, the free dispersion
// relation, and the mass counter term at first order in the coupling.

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "phi4q/errors.hpp"

namespace phi4q::lattice {

/// Physics configuration of one model point.
///
/// The Hamiltonian is split as H = H0(m_sq) + H_I(delta_m, lambda), where
/// m_sq is the reference mass of the oscillator basis and the bare mass is
/// m0_sq = m_sq + delta_m.
struct ModelParams {
  int L = 2;             ///< lattice sites
  double m_sq = 1.0;     ///< reference mass squared, > 0
  double lambda = 0.0;   ///< quartic coupling, >= 0 for physical runs
  double delta_m = 0.0;  ///< mass counter term
  int n_max = 4;         ///< per-mode Fock cutoff (matrix dimension)

  [[nodiscard]] double m0_sq() const { return m_sq + delta_m; }

  static ModelParams from_bare_mass(int L, double m_sq, double m0_sq, double lambda,
                                    int n_max) {
    return ModelParams{L, m_sq, lambda, m0_sq - m_sq, n_max};
  }

  [[nodiscard]] ModelParams with_lambda(double lam) const {
    ModelParams p = *this;
    p.lambda = lam;
    return p;
  }
  [[nodiscard]] ModelParams with_delta_m(double d) const {
    ModelParams p = *this;
    p.delta_m = d;
    return p;
  }
  [[nodiscard]] ModelParams with_n_max(int n) const {
    ModelParams p = *this;
    p.n_max = n;
    return p;
  }

  /// Dimension of the full truncated Hilbert space, n_max^L.
  [[nodiscard]] std::size_t hilbert_dim() const {
    std::size_t d = 1;
    for (int i = 0; i < L; ++i) d *= static_cast<std::size_t>(n_max);
    return d;
  }

  void validate() const {
    if (L < 1) throw ValidationError("ModelParams: L must be >= 1");
    if (!(m_sq > 0.0) || !std::isfinite(m_sq))
      throw ValidationError("ModelParams: m_sq must be > 0");
    if (n_max < 2) throw ValidationError("ModelParams: n_max must be >= 2");
    if (!std::isfinite(lambda) || !std::isfinite(delta_m))
      throw ValidationError("ModelParams: lambda and delta_m must be finite");
  }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// omega(k) = sqrt(m_sq + 4 sin^2(k/2)).
inline double dispersion(double k, double m_sq) {
  const double s = std::sin(0.5 * k);
  const double radicand = m_sq + 4.0 * s * s;
  if (!(radicand >= 0.0)) {
    std::ostringstream os;
    os << "dispersion: negative radicand " << radicand << " at k=" << k
       << " (unphysical reference mass m_sq=" << m_sq << ")";
    throw ValidationError(os.str());
  }
  return std::sqrt(radicand);
}

struct MomentumGrid {
  std::vector<double> momenta;      // 2 pi j / L, j = 0..L-1
  std::vector<double> frequencies;  // omega(k)

  [[nodiscard]] std::size_t size() const { return momenta.size(); }
};

inline MomentumGrid momentum_grid(int L, double m_sq) {
  if (L < 1) throw ValidationError("momentum_grid: L must be >= 1");
  if (!(m_sq > 0.0)) throw ValidationError("momentum_grid: m_sq must be > 0");
  MomentumGrid g;
  g.momenta.reserve(static_cast<std::size_t>(L));
  g.frequencies.reserve(static_cast<std::size_t>(L));
  for (int j = 0; j < L; ++j) {
    const double k = 2.0 * std::numbers::pi * j / L;
    g.momenta.push_back(k);
    g.frequencies.push_back(dispersion(k, m_sq));
  }
  return g;
}

inline MomentumGrid momentum_grid(const ModelParams& p) { return momentum_grid(p.L, p.m_sq); }

/// delta_m = -(lambda / 4L) sum_k 1/omega(k); makes the first-order gap
/// correction vanish.
inline double counterterm_first_order(int L, double m_sq, double lambda) {
  const MomentumGrid g = momentum_grid(L, m_sq);
  double sum = 0.0;
  for (double w : g.frequencies) sum += 1.0 / w;
  return -lambda / (4.0 * L) * sum;
}

inline double counterterm_first_order(const ModelParams& p) {
  return counterterm_first_order(p.L, p.m_sq, p.lambda);
}

/// Small-mass continuum form, -(lambda / 8 pi) log(64 / m_sq). Only defined
/// for 0 < m_sq <= 64.
inline double counterterm_continuum(double m_sq, double lambda) {
  if (!(m_sq > 0.0)) throw ValidationError("counterterm_continuum: m_sq must be > 0");
  if (m_sq > 64.0)
    throw ValidationError("counterterm_continuum: m_sq must be <= 64 (outside the expansion)");
  return -lambda / (8.0 * std::numbers::pi) * std::log(64.0 / m_sq);
}

inline double delta_from_masses(double m0_sq, double m_sq) {
  if (!(m_sq > 0.0)) throw ValidationError("delta_from_masses: m_sq must be > 0");
  return m0_sq - m_sq;
}

}  // namespace phi4q::lattice
