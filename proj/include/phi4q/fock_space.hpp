#pragma once

// Truncated-Fock operator algebra on the L momentum modes and the dense
// exact-diagonalization oracle.
//
// Each mode is truncated to n_max levels before any product is formed, so
// q^2, q^4 and phi^4 are matrix products inside the truncated space. The
// product basis orders modes as in the momentum grid, mode 0 being the
// slowest-varying index.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "phi4q/errors.hpp"
#include "phi4q/lattice_model.hpp"

namespace phi4q::fock {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Operator on a single truncated mode.
struct ModeMatrix {
  Matrix entries;
  [[nodiscard]] int dim() const { return static_cast<int>(entries.rows()); }
};

/// Operator on the tensor product of all L truncated modes.
struct LatticeOperator {
  std::vector<int> mode_dims;
  Matrix entries;

  [[nodiscard]] Eigen::Index dim() const { return entries.rows(); }

  LatticeOperator& operator+=(const LatticeOperator& o) {
    entries += o.entries;
    return *this;
  }
  friend LatticeOperator operator+(LatticeOperator a, const LatticeOperator& b) {
    a += b;
    return a;
  }
  friend LatticeOperator operator*(const LatticeOperator& a, const LatticeOperator& b) {
    return {a.mode_dims, a.entries * b.entries};
  }
  friend LatticeOperator operator*(double s, LatticeOperator a) {
    a.entries *= s;
    return a;
  }
};

/// max |M - M^dagger|
inline double hermiticity_defect(const Matrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Returns (a, a_dagger) truncated to n_max levels: a_dagger[i+1, i] = sqrt(i+1).
inline std::pair<ModeMatrix, ModeMatrix> ladder_ops(int n_max) {
  if (n_max < 2) throw ValidationError("ladder_ops: n_max must be >= 2");
  Matrix adag = Matrix::Zero(n_max, n_max);
  for (int i = 0; i + 1 < n_max; ++i) adag(i + 1, i) = std::sqrt(static_cast<double>(i + 1));
  Matrix a = adag.adjoint();
  return {ModeMatrix{std::move(a)}, ModeMatrix{std::move(adag)}};
}

inline ModeMatrix number_op(int n_max) {
  auto [a, adag] = ladder_ops(n_max);
  return {adag.entries * a.entries};
}

/// q = (a + a_dagger) / sqrt(2)
inline ModeMatrix quadrature(int n_max) {
  auto [a, adag] = ladder_ops(n_max);
  return {(a.entries + adag.entries) / std::sqrt(2.0)};
}

inline ModeMatrix mode_identity(int n_max) {
  if (n_max < 1) throw ValidationError("mode_identity: n_max must be >= 1");
  return {Matrix::Identity(n_max, n_max)};
}

/// Parity (-1)^n on one mode.
inline ModeMatrix mode_parity(int n_max) {
  Matrix p = Matrix::Zero(n_max, n_max);
  for (int i = 0; i < n_max; ++i) p(i, i) = (i % 2 == 0) ? 1.0 : -1.0;
  return {std::move(p)};
}

namespace detail {
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}
}  // namespace detail

/// I x ... x mode_op x ... x I with mode_op in slot mode_index.
inline LatticeOperator embed(const ModeMatrix& mode_op, int mode_index, int L) {
  if (mode_index < 0 || mode_index >= L)
    throw ValidationError("embed: mode index " + std::to_string(mode_index) +
                          " out of range for L=" + std::to_string(L));
  const int n = mode_op.dim();
  Eigen::Index before = 1, after = 1;
  for (int i = 0; i < mode_index; ++i) before *= n;
  for (int i = mode_index + 1; i < L; ++i) after *= n;
  Matrix out = detail::kron(Matrix::Identity(before, before), mode_op.entries);
  out = detail::kron(out, Matrix::Identity(after, after));
  return {std::vector<int>(static_cast<std::size_t>(L), n), std::move(out)};
}

inline LatticeOperator embed(const ModeMatrix& mode_op, int mode_index,
                             const lattice::ModelParams& params) {
  if (mode_op.dim() != params.n_max)
    throw ValidationError("embed: mode operator dimension does not match n_max");
  return embed(mode_op, mode_index, params.L);
}

/// H0 = sum_k omega(k) n(k); diagonal, zero-point energy dropped.
inline LatticeOperator build_H0(const lattice::ModelParams& params) {
  params.validate();
  const auto grid = lattice::momentum_grid(params);
  const auto dim = static_cast<Eigen::Index>(params.hilbert_dim());
  Vector diag = Vector::Zero(dim);
  // Occupancy of mode k in basis index idx is digit k of idx in base n_max,
  // most significant first.
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    Eigen::Index rest = idx;
    double e = 0.0;
    for (int k = params.L - 1; k >= 0; --k) {
      e += grid.frequencies[static_cast<std::size_t>(k)] * static_cast<double>(rest % params.n_max);
      rest /= params.n_max;
    }
    diag(idx) = e;
  }
  return {std::vector<int>(static_cast<std::size_t>(params.L), params.n_max), diag.asDiagonal()};
}

/// (phi(x), pi(x)) from the plane-wave expansion over the momentum grid.
inline std::pair<LatticeOperator, LatticeOperator> build_field(int x,
                                                               const lattice::ModelParams& params) {
  params.validate();
  if (x < 0 || x >= params.L)
    throw ValidationError("build_field: site " + std::to_string(x) + " out of range for L=" +
                          std::to_string(params.L));
  const auto grid = lattice::momentum_grid(params);
  const auto [a, adag] = ladder_ops(params.n_max);
  const auto dim = static_cast<Eigen::Index>(params.hilbert_dim());
  Matrix phi = Matrix::Zero(dim, dim);
  Matrix pi = Matrix::Zero(dim, dim);
  const double inv_sqrt_l = 1.0 / std::sqrt(static_cast<double>(params.L));
  const cplx I(0.0, 1.0);
  for (int k = 0; k < params.L; ++k) {
    const double kk = grid.momenta[static_cast<std::size_t>(k)];
    const double w = grid.frequencies[static_cast<std::size_t>(k)];
    const cplx phase = std::exp(I * (kk * x));  // e^{ikx}
    const Matrix up = embed(adag, k, params.L).entries * std::conj(phase);
    const Matrix down = embed(a, k, params.L).entries * phase;
    phi += (up + down) * (inv_sqrt_l / std::sqrt(2.0 * w));
    pi += (up - down) * (I * inv_sqrt_l * std::sqrt(0.5 * w));
  }
  const std::vector<int> dims(static_cast<std::size_t>(params.L), params.n_max);
  return {LatticeOperator{dims, std::move(phi)}, LatticeOperator{dims, std::move(pi)}};
}

/// The pieces of H that depend linearly on (delta_m, lambda):
///   H = free + delta_m * mass_term + lambda * quartic_term
/// with mass_term = sum_x phi^2/2 and quartic_term = sum_x phi^4/4!.
/// Sweeps over delta_m or lambda at fixed (L, m_sq, n_max) reuse one instance.
struct HamiltonianTerms {
  lattice::ModelParams base;
  LatticeOperator free;
  LatticeOperator mass_term;
  LatticeOperator quartic_term;

  explicit HamiltonianTerms(const lattice::ModelParams& params)
      : base(params), free(build_H0(params)) {
    const std::vector<int> dims(static_cast<std::size_t>(params.L), params.n_max);
    const auto dim = static_cast<Eigen::Index>(params.hilbert_dim());
    Matrix phi2_sum = Matrix::Zero(dim, dim);
    Matrix phi4_sum = Matrix::Zero(dim, dim);
    for (int x = 0; x < params.L; ++x) {
      const Matrix phi = build_field(x, params).first.entries;
      const Matrix phi2 = phi * phi;
      phi2_sum += phi2;
      phi4_sum.noalias() += phi2 * phi2;
    }
    // Products of Hermitian matrices are Hermitian up to rounding.
    phi2_sum = 0.5 * (phi2_sum + phi2_sum.adjoint()).eval();
    phi4_sum = 0.5 * (phi4_sum + phi4_sum.adjoint()).eval();
    mass_term = {dims, 0.5 * phi2_sum};
    quartic_term = {dims, phi4_sum / 24.0};
  }

  [[nodiscard]] LatticeOperator interaction(double delta_m, double lambda) const {
    return {free.mode_dims, delta_m * mass_term.entries + lambda * quartic_term.entries};
  }
  [[nodiscard]] LatticeOperator hamiltonian(double delta_m, double lambda) const {
    return {free.mode_dims,
            free.entries + delta_m * mass_term.entries + lambda * quartic_term.entries};
  }
  [[nodiscard]] LatticeOperator hamiltonian() const {
    return hamiltonian(base.delta_m, base.lambda);
  }
};

/// H_I = sum_x [ (delta_m/2) phi(x)^2 + (lambda/4!) phi(x)^4 ]
inline LatticeOperator build_HI(const lattice::ModelParams& params) {
  return HamiltonianTerms(params).interaction(params.delta_m, params.lambda);
}

inline LatticeOperator build_H(const lattice::ModelParams& params) {
  return HamiltonianTerms(params).hamiltonian();
}

inline constexpr double kDegenerateGap = 1e-12;

struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  double gap = 0.0;                 // E1 - E0, 0 when degenerate
  bool degenerate = false;          // E1 - E0 < 1e-12
};

struct Eigensystem {
  Spectrum spectrum;
  Matrix eigenvectors;  // columns, same order as spectrum.eigenvalues
};

namespace detail {
inline void check_hermitian(const Matrix& h, const char* who) {
  if (h.rows() != h.cols() || h.rows() == 0)
    throw ValidationError(std::string(who) + ": matrix must be square and non-empty");
  const double tol = 1e-10 * std::max(1.0, max_abs(h));
  if (hermiticity_defect(h) > tol)
    throw ValidationError(std::string(who) + ": matrix is not Hermitian");
}

inline Spectrum make_spectrum(const Eigen::VectorXd& evals) {
  Spectrum s;
  s.eigenvalues.assign(evals.data(), evals.data() + evals.size());
  if (evals.size() >= 2) {
    const double g = evals(1) - evals(0);
    s.degenerate = g < kDegenerateGap;
    s.gap = s.degenerate ? 0.0 : g;
  }
  return s;
}
}  // namespace detail

inline Eigensystem exact_eigensystem(const Matrix& h) {
  detail::check_hermitian(h, "exact_eigensystem");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("exact_eigensystem: solver failed");
  return {detail::make_spectrum(solver.eigenvalues()), solver.eigenvectors()};
}

inline Spectrum exact_spectrum(const Matrix& h) {
  detail::check_hermitian(h, "exact_spectrum");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("exact_spectrum: solver failed");
  return detail::make_spectrum(solver.eigenvalues());
}

inline Spectrum exact_spectrum(const LatticeOperator& h) { return exact_spectrum(h.entries); }

inline double mass_gap(const lattice::ModelParams& params) {
  return exact_spectrum(build_H(params)).gap;
}

}  // namespace phi4q::fock
