#pragma once

// Two-stage error mitigation: local readout-error inversion of sampled
// Z...Z parities, then two-qubit Pauli tomography followed by McWeeny
// purification of the reconstructed state.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "phi4q/circuit_sim.hpp"
#include "phi4q/errors.hpp"
#include "phi4q/qubit_encoding.hpp"

namespace phi4q::mitigation {

using sim::Counts;
using sim::DensityMatrix;
using sim::NoiseModel;
using sim::ReadoutRates;
using sim::Rng;
using Matrix = Eigen::MatrixXcd;

/// Per-qubit flip-rate estimates with p_minus = p(0|1) - p(1|0) and
/// p_plus = p(0|1) + p(1|0).
struct ReadoutCalibration {
  std::vector<ReadoutRates> rates;

  [[nodiscard]] double p_minus(int q) const { return at(q).p0_given_1 - at(q).p1_given_0; }
  [[nodiscard]] double p_plus(int q) const { return at(q).p0_given_1 + at(q).p1_given_0; }
  [[nodiscard]] bool covers(int q) const { return q >= 0 && q < static_cast<int>(rates.size()); }

  static ReadoutCalibration ideal(int qubits) {
    return {std::vector<ReadoutRates>(static_cast<std::size_t>(qubits))};
  }
  /// Exact rates taken from a noise model (no estimation error).
  static ReadoutCalibration from_noise(const NoiseModel& noise, int qubits) {
    ReadoutCalibration c;
    for (int q = 0; q < qubits; ++q) c.rates.push_back(noise.rates(q));
    return c;
  }

 private:
  [[nodiscard]] const ReadoutRates& at(int q) const {
    if (!covers(q)) throw ValidationError("ReadoutCalibration: qubit " + std::to_string(q) + " not calibrated");
    return rates[static_cast<std::size_t>(q)];
  }
};

/// Run the two preparation circuits on every qubit.
inline ReadoutCalibration calibrate(const NoiseModel& noise, int qubits, std::int64_t shots, Rng& rng) {
  ReadoutCalibration c;
  for (int q = 0; q < qubits; ++q) c.rates.push_back(sim::calibrate_readout(noise, qubits, q, shots, rng));
  return c;
}

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

namespace detail {

inline std::vector<std::size_t> positions(const std::vector<int>& measured, const std::vector<int>& support) {
  std::vector<std::size_t> pos;
  for (int q : support) {
    const auto it = std::find(measured.begin(), measured.end(), q);
    if (it == measured.end())
      throw ValidationError("ro_correct: support qubit " + std::to_string(q) + " was not measured");
    pos.push_back(static_cast<std::size_t>(it - measured.begin()));
  }
  return pos;
}

/// Per-outcome corrected value prod_i ((-1)^{x_i} - p_i^-) / (1 - p_i^+).
struct Corrector {
  std::vector<std::size_t> pos;
  std::vector<double> pm, denom;

  Corrector(const std::vector<int>& measured, const std::vector<int>& support,
            const ReadoutCalibration& cal)
      : pos(positions(measured, support)) {
    for (int q : support) {
      const double d = 1.0 - cal.p_plus(q);
      if (!(d > 0.0))
        throw NumericalError("ro_correct: 1 - p_plus <= 0 for qubit " + std::to_string(q) +
                             " (invalid calibration)");
      pm.push_back(cal.p_minus(q));
      denom.push_back(d);
    }
  }

  [[nodiscard]] double operator()(const std::string& x) const {
    double f = 1.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const double s = x[pos[i]] == '1' ? -1.0 : 1.0;
      f *= (s - pm[i]) / denom[i];
    }
    return f;
  }
};

}  // namespace detail

/// Readout-corrected <Z...Z> over `support` from an outcome distribution p(x)
/// whose bits follow `measured`.
inline double ro_correct(const std::map<std::string, double>& distribution,
                         const std::vector<int>& measured, const std::vector<int>& support,
                         const ReadoutCalibration& cal) {
  const detail::Corrector f(measured, support, cal);
  double acc = 0.0;
  for (const auto& [x, p] : distribution) acc += p * f(x);
  return acc;
}

inline double ro_correct(const Counts& counts, const std::vector<int>& support,
                         const ReadoutCalibration& cal) {
  if (counts.shots < 1) throw ValidationError("ro_correct: empty counts");
  return ro_correct(counts.distribution(), counts.qubits, support, cal);
}

inline double ro_correct(const Counts& counts, const ReadoutCalibration& cal) {
  return ro_correct(counts, counts.qubits, cal);
}

/// Corrected value and its standard error (sample std of the per-shot
/// corrected values over sqrt(shots)).
inline Estimate ro_correct_with_error(const Counts& counts, const std::vector<int>& support,
                                      const ReadoutCalibration& cal) {
  if (counts.shots < 1) throw ValidationError("ro_correct: empty counts");
  const detail::Corrector f(counts.qubits, support, cal);
  const auto n = static_cast<double>(counts.shots);
  double s1 = 0.0, s2 = 0.0;
  for (const auto& [x, c] : counts.counts) {
    const double v = f(x);
    s1 += static_cast<double>(c) * v;
    s2 += static_cast<double>(c) * v * v;
  }
  const double mean = s1 / n;
  const double var = counts.shots > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

/// The 16 two-qubit Pauli words, II first, in row-major {I,X,Y,Z}^2 order.
inline const std::array<encoding::PauliWord, 16>& two_qubit_paulis() {
  static const std::array<encoding::PauliWord, 16> words = [] {
    std::array<encoding::PauliWord, 16> w;
    const char l[4] = {'I', 'X', 'Y', 'Z'};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) w[static_cast<std::size_t>(4 * a + b)] = encoding::PauliWord(std::string{l[a], l[b]});
    return w;
  }();
  return words;
}

/// rho = (1/4) sum_p <p> p, then rho <- (rho + rho^dagger) / 2.
inline DensityMatrix reconstruct_2q(const std::array<double, 16>& expectations) {
  Matrix rho = Matrix::Zero(4, 4);
  const auto& words = two_qubit_paulis();
  for (std::size_t i = 0; i < 16; ++i) rho += expectations[i] * words[i].to_matrix();
  rho /= 4.0;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return {rho};
}

/// Raw and readout-corrected expectations of all 16 words (II fixed at 1).
struct TomographyData {
  std::array<double, 16> raw{};
  std::array<double, 16> corrected{};

  [[nodiscard]] DensityMatrix raw_state() const { return reconstruct_2q(raw); }
  [[nodiscard]] DensityMatrix corrected_state() const { return reconstruct_2q(corrected); }
};

inline TomographyData measure_tomography_2q(const DensityMatrix& rho, const NoiseModel& noise,
                                            std::int64_t shots, const ReadoutCalibration& cal,
                                            Rng& rng) {
  if (rho.qubit_count() != 2) throw ValidationError("tomography_2q: state must have 2 qubits");
  TomographyData data;
  data.raw[0] = data.corrected[0] = 1.0;
  const auto& words = two_qubit_paulis();
  for (std::size_t i = 1; i < 16; ++i) {
    const Counts c = sim::measure_pauli(rho, words[i], shots, noise, rng);
    data.raw[i] = c.parity_expectation();
    data.corrected[i] = ro_correct(c, cal);
  }
  return data;
}

inline DensityMatrix tomography_2q(const sim::Circuit& circuit, const NoiseModel& noise,
                                   std::int64_t shots, const ReadoutCalibration& cal, Rng& rng) {
  if (circuit.qubit_count != 2) throw ValidationError("tomography_2q: circuit must act on 2 qubits");
  return measure_tomography_2q(sim::simulate_density(circuit, noise), noise, shots, cal, rng)
      .corrected_state();
}

struct PurificationReport {
  int iterations = 0;
  double non_idempotency = 0.0;  // Tr(rho^2 - rho) of the returned state
  bool converged = false;
  double initial_purity = 0.0;
  double final_purity = 0.0;
};

inline double non_idempotency(const Matrix& rho) { return (rho * rho - rho).trace().real(); }

/// rho <- 3 rho^2 - 2 rho^3, renormalized to unit trace each step, until
/// |Tr(rho^2 - rho)| < eps. When the dominant eigenvalue starts below 1/2
/// the iteration cannot reach a pure state; the input (trace-normalized) is
/// returned with converged = false.
inline std::pair<DensityMatrix, PurificationReport> mcweeny_purify(const DensityMatrix& input,
                                                                   double eps = 1e-4,
                                                                   int max_iter = 100) {
  const Matrix& in = input.entries;
  if (in.rows() != in.cols() || in.rows() == 0)
    throw ValidationError("mcweeny_purify: matrix must be square");
  if (fock::hermiticity_defect(in) > 1e-8) throw ValidationError("mcweeny_purify: input not Hermitian");
  const double tr0 = in.trace().real();
  if (!(tr0 >= 0.5 && tr0 <= 1.5))
    throw ValidationError("mcweeny_purify: trace " + std::to_string(tr0) + " outside [0.5, 1.5]");

  Matrix rho = in / tr0;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  PurificationReport rep;
  rep.initial_purity = (rho * rho).trace().real();

  Eigen::SelfAdjointEigenSolver<Matrix> es(rho, Eigen::EigenvaluesOnly);
  const double dominant = es.eigenvalues().maxCoeff();
  double n_val = non_idempotency(rho);
  if (dominant < 0.5 && std::abs(n_val) >= eps) {
    rep.non_idempotency = n_val;
    rep.final_purity = rep.initial_purity;
    return {DensityMatrix{rho}, rep};
  }

  int it = 0;
  while (std::abs(n_val) >= eps && it < max_iter) {
    const Matrix r2 = rho * rho;
    rho = 3.0 * r2 - 2.0 * r2 * rho;
    rho /= rho.trace().real();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    n_val = non_idempotency(rho);
    ++it;
  }
  rep.iterations = it;
  rep.non_idempotency = n_val;
  rep.converged = std::abs(n_val) < eps;
  rep.final_purity = (rho * rho).trace().real();
  return {DensityMatrix{rho}, rep};
}

/// Re Tr(rho H).
inline double energy_from_state(const DensityMatrix& rho, const encoding::PauliSum& h) {
  if (rho.entries.rows() != (Eigen::Index{1} << h.qubit_count()))
    throw ValidationError("energy_from_state: dimension mismatch");
  return (rho.entries * h.to_matrix()).trace().real();
}

}  // namespace phi4q::mitigation
