#pragma once

// Small gate-model simulator for the two variational circuits: statevector
// and density-matrix evolution, Pauli-basis measurement with finite shots,
// readout bit flips and a two-qubit depolarizing channel after each CNOT.
//
// Qubit 0 is the most significant bit of a basis index, matching the Pauli
// word convention of qubit_encoding.hpp.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "phi4q/errors.hpp"
#include "phi4q/qubit_encoding.hpp"

namespace phi4q::sim {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Rng = std::mt19937_64;
using encoding::PauliSum;
using encoding::PauliWord;

enum class GateKind { RotY, CNOT };

struct Gate {
  GateKind kind;
  int q0;            // target of RotY, control of CNOT
  int q1 = -1;       // target of CNOT
  double angle = 0;  // RotY angle
};

struct Circuit {
  int qubit_count = 0;
  std::vector<Gate> gates;

  Circuit& ry(int q, double theta) {
    gates.push_back({GateKind::RotY, q, -1, theta});
    return *this;
  }
  Circuit& cx(int control, int target) {
    gates.push_back({GateKind::CNOT, control, target, 0.0});
    return *this;
  }
  [[nodiscard]] int cnot_count() const {
    int n = 0;
    for (const auto& g : gates) n += g.kind == GateKind::CNOT;
    return n;
  }
  void validate() const {
    if (qubit_count < 1 || qubit_count > 16) throw ValidationError("Circuit: bad qubit count");
    for (const auto& g : gates) {
      if (g.q0 < 0 || g.q0 >= qubit_count)
        throw ValidationError("Circuit: qubit index " + std::to_string(g.q0) + " out of range");
      if (g.kind == GateKind::CNOT &&
          (g.q1 < 0 || g.q1 >= qubit_count || g.q1 == g.q0))
        throw ValidationError("Circuit: bad CNOT target " + std::to_string(g.q1));
      if (g.kind == GateKind::RotY && !std::isfinite(g.angle))
        throw ValidationError("Circuit: non-finite rotation angle");
    }
  }
};

// Text form: "ry q0 1.5708" / "cx q0 q1", one gate per line, preceded by a
// "qubits N" line.
inline void write_circuit(std::ostream& os, const Circuit& c) {
  std::ostringstream line;
  line.precision(17);
  os << "qubits " << c.qubit_count << '\n';
  for (const auto& g : c.gates) {
    line.str("");
    if (g.kind == GateKind::RotY)
      line << "ry q" << g.q0 << ' ' << g.angle;
    else
      line << "cx q" << g.q0 << " q" << g.q1;
    os << line.str() << '\n';
  }
}

inline Circuit read_circuit(std::istream& is) {
  Circuit c;
  std::string line;
  int lineno = 0;
  auto qubit = [&](const std::string& tok) {
    if (tok.size() < 2 || tok[0] != 'q')
      throw ValidationError("circuit line " + std::to_string(lineno) + ": bad qubit '" + tok + "'");
    return std::stoi(tok.substr(1));
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string op;
    if (!(ls >> op) || op[0] == '#') continue;
    if (op == "qubits") {
      ls >> c.qubit_count;
    } else if (op == "ry") {
      std::string q;
      double a = 0.0;
      if (!(ls >> q >> a)) throw ValidationError("circuit line " + std::to_string(lineno) + ": bad ry");
      c.ry(qubit(q), a);
    } else if (op == "cx") {
      std::string a, b;
      if (!(ls >> a >> b)) throw ValidationError("circuit line " + std::to_string(lineno) + ": bad cx");
      c.cx(qubit(a), qubit(b));
    } else {
      throw ValidationError("circuit line " + std::to_string(lineno) + ": unknown gate '" + op + "'");
    }
  }
  c.validate();
  return c;
}

struct StateVector {
  Vector amplitudes;

  static StateVector zero(int n) {
    Vector v = Vector::Zero(Eigen::Index{1} << n);
    v(0) = 1.0;
    return {std::move(v)};
  }
  [[nodiscard]] int qubit_count() const {
    return static_cast<int>(std::countr_zero(static_cast<std::uint64_t>(amplitudes.size())));
  }
};

namespace detail {

inline std::uint64_t bit_of(int n, int q) { return std::uint64_t{1} << (n - 1 - q); }

/// Apply a 2x2 unitary to qubit q of a vector (or each column of a matrix).
template <class Derived>
void apply_1q(Eigen::MatrixBase<Derived>& m, int n, int q, const Eigen::Matrix2cd& u) {
  const std::uint64_t b = bit_of(n, q);
  const auto dim = static_cast<std::uint64_t>(m.rows());
  for (std::uint64_t i = 0; i < dim; ++i) {
    if (i & b) continue;
    const auto i0 = static_cast<Eigen::Index>(i), i1 = static_cast<Eigen::Index>(i | b);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const cplx a0 = m(i0, c), a1 = m(i1, c);
      m(i0, c) = u(0, 0) * a0 + u(0, 1) * a1;
      m(i1, c) = u(1, 0) * a0 + u(1, 1) * a1;
    }
  }
}

template <class Derived>
void apply_cx(Eigen::MatrixBase<Derived>& m, int n, int control, int target) {
  const std::uint64_t cb = bit_of(n, control), tb = bit_of(n, target);
  const auto dim = static_cast<std::uint64_t>(m.rows());
  for (std::uint64_t i = 0; i < dim; ++i)
    if ((i & cb) && !(i & tb)) m.row(static_cast<Eigen::Index>(i)).swap(m.row(static_cast<Eigen::Index>(i | tb)));
}

/// e^{-i theta Y / 2}: RotY(theta)|0> = cos(theta/2)|0> + sin(theta/2)|1>.
inline Eigen::Matrix2cd roty(double theta) {
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  Eigen::Matrix2cd u;
  u << c, -s, s, c;
  return u;
}

template <class Derived>
void apply_gate(Eigen::MatrixBase<Derived>& m, int n, const Gate& g) {
  if (g.kind == GateKind::RotY)
    apply_1q(m, n, g.q0, roty(g.angle));
  else
    apply_cx(m, n, g.q0, g.q1);
}

/// Basis change taking the eigenbasis of a single-qubit Pauli to Z.
inline Eigen::Matrix2cd basis_change(char label) {
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::Matrix2cd u;
  switch (label) {
    case 'X':  // H
      u << r, r, r, -r;
      break;
    case 'Y':  // H S^dagger
      u << r, cplx(0, -r), r, cplx(0, r);
      break;
    default:
      u.setIdentity();
  }
  return u;
}

}  // namespace detail

inline StateVector apply_circuit(const Circuit& c, StateVector state) {
  c.validate();
  if (state.amplitudes.size() != (Eigen::Index{1} << c.qubit_count))
    throw ValidationError("apply_circuit: state dimension does not match circuit");
  for (const auto& g : c.gates) detail::apply_gate(state.amplitudes, c.qubit_count, g);
  return state;
}

inline StateVector apply_circuit(const Circuit& c) {
  return apply_circuit(c, StateVector::zero(c.qubit_count));
}

enum class AnsatzKind { Product, Entangled };

inline const char* to_string(AnsatzKind k) { return k == AnsatzKind::Product ? "product" : "entangled"; }

inline AnsatzKind parse_ansatz(const std::string& s) {
  if (s == "product") return AnsatzKind::Product;
  if (s == "entangled") return AnsatzKind::Entangled;
  throw ValidationError("unknown ansatz '" + s + "'");
}

inline int parameter_count(AnsatzKind k) { return k == AnsatzKind::Product ? 2 : 3; }

/// U_p = RotY_0(theta0) RotY_1(theta1)
inline Circuit ansatz_product(double theta0, double theta1) {
  Circuit c{2, {}};
  c.ry(0, theta0).ry(1, theta1);
  return c;
}

/// U_e = C_0 RotY_1(theta2) U_p, with the controlled rotation expanded as
/// RotY_1(theta2/2) CX_01 RotY_1(-theta2/2) CX_01 (rightmost applied first).
inline Circuit ansatz_entangled(double theta0, double theta1, double theta2) {
  Circuit c = ansatz_product(theta0, theta1);
  c.cx(0, 1).ry(1, -0.5 * theta2).cx(0, 1).ry(1, 0.5 * theta2);
  return c;
}

inline Circuit make_ansatz(AnsatzKind kind, const std::vector<double>& theta) {
  if (static_cast<int>(theta.size()) != parameter_count(kind))
    throw ValidationError(std::string("ansatz ") + to_string(kind) + " takes " +
                          std::to_string(parameter_count(kind)) + " parameters, got " +
                          std::to_string(theta.size()));
  return kind == AnsatzKind::Product ? ansatz_product(theta[0], theta[1])
                                     : ansatz_entangled(theta[0], theta[1], theta[2]);
}

inline double expectation_exact(const StateVector& state, const PauliSum& h) {
  if (state.qubit_count() != h.qubit_count() ||
      state.amplitudes.size() != (Eigen::Index{1} << h.qubit_count()))
    throw ValidationError("expectation_exact: qubit count mismatch");
  cplx acc{0.0, 0.0};
  const Vector& v = state.amplitudes;
  for (const auto& t : h.terms()) {
    cplx term{0.0, 0.0};
    for (std::uint64_t c = 0; c < static_cast<std::uint64_t>(v.size()); ++c) {
      const auto [r, ph] = t.word.apply(c);
      term += std::conj(v(static_cast<Eigen::Index>(r))) * ph * v(static_cast<Eigen::Index>(c));
    }
    acc += t.coefficient * term;
  }
  return acc.real();
}

struct DensityMatrix {
  Matrix entries;

  static DensityMatrix from_state(const StateVector& s) {
    return {s.amplitudes * s.amplitudes.adjoint()};
  }
  [[nodiscard]] int qubit_count() const {
    return static_cast<int>(std::countr_zero(static_cast<std::uint64_t>(entries.rows())));
  }
  [[nodiscard]] double trace() const { return entries.trace().real(); }
  [[nodiscard]] double purity() const { return (entries * entries).trace().real(); }
};

/// Fidelity <psi| rho |psi> against a pure state.
inline double fidelity(const DensityMatrix& rho, const StateVector& psi) {
  return (psi.amplitudes.adjoint() * rho.entries * psi.amplitudes)(0, 0).real();
}

/// P(read 0 | prepared 1) and P(read 1 | prepared 0) for one qubit.
struct ReadoutRates {
  double p0_given_1 = 0.0;
  double p1_given_0 = 0.0;
};

struct NoiseModel {
  std::vector<ReadoutRates> readout;  // per qubit; missing entries are noiseless
  double p_dep = 0.0;                 // two-qubit depolarizing after every CNOT
  std::uint64_t seed = 0;

  static NoiseModel noiseless() { return {}; }
  static NoiseModel uniform(int qubits, double flip_rate, double p_dep, std::uint64_t seed) {
    return {std::vector<ReadoutRates>(static_cast<std::size_t>(qubits), {flip_rate, flip_rate}),
            p_dep, seed};
  }

  [[nodiscard]] ReadoutRates rates(int q) const {
    return q < static_cast<int>(readout.size()) ? readout[static_cast<std::size_t>(q)]
                                                : ReadoutRates{};
  }

  void validate() const {
    auto in01 = [](double p) { return p >= 0.0 && p < 1.0; };
    for (const auto& r : readout) {
      if (!in01(r.p0_given_1) || !in01(r.p1_given_0))
        throw ValidationError("NoiseModel: readout rates must lie in [0, 1)");
      if (!(r.p0_given_1 + r.p1_given_0 < 1.0))
        throw ValidationError("NoiseModel: p(0|1) + p(1|0) must be < 1");
    }
    if (!in01(p_dep)) throw ValidationError("NoiseModel: p_dep must lie in [0, 1)");
  }
};

/// rho -> (1 - p) rho + p (I/4 (x) Tr_{a,b} rho) on qubits (a, b).
inline void depolarize_pair(DensityMatrix& rho, int a, int b, double p) {
  if (p == 0.0) return;
  const int n = rho.qubit_count();
  const std::uint64_t ba = detail::bit_of(n, a), bb = detail::bit_of(n, b);
  const std::uint64_t pair = ba | bb;
  const auto dim = static_cast<std::uint64_t>(rho.entries.rows());
  const std::uint64_t subs[4] = {0, bb, ba, ba | bb};
  Matrix out = (1.0 - p) * rho.entries;
  for (std::uint64_t i = 0; i < dim; ++i) {
    for (std::uint64_t j = 0; j < dim; ++j) {
      if ((i & pair) != (j & pair)) continue;
      const std::uint64_t ir = i & ~pair, jr = j & ~pair;
      cplx tr{0.0, 0.0};
      for (auto s : subs) tr += rho.entries(static_cast<Eigen::Index>(ir | s), static_cast<Eigen::Index>(jr | s));
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 0.25 * p * tr;
    }
  }
  rho.entries = std::move(out);
}

/// Evolve |0...0><0...0| through the circuit, depolarizing after each CNOT.
inline DensityMatrix simulate_density(const Circuit& c, const NoiseModel& noise) {
  c.validate();
  noise.validate();
  const int n = c.qubit_count;
  DensityMatrix rho = DensityMatrix::from_state(StateVector::zero(n));
  for (const auto& g : c.gates) {
    // U rho U^dagger: apply to columns, then to rows via the adjoint.
    detail::apply_gate(rho.entries, n, g);
    Matrix t = rho.entries.adjoint();
    detail::apply_gate(t, n, g);
    rho.entries = t.adjoint();
    if (g.kind == GateKind::CNOT) depolarize_pair(rho, g.q0, g.q1, noise.p_dep);
  }
  return rho;
}

/// Sampled outcomes of one Pauli measurement. Bitstrings cover the measured
/// qubits only, in ascending qubit order; bit '0' is the +1 eigenvalue.
struct Counts {
  std::vector<int> qubits;
  std::map<std::string, std::int64_t> counts;
  std::int64_t shots = 0;

  /// Empirical distribution p(x) = counts / shots.
  [[nodiscard]] std::map<std::string, double> distribution() const {
    std::map<std::string, double> d;
    for (const auto& [k, v] : counts) d[k] = static_cast<double>(v) / static_cast<double>(shots);
    return d;
  }

  /// Raw parity estimate of Z...Z on all measured qubits.
  [[nodiscard]] double parity_expectation() const {
    double acc = 0.0;
    for (const auto& [k, v] : counts) {
      int ones = 0;
      for (char c : k) ones += c == '1';
      acc += (ones % 2 ? -1.0 : 1.0) * static_cast<double>(v);
    }
    return acc / static_cast<double>(shots);
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : counts) j[k] = v;
    return j;
  }
};

/// Outcome distribution over the support of `word` after the basis change,
/// with readout flips folded in. Index bit (m-1-i) is the outcome of the
/// i-th support qubit.
inline std::vector<double> outcome_distribution(const DensityMatrix& rho, const PauliWord& word,
                                                const NoiseModel& noise) {
  const int n = rho.qubit_count();
  if (word.size() != n) throw ValidationError("measure_pauli: word/state qubit count mismatch");
  Matrix r = rho.entries;
  for (int q = 0; q < n; ++q) {
    if (word[q] == 'X' || word[q] == 'Y') {
      const auto u = detail::basis_change(word[q]);
      detail::apply_1q(r, n, q, u);
      Matrix t = r.adjoint();
      detail::apply_1q(t, n, q, u);
      r = t.adjoint();
    }
  }
  const auto support = word.support();
  const int m = static_cast<int>(support.size());
  std::vector<double> probs(std::size_t{1} << m, 0.0);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    std::size_t key = 0;
    for (int s = 0; s < m; ++s)
      if (static_cast<std::uint64_t>(i) & detail::bit_of(n, support[static_cast<std::size_t>(s)]))
        key |= std::size_t{1} << (m - 1 - s);
    probs[key] += std::max(0.0, r(i, i).real());
  }
  // Independent readout flips on each measured qubit.
  for (int s = 0; s < m; ++s) {
    const auto rates = noise.rates(support[static_cast<std::size_t>(s)]);
    const std::size_t b = std::size_t{1} << (m - 1 - s);
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (k & b) continue;
      const double p0 = probs[k], p1 = probs[k | b];
      probs[k] = p0 * (1.0 - rates.p1_given_0) + p1 * rates.p0_given_1;
      probs[k | b] = p1 * (1.0 - rates.p0_given_1) + p0 * rates.p1_given_0;
    }
  }
  double total = 0.0;
  for (double p : probs) total += p;
  if (total > 0.0)
    for (double& p : probs) p /= total;
  return probs;
}

/// Multinomial draw of `shots` outcomes via conditional binomials.
inline std::vector<std::int64_t> sample_multinomial(const std::vector<double>& probs,
                                                    std::int64_t shots, Rng& rng) {
  std::vector<std::int64_t> out(probs.size(), 0);
  std::int64_t remaining = shots;
  double mass = 1.0;
  for (std::size_t i = 0; i + 1 < probs.size() && remaining > 0; ++i) {
    const double p = mass > 0.0 ? std::clamp(probs[i] / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::int64_t> bin(remaining, p);
    out[i] = bin(rng);
    remaining -= out[i];
    mass -= probs[i];
  }
  if (!probs.empty()) out.back() += remaining;
  return out;
}

inline Counts counts_from_samples(const std::vector<int>& support,
                                  const std::vector<std::int64_t>& samples, std::int64_t shots) {
  Counts c;
  c.qubits = support;
  c.shots = shots;
  const int m = static_cast<int>(support.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k] == 0) continue;
    std::string key(static_cast<std::size_t>(m), '0');
    for (int s = 0; s < m; ++s)
      if (k & (std::size_t{1} << (m - 1 - s))) key[static_cast<std::size_t>(s)] = '1';
    c.counts[key] = samples[k];
  }
  return c;
}

/// Rotate each X/Y label to Z, sample `shots` bitstrings from the Born
/// distribution and flip each measured bit with its readout rates. Identity
/// labels are not measured.
inline Counts measure_pauli(const DensityMatrix& rho, const PauliWord& word, std::int64_t shots,
                            const NoiseModel& noise, Rng& rng) {
  if (shots < 1) throw ValidationError("measure_pauli: shots must be >= 1");
  const auto probs = outcome_distribution(rho, word, noise);
  return counts_from_samples(word.support(), sample_multinomial(probs, shots, rng), shots);
}

inline Counts measure_pauli(const StateVector& state, const PauliWord& word, std::int64_t shots,
                            const NoiseModel& noise, Rng& rng) {
  return measure_pauli(DensityMatrix::from_state(state), word, shots, noise, rng);
}

/// Prepare |0> and |1> on `qubit`, measure Z, and return the empirical
/// (p(0|1), p(1|0)).
inline ReadoutRates calibrate_readout(const NoiseModel& noise, int qubit_count, int qubit,
                                      std::int64_t shots, Rng& rng) {
  if (shots < 1) throw ValidationError("calibrate_readout: shots must be >= 1");
  if (qubit < 0 || qubit >= qubit_count) throw ValidationError("calibrate_readout: bad qubit");
  std::string labels(static_cast<std::size_t>(qubit_count), 'I');
  labels[static_cast<std::size_t>(qubit)] = 'Z';
  const PauliWord z(labels);
  Circuit prep0{qubit_count, {}};
  Circuit prep1{qubit_count, {}};
  prep1.ry(qubit, std::numbers::pi);
  const auto c0 = measure_pauli(simulate_density(prep0, noise), z, shots, noise, rng);
  const auto c1 = measure_pauli(simulate_density(prep1, noise), z, shots, noise, rng);
  auto count = [](const Counts& c, const char* k) {
    const auto it = c.counts.find(k);
    return it == c.counts.end() ? std::int64_t{0} : it->second;
  };
  return {static_cast<double>(count(c1, "0")) / static_cast<double>(shots),
          static_cast<double>(count(c0, "1")) / static_cast<double>(shots)};
}

}  // namespace phi4q::sim
