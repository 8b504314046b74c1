#pragma once

// Binary matrix-element encoding of truncated-Fock operators into Pauli sums,
// and the parity-sector reduction of the lattice Hamiltonian.
//
// Conventions: qubit 0 is the leftmost label of a Pauli word and the most
// significant bit of a matrix index. Fock level |i> of a mode maps to the
// big-endian binary expansion of i.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "phi4q/errors.hpp"
#include "phi4q/fock_space.hpp"
#include "phi4q/lattice_model.hpp"

namespace phi4q::encoding {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline constexpr double kCoefficientCutoff = 1e-12;

/// Tensor product of single-qubit Paulis, stored as a label string over
/// {I, X, Y, Z}.
class PauliWord {
 public:
  PauliWord() = default;
  explicit PauliWord(std::string labels) : labels_(std::move(labels)) {
    for (char c : labels_)
      if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z')
        throw ValidationError("PauliWord: invalid label '" + std::string(1, c) + "'");
  }
  static PauliWord identity(int n) { return PauliWord(std::string(static_cast<std::size_t>(n), 'I')); }

  [[nodiscard]] int size() const { return static_cast<int>(labels_.size()); }
  [[nodiscard]] char operator[](int q) const { return labels_[static_cast<std::size_t>(q)]; }
  [[nodiscard]] const std::string& str() const { return labels_; }

  /// Qubits with a non-identity label, ascending.
  [[nodiscard]] std::vector<int> support() const {
    std::vector<int> s;
    for (int q = 0; q < size(); ++q)
      if (labels_[static_cast<std::size_t>(q)] != 'I') s.push_back(q);
    return s;
  }
  [[nodiscard]] bool is_identity() const { return support().empty(); }

  /// word |col> = phase |row>; returns (row, phase).
  [[nodiscard]] std::pair<std::uint64_t, cplx> apply(std::uint64_t col) const {
    const int n = size();
    std::uint64_t row = col;
    cplx phase{1.0, 0.0};
    for (int q = 0; q < n; ++q) {
      const int shift = n - 1 - q;
      const bool bit = (col >> shift) & 1U;
      switch (labels_[static_cast<std::size_t>(q)]) {
        case 'X':
          row ^= (std::uint64_t{1} << shift);
          break;
        case 'Y':
          row ^= (std::uint64_t{1} << shift);
          phase *= bit ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
          break;
        case 'Z':
          if (bit) phase = -phase;
          break;
        default:
          break;
      }
    }
    return {row, phase};
  }

  [[nodiscard]] Matrix to_matrix() const {
    const auto dim = std::uint64_t{1} << size();
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::uint64_t c = 0; c < dim; ++c) {
      const auto [r, ph] = apply(c);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ph;
    }
    return m;
  }

  friend bool operator==(const PauliWord&, const PauliWord&) = default;
  friend auto operator<=>(const PauliWord&, const PauliWord&) = default;

 private:
  std::string labels_;
};

struct PauliTerm {
  cplx coefficient;
  PauliWord word;
};

/// Weighted sum of Pauli words on a fixed number of qubits.
class PauliSum {
 public:
  PauliSum() = default;
  explicit PauliSum(int qubit_count) : qubits_(qubit_count) {}

  [[nodiscard]] int qubit_count() const { return qubits_; }
  [[nodiscard]] const std::vector<PauliTerm>& terms() const { return terms_; }
  [[nodiscard]] std::size_t size() const { return terms_.size(); }

  void add(cplx coefficient, const PauliWord& word) {
    if (word.size() != qubits_)
      throw ValidationError("PauliSum: word " + word.str() + " does not act on " +
                            std::to_string(qubits_) + " qubits");
    terms_.push_back({coefficient, word});
  }
  void add(cplx coefficient, const std::string& labels) { add(coefficient, PauliWord(labels)); }

  /// Merge duplicate words and drop coefficients below the cutoff. Terms
  /// come out sorted by word.
  PauliSum& simplify(double cutoff = kCoefficientCutoff) {
    std::map<PauliWord, cplx> acc;
    for (const auto& t : terms_) acc[t.word] += t.coefficient;
    terms_.clear();
    for (const auto& [w, c] : acc)
      if (std::abs(c) >= cutoff) terms_.push_back({c, w});
    return *this;
  }

  [[nodiscard]] double max_imag() const {
    double m = 0.0;
    for (const auto& t : terms_) m = std::max(m, std::abs(t.coefficient.imag()));
    return m;
  }

  /// Coefficient of the all-identity word.
  [[nodiscard]] cplx identity_coefficient() const {
    cplx c{0.0, 0.0};
    for (const auto& t : terms_)
      if (t.word.is_identity()) c += t.coefficient;
    return c;
  }

  [[nodiscard]] Matrix to_matrix() const {
    const auto dim = static_cast<Eigen::Index>(std::uint64_t{1} << qubits_);
    Matrix m = Matrix::Zero(dim, dim);
    for (const auto& t : terms_) {
      for (std::uint64_t c = 0; c < static_cast<std::uint64_t>(dim); ++c) {
        const auto [r, ph] = t.word.apply(c);
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += t.coefficient * ph;
      }
    }
    return m;
  }

 private:
  int qubits_ = 0;
  std::vector<PauliTerm> terms_;
};

/// c_w = Tr(w M) / 2^n for every word w; the result reconstructs M exactly.
inline PauliSum encode_matrix(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw ValidationError("encode_matrix: matrix must be square and non-empty");
  const auto dim = static_cast<std::uint64_t>(m.rows());
  if ((dim & (dim - 1)) != 0)
    throw ValidationError("encode_matrix: dimension " + std::to_string(dim) +
                          " is not a power of two");
  const int nq = std::countr_zero(dim);
  PauliSum out(nq);
  static constexpr char kLabels[4] = {'I', 'X', 'Y', 'Z'};
  const std::uint64_t words = std::uint64_t{1} << (2 * nq);
  std::string labels(static_cast<std::size_t>(nq), 'I');
  for (std::uint64_t code = 0; code < words; ++code) {
    for (int q = 0; q < nq; ++q)
      labels[static_cast<std::size_t>(q)] = kLabels[(code >> (2 * (nq - 1 - q))) & 3U];
    const PauliWord w(labels);
    // Tr(w M) = sum_c <c| w M |c> = sum_d phase(d) M(d, d ^ xmask) with w|d> = phase|row(d)>
    cplx tr{0.0, 0.0};
    for (std::uint64_t d = 0; d < dim; ++d) {
      const auto [r, ph] = w.apply(d);
      tr += ph * m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r));
    }
    const cplx c = tr / static_cast<double>(dim);
    if (std::abs(c) >= kCoefficientCutoff) out.add(c, w);
  }
  return out;
}

/// Occupancy <-> big-endian bitstring for a mode truncated to n_max levels.
class BinaryIndexMap {
 public:
  explicit BinaryIndexMap(int n_max) : n_max_(n_max) {
    if (!lattice::is_power_of_two(n_max) || n_max < 2)
      throw ValidationError("binary_index_map: n_max=" + std::to_string(n_max) +
                            " is not a power of two >= 2");
    bits_ = std::countr_zero(static_cast<unsigned>(n_max));
  }
  [[nodiscard]] int bits() const { return bits_; }
  [[nodiscard]] int levels() const { return n_max_; }

  [[nodiscard]] std::string to_bits(int occupancy) const {
    if (occupancy < 0 || occupancy >= n_max_)
      throw ValidationError("binary_index_map: occupancy out of range");
    std::string s(static_cast<std::size_t>(bits_), '0');
    for (int b = 0; b < bits_; ++b)
      if ((occupancy >> (bits_ - 1 - b)) & 1) s[static_cast<std::size_t>(b)] = '1';
    return s;
  }
  [[nodiscard]] int to_occupancy(const std::string& bits) const {
    if (static_cast<int>(bits.size()) != bits_)
      throw ValidationError("binary_index_map: bitstring has wrong length");
    int v = 0;
    for (char c : bits) {
      if (c != '0' && c != '1') throw ValidationError("binary_index_map: invalid bit");
      v = (v << 1) | (c == '1');
    }
    return v;
  }

 private:
  int n_max_;
  int bits_ = 0;
};

inline BinaryIndexMap binary_index_map(int n_max) { return BinaryIndexMap(n_max); }

/// L log2(n_max) qubits unblocked, L log2(n_max / 2) per parity sector.
inline int qubit_count(int L, int n_max, bool parity_sector = false) {
  if (!lattice::is_power_of_two(n_max))
    throw ValidationError("qubit_count: n_max must be a power of two");
  const int per_mode = std::countr_zero(static_cast<unsigned>(n_max));
  return L * (parity_sector ? per_mode - 1 : per_mode);
}

/// Encode a whole lattice operator (binary encoding, mode 0 leftmost).
inline PauliSum encode_operator(const fock::LatticeOperator& op) {
  for (int d : op.mode_dims)
    if (!lattice::is_power_of_two(d))
      throw ValidationError("encode_operator: mode dimension must be a power of two");
  return encode_matrix(op.entries);
}

/// Parity label per mode: +1 keeps even occupancies, -1 keeps odd.
struct SectorHamiltonian {
  std::vector<int> parities;
  Matrix block;
  PauliSum pauli;
  std::vector<std::vector<int>> basis_map;  // retained occupancy tuples, block order

  [[nodiscard]] std::string label() const {
    std::string s;
    for (int p : parities) s += p > 0 ? '+' : '-';
    return s;
  }
};

inline std::vector<int> parse_parity_label(const std::string& s) {
  std::vector<int> p;
  for (char c : s) {
    if (c == '+') p.push_back(1);
    else if (c == '-') p.push_back(-1);
    else throw ValidationError("invalid parity label '" + s + "'");
  }
  return p;
}

/// Largest |H_ij| between Fock states of different mode-parity patterns.
inline double parity_violation(const Matrix& h, int L, int n_max) {
  const Eigen::Index dim = h.rows();
  std::vector<unsigned> pattern(static_cast<std::size_t>(dim));
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    Eigen::Index rest = idx;
    unsigned pat = 0;
    for (int k = L - 1; k >= 0; --k) {
      if ((rest % n_max) % 2 == 1) pat |= 1U << k;
      rest /= n_max;
    }
    pattern[static_cast<std::size_t>(idx)] = pat;
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      if (pattern[static_cast<std::size_t>(i)] != pattern[static_cast<std::size_t>(j)])
        worst = std::max(worst, std::abs(h(i, j)));
  return worst;
}

/// Restrict H to one parity sector.
inline SectorHamiltonian parity_sector(const fock::LatticeOperator& h,
                                       const lattice::ModelParams& params,
                                       const std::vector<int>& parities) {
  const int L = params.L, n = params.n_max;
  if (static_cast<int>(parities.size()) != L)
    throw ValidationError("parity_sector: need one parity label per mode");
  if (n % 2 != 0) throw ValidationError("parity_sector: n_max must be even");
  if (h.dim() != static_cast<Eigen::Index>(params.hilbert_dim()))
    throw ValidationError("parity_sector: operator dimension does not match params");

  SectorHamiltonian s;
  s.parities = parities;
  // Cartesian product of per-mode occupancies, mode 0 slowest.
  std::vector<std::vector<int>> tuples{{}};
  for (int k = 0; k < L; ++k) {
    const int first = parities[static_cast<std::size_t>(k)] > 0 ? 0 : 1;
    std::vector<std::vector<int>> next;
    for (const auto& t : tuples)
      for (int occ = first; occ < n; occ += 2) {
        auto u = t;
        u.push_back(occ);
        next.push_back(std::move(u));
      }
    tuples = std::move(next);
  }
  s.basis_map = tuples;
  std::vector<Eigen::Index> idx;
  for (const auto& t : tuples) {
    Eigen::Index v = 0;
    for (int occ : t) v = v * n + occ;
    idx.push_back(v);
  }
  const auto d = static_cast<Eigen::Index>(idx.size());
  s.block.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      s.block(i, j) = h.entries(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  if ((static_cast<std::uint64_t>(d) & (static_cast<std::uint64_t>(d) - 1)) == 0) {
    s.pauli = encode_matrix(s.block);
  }
  return s;
}

/// All 2^L sectors, in binary order of the labels with '+' < '-'
/// (mode 0 slowest): ++, +-, -+, -- for L = 2.
inline std::vector<SectorHamiltonian> parity_blocks(const fock::LatticeOperator& h,
                                                    const lattice::ModelParams& params) {
  params.validate();
  if (params.n_max % 2 != 0) throw ValidationError("parity_blocks: n_max must be even");
  const double tol = 1e-10 * std::max(1.0, fock::max_abs(h.entries));
  const double v = parity_violation(h.entries, params.L, params.n_max);
  if (v > tol) {
    std::ostringstream os;
    os << "parity_blocks: operator does not commute with the mode parities (max coupling " << v
       << ")";
    throw SymmetryError(os.str());
  }
  std::vector<SectorHamiltonian> out;
  const unsigned count = 1U << params.L;
  for (unsigned code = 0; code < count; ++code) {
    std::vector<int> par;
    for (int k = 0; k < params.L; ++k) par.push_back(((code >> (params.L - 1 - k)) & 1U) ? -1 : 1);
    out.push_back(parity_sector(h, params, par));
  }
  return out;
}

// Text form: one "coefficient labels" line per term. Real coefficients are
// written as plain numbers; complex ones as "(re,im)".

inline void write_pauli_sum(std::ostream& os, const PauliSum& p) {
  std::ostringstream line;
  line.precision(17);
  for (const auto& t : p.terms()) {
    line.str("");
    if (t.coefficient.imag() == 0.0)
      line << t.coefficient.real();
    else
      line << '(' << t.coefficient.real() << ',' << t.coefficient.imag() << ')';
    os << line.str() << ' ' << (t.word.size() == 0 ? std::string("-") : t.word.str()) << '\n';
  }
}

inline std::string to_text(const PauliSum& p) {
  std::ostringstream os;
  write_pauli_sum(os, p);
  return os.str();
}

inline PauliSum read_pauli_sum(std::istream& is) {
  PauliSum out;
  bool first = true;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string coeff, labels;
    if (!(ls >> coeff >> labels))
      throw ValidationError("pauli text line " + std::to_string(lineno) + ": expected 2 fields");
    if (labels == "-") labels.clear();
    cplx c;
    if (!coeff.empty() && coeff.front() == '(') {
      std::istringstream cs(coeff);
      if (!(cs >> c)) throw ValidationError("pauli text line " + std::to_string(lineno) + ": bad coefficient");
    } else {
      double re = 0.0;
      const auto res = std::from_chars(coeff.data(), coeff.data() + coeff.size(), re);
      if (res.ec != std::errc() || res.ptr != coeff.data() + coeff.size())
        throw ValidationError("pauli text line " + std::to_string(lineno) + ": bad coefficient");
      c = re;
    }
    if (first) {
      out = PauliSum(static_cast<int>(labels.size()));
      first = false;
    }
    out.add(c, PauliWord(labels));
  }
  return out;
}

inline PauliSum from_text(const std::string& s) {
  std::istringstream is(s);
  return read_pauli_sum(is);
}

}  // namespace phi4q::encoding
