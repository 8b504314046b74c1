#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "phi4q/qubit_encoding.hpp"

using namespace phi4q;
using namespace phi4q::encoding;
using lattice::ModelParams;

namespace {

Matrix random_hermitian(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = cplx(g(rng), g(rng));
  return 0.5 * (m + m.adjoint());
}

cplx coefficient(const PauliSum& p, const std::string& w) {
  for (const auto& t : p.terms())
    if (t.word.str() == w) return t.coefficient;
  return 0.0;
}

std::vector<double> sorted_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(PauliWord, Matrices) {
  const Matrix y = PauliWord("Y").to_matrix();
  EXPECT_EQ(y(0, 1), cplx(0, -1));
  EXPECT_EQ(y(1, 0), cplx(0, 1));
  // Qubit 0 is the most significant bit.
  const Matrix zi = PauliWord("ZI").to_matrix();
  EXPECT_EQ(zi(2, 2), cplx(-1));
  EXPECT_EQ(zi(1, 1), cplx(1));
  EXPECT_EQ(PauliWord("IXIZ").support(), (std::vector<int>{1, 3}));
  EXPECT_THROW(PauliWord("XA"), ValidationError);
}

TEST(Encode, TableMappings) {
  Matrix p0 = Matrix::Zero(2, 2);
  p0(0, 0) = 1.0;
  auto s = encode_matrix(p0);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(coefficient(s, "I"), cplx(0.5));
  EXPECT_EQ(coefficient(s, "Z"), cplx(0.5));

  Matrix lower = Matrix::Zero(2, 2);
  lower(1, 0) = 1.0;
  s = encode_matrix(lower);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(coefficient(s, "X"), cplx(0.5));
  EXPECT_EQ(coefficient(s, "Y"), cplx(0.0, -0.5));

  Matrix n = Matrix::Zero(2, 2);
  n(1, 1) = 1.0;
  s = encode_matrix(n);
  EXPECT_EQ(coefficient(s, "I"), cplx(0.5));
  EXPECT_EQ(coefficient(s, "Z"), cplx(-0.5));
}

TEST(Encode, RoundTripRandomHermitian) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const int nq = 1 + t % 4;
    const Matrix m = random_hermitian(1 << nq, rng);
    const auto p = encode_matrix(m);
    EXPECT_EQ(p.qubit_count(), nq);
    EXPECT_LT((p.to_matrix() - m).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(p.max_imag(), 1e-12);
  }
}

TEST(Encode, RejectsBadDimension) {
  EXPECT_THROW(encode_matrix(Matrix::Identity(3, 3)), ValidationError);
  EXPECT_THROW(encode_matrix(Matrix::Zero(2, 4)), ValidationError);
}

TEST(PauliSum, SimplifyMergesAndDrops) {
  PauliSum s(2);
  s.add(0.5, "ZI");
  s.add(0.25, "ZI");
  s.add(1e-14, "XX");
  s.add(-1.0, "IZ");
  s.simplify();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(coefficient(s, "ZI"), cplx(0.75));
  EXPECT_EQ(coefficient(s, "XX"), cplx(0.0));
  EXPECT_THROW(s.add(1.0, "Z"), ValidationError);
}

TEST(PauliSum, TextRoundTrip) {
  PauliSum s(2);
  s.add(0.1, "ZI");
  s.add(-2.5e-3, "XY");
  s.add(cplx(0.5, 0.25), "II");
  const auto text = to_text(s);
  EXPECT_NE(text.find("0.10000000000000001 ZI"), std::string::npos);
  const auto back = from_text(text);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ((back.to_matrix() - s.to_matrix()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(from_text("0.5\n"), ValidationError);
  EXPECT_THROW(from_text("abc ZZ\n"), ValidationError);
}

TEST(BinaryIndex, Mapping) {
  const auto m4 = binary_index_map(4);
  EXPECT_EQ(m4.to_bits(2), "10");
  EXPECT_EQ(m4.to_bits(0), "00");
  EXPECT_EQ(m4.to_occupancy("11"), 3);
  EXPECT_EQ(binary_index_map(2).to_bits(1), "1");
  EXPECT_EQ(binary_index_map(8).to_bits(5), "101");
  EXPECT_THROW(binary_index_map(6), ValidationError);
  EXPECT_THROW(m4.to_bits(4), ValidationError);
}

TEST(QubitCount, Examples) {
  EXPECT_EQ(qubit_count(2, 4), 4);
  EXPECT_EQ(qubit_count(2, 4, true), 2);
  EXPECT_EQ(qubit_count(1, 2), 1);
  EXPECT_EQ(qubit_count(2, 8, true), 4);
  EXPECT_THROW(qubit_count(2, 6), ValidationError);
}

TEST(Parity, BlocksReproduceSpectrum) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lam(0.0, 20.0), m0(-3.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    const auto p = ModelParams::from_bare_mass(2, 1.0, m0(rng), lam(rng), 4);
    const auto h = fock::build_H(p);
    const auto blocks = parity_blocks(h, p);
    ASSERT_EQ(blocks.size(), 4u);
    std::vector<double> merged;
    double trace = 0.0;
    for (const auto& b : blocks) {
      EXPECT_EQ(b.block.rows(), 4);
      EXPECT_EQ(b.pauli.qubit_count(), 2);
      const auto ev = sorted_eigenvalues(b.block);
      const auto pev = sorted_eigenvalues(b.pauli.to_matrix());
      for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i], pev[i], 1e-10);
      merged.insert(merged.end(), ev.begin(), ev.end());
      trace += b.block.trace().real();
    }
    std::sort(merged.begin(), merged.end());
    const auto full = fock::exact_spectrum(h).eigenvalues;
    for (std::size_t i = 0; i < full.size(); ++i) EXPECT_NEAR(merged[i], full[i], 1e-10);
    EXPECT_NEAR(trace, h.entries.trace().real(), 1e-10);
  }
}

TEST(Parity, SectorLabelsAndBasis) {
  const auto p = ModelParams::from_bare_mass(2, 1.0, -1.5, 6.0, 4);
  const auto blocks = parity_blocks(fock::build_H(p), p);
  EXPECT_EQ(blocks[0].label(), "++");
  EXPECT_EQ(blocks[1].label(), "+-");
  EXPECT_EQ(blocks[2].label(), "-+");
  EXPECT_EQ(blocks[3].label(), "--");
  EXPECT_EQ(blocks[0].basis_map, (std::vector<std::vector<int>>{{0, 0}, {0, 2}, {2, 0}, {2, 2}}));
  EXPECT_EQ(blocks[2].basis_map, (std::vector<std::vector<int>>{{1, 0}, {1, 2}, {3, 0}, {3, 2}}));
  EXPECT_EQ(parse_parity_label("-+"), (std::vector<int>{-1, 1}));
  EXPECT_THROW(parse_parity_label("+x"), ValidationError);
}

TEST(Parity, GroundAndFirstExcitedSectors) {
  for (double lam : {2.0, 4.0, 6.0, 8.21, 10.0, 12.0, 14.0}) {
    const auto p = ModelParams::from_bare_mass(2, 1.0, -1.5, lam, 4);
    const auto h = fock::build_H(p);
    const auto blocks = parity_blocks(h, p);
    const auto full = fock::exact_spectrum(h).eigenvalues;
    EXPECT_NEAR(sorted_eigenvalues(blocks[0].block)[0], full[0], 1e-10) << lam;
    EXPECT_NEAR(sorted_eigenvalues(blocks[2].block)[0], full[1], 1e-10) << lam;
  }
}

TEST(Parity, RejectsSymmetryBreakingOperator) {
  const ModelParams p{2, 1.0, 1.0, 0.0, 4};
  auto h = fock::build_H(p);
  const auto phi = fock::build_field(0, p).first;
  h.entries += 0.1 * phi.entries;  // odd in phi
  EXPECT_THROW(parity_blocks(h, p), SymmetryError);
  EXPECT_THROW(parity_blocks(fock::build_H(p.with_n_max(3)), p.with_n_max(3)), ValidationError);
}
