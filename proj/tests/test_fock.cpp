#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "phi4q/fock_space.hpp"

using namespace phi4q;
using namespace phi4q::fock;
using lattice::ModelParams;

namespace {

// Cyclic Jacobi rotations on a real symmetric matrix.
std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = 0.5 * (a(q, q) - a(p, p)) / a(p, q);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Two-site interaction written directly in the mode quadratures q(0), q(pi).
Matrix two_site_interaction(double m_sq, double delta_m, double lambda, int n) {
  const double w0 = std::sqrt(m_sq), wpi = std::sqrt(m_sq + 4.0);
  Matrix q = Matrix::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) q(i, i + 1) = q(i + 1, i) = std::sqrt((i + 1) / 2.0);
  const Matrix q2 = q * q, q4 = q2 * q2, id = Matrix::Identity(n, n);
  const Matrix A2 = kron(q2, id), B2 = kron(id, q2);
  const Matrix A4 = kron(q4, id), B4 = kron(id, q4);
  return lambda / 48.0 * (A4 / (w0 * w0) + 6.0 * A2 * B2 / (w0 * wpi) + B4 / (wpi * wpi)) +
         delta_m / 2.0 * (A2 / w0 + B2 / wpi);
}

}  // namespace

TEST(Ladder, MatrixElements) {
  const auto [a, adag] = ladder_ops(3);
  EXPECT_NEAR(std::abs(a.entries(1, 2) - std::sqrt(2.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(adag.entries(2, 1) - std::sqrt(2.0)), 0.0, 1e-15);
  EXPECT_EQ(a.entries(0, 0), cplx(0.0));
  const auto n = number_op(4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(n.entries(i, i).real(), i, 1e-15);
  EXPECT_THROW(ladder_ops(1), ValidationError);
}

TEST(Ladder, QuadratureSquaredEvenBlock) {
  const Matrix q = quadrature(4).entries;
  const Matrix q2 = q * q;
  EXPECT_NEAR(q2(0, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(q2(0, 2).real(), std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_NEAR(q2(2, 0).real(), std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_NEAR(q2(2, 2).real(), 2.5, 1e-15);
}

TEST(Embed, NumberOperatorSlots) {
  const auto n = number_op(2);
  const auto n0 = embed(n, 0, 2).entries;
  const auto n1 = embed(n, 1, 2).entries;
  const Eigen::Vector4d want0(0, 0, 1, 1), want1(0, 1, 0, 1);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(n0(i, i).real(), want0(i), 1e-15);
    EXPECT_NEAR(n1(i, i).real(), want1(i), 1e-15);
  }
  EXPECT_THROW(embed(n, 2, 2), ValidationError);
}

TEST(FreeHamiltonian, Diagonal) {
  const auto h = build_H0(ModelParams{2, 1.0, 0.0, 0.0, 2}).entries;
  const double want[4] = {0.0, std::sqrt(5.0), 1.0, 1.0 + std::sqrt(5.0)};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(h(i, i).real(), want[i], 1e-14);
  EXPECT_NEAR((h - Matrix(h.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0, 0.0);

  const auto h1 = build_H0(ModelParams{1, 4.0, 0.0, 0.0, 3}).entries;
  EXPECT_NEAR(h1(1, 1).real(), 2.0, 1e-15);
  EXPECT_NEAR(h1(2, 2).real(), 4.0, 1e-15);
}

TEST(Field, CanonicalCommutatorBelowCutoff) {
  for (int L : {2, 3}) {
    const ModelParams p{L, 0.7, 0.0, 0.0, 4};
    const auto dim = static_cast<Eigen::Index>(p.hilbert_dim());
    for (int x = 0; x < L; ++x) {
      for (int y = 0; y < L; ++y) {
        const Matrix phi = build_field(x, p).first.entries;
        const Matrix pi = build_field(y, p).second.entries;
        const Matrix c = phi * pi - pi * phi;
        for (Eigen::Index idx = 0; idx < dim; ++idx) {
          Eigen::Index rest = idx;
          bool safe = true;
          for (int k = 0; k < L; ++k, rest /= p.n_max) safe &= (rest % p.n_max) < p.n_max - 1;
          if (!safe) continue;
          Vector want = Vector::Zero(dim);
          if (x == y) want(idx) = cplx(0.0, 1.0);
          EXPECT_LT((c.col(idx) - want).cwiseAbs().maxCoeff(), 1e-12) << "x=" << x << " y=" << y;
        }
      }
    }
  }
}

TEST(Field, SiteSumIsZeroMode) {
  const ModelParams p{2, 2.0, 0.0, 0.0, 4};
  const Matrix sum = build_field(0, p).first.entries + build_field(1, p).first.entries;
  const auto [a, adag] = ladder_ops(4);
  const Matrix want = embed(ModeMatrix{a.entries + adag.entries}, 0, 2).entries / std::sqrt(std::sqrt(2.0));
  EXPECT_LT((sum - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Interaction, MatchesQuadratureExpansion) {
  const ModelParams p{2, 1.0, 24.0, 0.0, 4};
  EXPECT_LT((build_HI(p).entries - two_site_interaction(1.0, 0.0, 24.0, 4)).cwiseAbs().maxCoeff(), 1e-12);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lam(0.0, 30.0), del(-5.0, 1.0), msq(0.05, 3.0);
  for (int n : {4, 8}) {
    for (int t = 0; t < 5; ++t) {
      const ModelParams q{2, msq(rng), lam(rng), del(rng), n};
      const Matrix diff = build_HI(q).entries - two_site_interaction(q.m_sq, q.delta_m, q.lambda, n);
      EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Interaction, CommutesWithModeParity) {
  const ModelParams p{2, 1.0, 10.0, -2.5, 4};
  const Matrix h = build_H(p).entries;
  for (int k = 0; k < 2; ++k) {
    const Matrix par = embed(mode_parity(4), k, 2).entries;
    EXPECT_LT((h * par - par * h).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_LT(hermiticity_defect(h), 1e-12);
}

TEST(Spectrum, FreeTheoryLevelSums) {
  const ModelParams p{2, 1.0, 0.0, 0.0, 4};
  const auto s = exact_spectrum(build_H(p));
  std::vector<double> want;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) want.push_back(a + b * std::sqrt(5.0));
  std::sort(want.begin(), want.end());
  ASSERT_EQ(s.eigenvalues.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(s.eigenvalues[i], want[i], 1e-10);
  EXPECT_NEAR(s.gap, 1.0, 1e-10);
  EXPECT_FALSE(s.degenerate);
}

TEST(Spectrum, MatchesJacobi) {
  for (double lam : {0.0, 6.0, 24.0}) {
    const auto p = ModelParams::from_bare_mass(2, 1.0, -1.5, lam, 4);
    const Matrix h = build_H(p).entries;
    ASSERT_LT(h.imag().cwiseAbs().maxCoeff(), 1e-12);
    const auto ref = jacobi_eigenvalues(h.real());
    const auto s = exact_spectrum(h);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(s.eigenvalues[i], ref[i], 1e-10);
  }
}

TEST(Spectrum, SingleModeGap) {
  EXPECT_NEAR(mass_gap(ModelParams{1, 0.25, 0.0, 0.0, 6}), 0.5, 1e-12);
}

TEST(Spectrum, RejectsNonHermitian) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  EXPECT_THROW(exact_spectrum(m), ValidationError);
}

TEST(Spectrum, DegenerateFlag) {
  const auto s = exact_spectrum(Matrix(Matrix::Identity(3, 3)));
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.gap, 0.0);
}

TEST(HamiltonianTerms, LinearDecomposition) {
  const ModelParams p{2, 0.6, 3.0, -1.2, 4};
  const HamiltonianTerms t(p);
  const Matrix direct = build_H0(p).entries + build_HI(p).entries;
  EXPECT_LT((t.hamiltonian().entries - direct).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix h2 = t.hamiltonian(0.4, 7.0).entries;
  const Matrix want = build_H(p.with_delta_m(0.4).with_lambda(7.0)).entries;
  EXPECT_LT((h2 - want).cwiseAbs().maxCoeff(), 1e-12);
}
