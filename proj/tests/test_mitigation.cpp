#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "phi4q/mitigation.hpp"
#include "phi4q/seeding.hpp"

using namespace phi4q;
using namespace phi4q::mitigation;
using encoding::PauliSum;
using encoding::PauliWord;
using sim::ansatz_entangled;
using sim::cplx;
using sim::apply_circuit;
using sim::Counts;
using sim::DensityMatrix;
using sim::NoiseModel;
using sim::ReadoutRates;
using sim::Rng;
using sim::StateVector;

namespace {

std::map<std::string, double> analytic_distribution(const DensityMatrix& rho, const PauliWord& w,
                                                    const NoiseModel& noise) {
  const auto probs = sim::outcome_distribution(rho, w, noise);
  const int m = static_cast<int>(w.support().size());
  std::map<std::string, double> d;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    std::string key(static_cast<std::size_t>(m), '0');
    for (int s = 0; s < m; ++s)
      if (k & (std::size_t{1} << (m - 1 - s))) key[static_cast<std::size_t>(s)] = '1';
    d[key] = probs[k];
  }
  return d;
}

double exact_expectation(const DensityMatrix& rho, const PauliWord& w) {
  return (rho.entries * w.to_matrix()).trace().real();
}

DensityMatrix mixed(const StateVector& psi, double eps) {
  const int d = static_cast<int>(psi.amplitudes.size());
  return {(1.0 - eps) * psi.amplitudes * psi.amplitudes.adjoint() + eps * Matrix::Identity(d, d) / d};
}

}  // namespace

TEST(ReadoutCorrection, ZeroRatesIsIdentity) {
  std::mt19937_64 g(1);
  std::uniform_int_distribution<int> u(0, 500);
  for (int t = 0; t < 20; ++t) {
    Counts c;
    c.qubits = {0, 1};
    for (const char* k : {"00", "01", "10", "11"}) {
      c.counts[k] = u(g);
      c.shots += c.counts[k];
    }
    if (c.shots == 0) continue;
    EXPECT_NEAR(ro_correct(c, ReadoutCalibration::ideal(2)), c.parity_expectation(), 1e-15);
  }
}

TEST(ReadoutCorrection, SymmetricFlipChannel) {
  NoiseModel noise;
  noise.readout = {{0.1, 0.1}};
  const auto d = analytic_distribution(DensityMatrix::from_state(StateVector::zero(1)), PauliWord("Z"), noise);
  EXPECT_NEAR(d.at("0") - d.at("1"), 0.8, 1e-15);
  EXPECT_NEAR(ro_correct(d, {0}, {0}, ReadoutCalibration::from_noise(noise, 1)), 1.0, 1e-14);
}

TEST(ReadoutCorrection, AsymmetricFlipChannel) {
  NoiseModel noise;
  noise.readout = {{0.0, 0.2}};
  const auto cal = ReadoutCalibration::from_noise(noise, 1);
  EXPECT_NEAR(cal.p_minus(0), -0.2, 1e-15);
  EXPECT_NEAR(cal.p_plus(0), 0.2, 1e-15);
  const auto d = analytic_distribution(DensityMatrix::from_state(StateVector::zero(1)), PauliWord("Z"), noise);
  EXPECT_NEAR(d.at("0") - d.at("1"), 0.6, 1e-15);
  EXPECT_NEAR(ro_correct(d, {0}, {0}, cal), 1.0, 1e-14);
}

TEST(ReadoutCorrection, AnalyticChannelInversion) {
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> rate(0.0, 0.25), ang(-3.0, 3.0);
  const char* words[] = {"ZI", "IZ", "ZZ", "XY", "YX", "XX", "ZY"};
  for (int t = 0; t < 40; ++t) {
    NoiseModel noise;
    noise.readout = {{rate(g), rate(g)}, {rate(g), rate(g)}};
    const auto rho = DensityMatrix::from_state(apply_circuit(ansatz_entangled(ang(g), ang(g), ang(g))));
    const PauliWord w(words[t % 7]);
    const auto d = analytic_distribution(rho, w, noise);
    const double v = ro_correct(d, w.support(), w.support(), ReadoutCalibration::from_noise(noise, 2));
    EXPECT_NEAR(v, exact_expectation(rho, w), 1e-10);
  }
}

TEST(ReadoutCorrection, SampledWithinStandardErrors) {
  NoiseModel noise;
  noise.readout = {{0.08, 0.12}, {0.15, 0.05}};
  const auto cal = ReadoutCalibration::from_noise(noise, 2);
  const auto rho = DensityMatrix::from_state(apply_circuit(ansatz_entangled(0.9, -0.4, 1.3)));
  const PauliWord w("ZZ");
  const double truth = exact_expectation(rho, w);
  int hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(42, trial));
    const auto c = sim::measure_pauli(rho, w, 10000, noise, rng);
    const auto e = ro_correct_with_error(c, w.support(), cal);
    hits += std::abs(e.value - truth) <= 4.0 * e.std_error;
  }
  EXPECT_GE(hits, 95);
}

TEST(ReadoutCorrection, Guards) {
  ReadoutCalibration bad;
  bad.rates = {{0.6, 0.5}};
  Counts c;
  c.qubits = {0};
  c.counts["0"] = 10;
  c.shots = 10;
  EXPECT_THROW(ro_correct(c, bad), NumericalError);
  EXPECT_THROW(ro_correct(c, ReadoutCalibration{}), ValidationError);
  Counts empty;
  EXPECT_THROW(ro_correct(empty, ReadoutCalibration::ideal(1)), ValidationError);
}

TEST(Calibrate, EstimatesPerQubit) {
  Rng rng(6);
  const auto noise = NoiseModel::uniform(2, 0.03, 0.0, 0);
  const auto cal = calibrate(noise, 2, 100000, rng);
  ASSERT_TRUE(cal.covers(1));
  const double se = std::sqrt(0.03 * 0.97 / 100000);
  EXPECT_NEAR(cal.p_plus(0), 0.06, 6 * se);
  EXPECT_NEAR(cal.p_minus(1), 0.0, 6 * se);
}

TEST(Tomography, AnalyticRoundTrip) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> ang(-3.0, 3.0);
  const auto& words = two_qubit_paulis();
  EXPECT_EQ(words[0].str(), "II");
  EXPECT_EQ(words[15].str(), "ZZ");
  for (int t = 0; t < 10; ++t) {
    const auto psi = apply_circuit(ansatz_entangled(ang(g), ang(g), ang(g)));
    const auto rho = DensityMatrix::from_state(psi);
    std::array<double, 16> e{};
    for (std::size_t i = 0; i < 16; ++i) e[i] = exact_expectation(rho, words[i]);
    EXPECT_NEAR(e[0], 1.0, 1e-15);
    EXPECT_LT((reconstruct_2q(e).entries - rho.entries).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Tomography, SampledGroundState) {
  Rng rng(12);
  const sim::Circuit c = sim::ansatz_product(0.0, 0.0);
  const auto rho = tomography_2q(c, NoiseModel::noiseless(), 100000, ReadoutCalibration::ideal(2), rng);
  EXPECT_GT(sim::fidelity(rho, StateVector::zero(2)), 0.99);
  EXPECT_NEAR(rho.trace(), 1.0, 1e-12);
}

TEST(Tomography, DepolarizedPurity) {
  Rng rng(13);
  NoiseModel noise;
  noise.p_dep = 0.1;
  const auto c = ansatz_entangled(0.8, 0.3, 2.0);
  const double want = sim::simulate_density(c, noise).purity();
  const auto rho = tomography_2q(c, noise, 200000, ReadoutCalibration::ideal(2), rng);
  EXPECT_LT(rho.purity(), 1.0);
  EXPECT_NEAR(rho.purity(), want, 0.01);
}

TEST(Purification, PureInputIsFixedPoint) {
  const auto psi = apply_circuit(ansatz_entangled(0.5, 1.0, -0.3));
  const auto [out, rep] = mcweeny_purify(DensityMatrix::from_state(psi));
  EXPECT_LE(rep.iterations, 1);
  EXPECT_TRUE(rep.converged);
  EXPECT_NEAR(rep.non_idempotency, 0.0, 1e-12);
}

TEST(Purification, MixedStatesConverge) {
  const auto psi = apply_circuit(ansatz_entangled(1.1, -0.6, 2.4));
  for (double eps : {0.05, 0.2, 0.4}) {
    const auto [out, rep] = mcweeny_purify(mixed(psi, eps));
    EXPECT_TRUE(rep.converged) << eps;
    EXPECT_LT(std::abs(rep.non_idempotency), 1e-4);
    EXPECT_LT(rep.iterations, 50);
    EXPECT_GT(sim::fidelity(out, psi), 0.999);
    EXPECT_GT(rep.final_purity, rep.initial_purity);
  }
}

TEST(Purification, ScalarMapOnSpectrum) {
  // eps = 0.1: eigenvalues 0.925 and 0.025 under x -> 3x^2 - 2x^3, renormalized.
  const auto psi = StateVector::zero(2);
  const auto [out, rep] = mcweeny_purify(mixed(psi, 0.1), 1e-30, 1);
  auto f = [](double x) { return 3 * x * x - 2 * x * x * x; };
  const double top = f(0.925), low = f(0.025), tr = top + 3 * low;
  EXPECT_NEAR(out.entries(0, 0).real(), top / tr, 1e-14);
  EXPECT_NEAR(out.entries(3, 3).real(), low / tr, 1e-14);
}

TEST(Purification, MaximallyMixedFlagged) {
  const DensityMatrix rho{Matrix::Identity(4, 4) / 4.0};
  const auto [out, rep] = mcweeny_purify(rho);
  EXPECT_FALSE(rep.converged);
  EXPECT_NEAR(rep.non_idempotency, -0.75, 1e-14);
}

TEST(Purification, EigenvectorsPreserved) {
  std::mt19937_64 g(4);
  std::normal_distribution<double> n;
  Matrix a(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = cplx(n(g), n(g));
  const Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix U = qr.householderQ();
  const Eigen::Vector4d lam(0.05, 0.1, 0.2, 0.65);
  const DensityMatrix rho{U * lam.cast<cplx>().asDiagonal() * U.adjoint()};
  for (int k = 1; k <= 6; ++k) {
    const auto [out, rep] = mcweeny_purify(rho, 1e-30, k);
    Eigen::SelfAdjointEigenSolver<Matrix> es(out.entries);
    // Dominant eigenvector throughout; full basis while the spectrum is resolvable.
    EXPECT_GT(std::abs(U.col(3).dot(es.eigenvectors().col(3))), 1.0 - 1e-8) << k;
    if (k <= 2)
      for (int c = 0; c < 4; ++c) EXPECT_GT(std::abs(U.col(c).dot(es.eigenvectors().col(c))), 1.0 - 1e-8) << k;
  }
}

TEST(Purification, NonIdempotencyMonotone) {
  const auto psi = apply_circuit(ansatz_entangled(0.2, 0.9, 1.7));
  const auto rho = mixed(psi, 0.35);
  double prev = INFINITY;
  for (int k = 0; k <= 8; ++k) {
    const auto [out, rep] = mcweeny_purify(rho, 1e-30, k);
    EXPECT_LE(std::abs(rep.non_idempotency), prev + 1e-15) << k;
    prev = std::abs(rep.non_idempotency);
  }
}

TEST(Purification, InputChecks) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = 0.3;
  EXPECT_THROW(mcweeny_purify(DensityMatrix{m}), ValidationError);
  EXPECT_THROW(mcweeny_purify(DensityMatrix{Matrix::Identity(2, 2) * 2.0}), ValidationError);
}

TEST(Energy, FromState) {
  PauliSum zi(2);
  zi.add(1.0, "ZI");
  EXPECT_NEAR(energy_from_state(DensityMatrix::from_state(StateVector::zero(2)), zi), 1.0, 1e-15);
  PauliSum h(2);
  h.add(0.7, "XZ");
  h.add(-1.3, "YY");
  EXPECT_NEAR(energy_from_state(DensityMatrix{Matrix::Identity(4, 4) / 4.0}, h), 0.0, 1e-15);
  PauliSum one(1);
  one.add(1.0, "Z");
  EXPECT_THROW(energy_from_state(DensityMatrix{Matrix::Identity(4, 4) / 4.0}, one), ValidationError);
}

TEST(Energy, PurifiedBeatsRaw) {
  const auto p = lattice::ModelParams::from_bare_mass(2, 1.0, -1.5, 6.0, 4);
  const auto blocks = encoding::parity_blocks(fock::build_H(p), p);
  const auto& h = blocks[0].pauli;
  const auto c = ansatz_entangled(0.3, -0.2, 0.4);
  const double ideal = sim::expectation_exact(apply_circuit(c), h);
  for (double p_dep : {0.02, 0.05, 0.1}) {
    Rng rng(derive_seed(77, static_cast<std::uint64_t>(p_dep * 100)));
    const auto noise = NoiseModel::uniform(2, 0.03, p_dep, 0);
    const auto cal = calibrate(noise, 2, 100000, rng);
    const auto data = measure_tomography_2q(sim::simulate_density(c, noise), noise, 8192, cal, rng);
    const auto [pure, rep] = mcweeny_purify(data.corrected_state());
    ASSERT_TRUE(rep.converged);
    const double raw = energy_from_state(data.raw_state(), h);
    EXPECT_LT(std::abs(energy_from_state(pure, h) - ideal), std::abs(raw - ideal)) << p_dep;
  }
}
