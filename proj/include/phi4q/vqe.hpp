#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "phi4q/circuit_sim.hpp"
#include "phi4q/errors.hpp"
#include "phi4q/fock_space.hpp"
#include "phi4q/lattice_model.hpp"
#include "phi4q/mitigation.hpp"
#include "phi4q/nelder_mead.hpp"
#include "phi4q/qubit_encoding.hpp"
#include "phi4q/seeding.hpp"

namespace phi4q::vqe {

using encoding::PauliSum;
using encoding::SectorHamiltonian;
using mitigation::PurificationReport;
using mitigation::ReadoutCalibration;
using sim::AnsatzKind;
using sim::NoiseModel;
using sim::Rng;

enum class BackendKind { Exact, Sampled, NoisyMitigated };

inline const char* to_string(BackendKind k) {
  switch (k) {
    case BackendKind::Exact: return "exact";
    case BackendKind::Sampled: return "sampled";
    case BackendKind::NoisyMitigated: return "noisy_mitigated";
  }
  return "?";
}

inline BackendKind parse_backend(const std::string& s) {
  if (s == "exact") return BackendKind::Exact;
  if (s == "sampled") return BackendKind::Sampled;
  if (s == "noisy_mitigated") return BackendKind::NoisyMitigated;
  throw ValidationError("unknown backend '" + s + "' (expected exact, sampled or noisy_mitigated)");
}

struct BackendSpec {
  BackendKind kind = BackendKind::Exact;
  std::int64_t shots = 8192;  // per measured Pauli word
  NoiseModel noise;           // applied by both sampled kinds
  bool readout_correction = true;
  bool purification = true;
  std::int64_t calibration_shots = 8192;
  double purification_tolerance = 1e-4;
  int purification_max_iter = 100;
  int repeats = 10;  // re-evaluations at the optimum
  double exact_f_tolerance = 1e-7;
  double sampled_tolerance_factor = 0.3;  // times the measured objective std
  int max_evaluations = 600;

  static BackendSpec exact() { return {}; }
  static BackendSpec sampled(std::int64_t shots) {
    BackendSpec b;
    b.kind = BackendKind::Sampled;
    b.shots = shots;
    return b;
  }
  static BackendSpec noisy_mitigated(std::int64_t shots, double readout_rate, double p_dep,
                                     int qubits = 2) {
    BackendSpec b;
    b.kind = BackendKind::NoisyMitigated;
    b.shots = shots;
    b.calibration_shots = shots;
    b.noise = NoiseModel::uniform(qubits, readout_rate, p_dep, 0);
    return b;
  }

  [[nodiscard]] bool is_sampled() const { return kind != BackendKind::Exact; }

  void validate() const {
    if (is_sampled() && shots < 1) throw ValidationError("backend: sampled kinds require shots >= 1");
    if (kind == BackendKind::NoisyMitigated && readout_correction && calibration_shots < 1)
      throw ValidationError("backend: calibration_shots must be >= 1");
    if (repeats < 1) throw ValidationError("backend: repeats must be >= 1");
    if (max_evaluations < 1) throw ValidationError("backend: max_evaluations must be >= 1");
    if (!(purification_tolerance > 0.0)) throw ValidationError("backend: purification_tolerance must be > 0");
    noise.validate();
  }
};

/// One energy estimate. `raw` is the unmitigated value from the same shots.
struct Evaluation {
  double energy = 0.0;
  double raw = 0.0;
  std::optional<PurificationReport> purification;
};

class EnergyEstimator {
 public:
  EnergyEstimator(const SectorHamiltonian& sector, AnsatzKind ansatz, BackendSpec backend,
                  ReadoutCalibration cal)
      : h_(sector.pauli), ansatz_(ansatz), backend_(std::move(backend)), cal_(std::move(cal)) {
    if (h_.qubit_count() < 1) throw ValidationError("EnergyEstimator: empty sector Hamiltonian");
    backend_.validate();
    for (const auto& t : h_.terms()) {
      if (t.word.is_identity())
        offset_ += t.coefficient.real();
      else
        terms_.push_back({t.coefficient.real(), t.word});
    }
    for (const auto& t : terms_) norm_sq_ += t.coefficient * t.coefficient;
  }

  [[nodiscard]] const PauliSum& hamiltonian() const { return h_; }
  [[nodiscard]] AnsatzKind ansatz() const { return ansatz_; }
  [[nodiscard]] const BackendSpec& backend() const { return backend_; }

  /// Shot-noise scale sqrt(sum_w c_w^2 / shots), the single-evaluation
  /// standard deviation bound for independent +-1 outcomes.
  [[nodiscard]] double shot_noise_scale() const {
    return backend_.is_sampled() ? std::sqrt(norm_sq_ / static_cast<double>(backend_.shots)) : 0.0;
  }

  [[nodiscard]] sim::Circuit circuit(const std::vector<double>& theta) const {
    if (static_cast<int>(theta.size()) != sim::parameter_count(ansatz_))
      throw ValidationError(std::string("energy_objective: ") + sim::to_string(ansatz_) + " ansatz takes " +
                            std::to_string(sim::parameter_count(ansatz_)) + " parameters, got " +
                            std::to_string(theta.size()));
    auto c = sim::make_ansatz(ansatz_, theta);
    if (c.qubit_count != h_.qubit_count())
      throw ValidationError("energy_objective: ansatz acts on " + std::to_string(c.qubit_count) +
                            " qubits, sector Hamiltonian on " + std::to_string(h_.qubit_count()));
    return c;
  }

  Evaluation evaluate(const std::vector<double>& theta, Rng& rng) const {
    const auto c = circuit(theta);
    if (backend_.kind == BackendKind::Exact) {
      const double e = sim::expectation_exact(sim::apply_circuit(c), h_);
      return {e, e, std::nullopt};
    }
    const auto rho = sim::simulate_density(c, backend_.noise);
    const bool mitigate = backend_.kind == BackendKind::NoisyMitigated;
    if (mitigate && backend_.purification && ansatz_ == AnsatzKind::Entangled && h_.qubit_count() == 2)
      return purified(rho, rng);

    Evaluation ev{offset_, offset_, std::nullopt};
    for (const auto& t : terms_) {
      const auto counts = sim::measure_pauli(rho, t.word, backend_.shots, backend_.noise, rng);
      const double raw = counts.parity_expectation();
      const double corr = mitigate && backend_.readout_correction ? mitigation::ro_correct(counts, cal_) : raw;
      ev.raw += t.coefficient * raw;
      ev.energy += t.coefficient * corr;
    }
    return ev;
  }

 private:
  struct RealTerm {
    double coefficient;
    encoding::PauliWord word;
  };

  Evaluation purified(const sim::DensityMatrix& rho, Rng& rng) const {
    const auto cal = backend_.readout_correction ? cal_ : ReadoutCalibration::ideal(2);
    const auto data = mitigation::measure_tomography_2q(rho, backend_.noise, backend_.shots, cal, rng);
    const auto [pure, report] = mitigation::mcweeny_purify(
        data.corrected_state(), backend_.purification_tolerance, backend_.purification_max_iter);
    return {mitigation::energy_from_state(pure, h_), mitigation::energy_from_state(data.raw_state(), h_),
            report};
  }

  PauliSum h_;
  AnsatzKind ansatz_;
  BackendSpec backend_;
  ReadoutCalibration cal_;
  std::vector<RealTerm> terms_;
  double offset_ = 0.0;
  double norm_sq_ = 0.0;
};

/// Single objective evaluation on a fresh stream.
inline double energy_objective(const std::vector<double>& theta, const SectorHamiltonian& sector,
                               const BackendSpec& backend, std::uint64_t seed = 0,
                               const std::optional<ReadoutCalibration>& cal = std::nullopt) {
  const auto kind = static_cast<int>(theta.size()) == 2 ? AnsatzKind::Product : AnsatzKind::Entangled;
  if (theta.size() != 2 && theta.size() != 3)
    throw ValidationError("energy_objective: expected 2 (product) or 3 (entangled) parameters, got " +
                          std::to_string(theta.size()));
  const EnergyEstimator est(sector, kind, backend,
                            cal ? *cal : ReadoutCalibration::from_noise(backend.noise, sector.pauli.qubit_count()));
  Rng rng(seed);
  return est.evaluate(theta, rng).energy;
}

struct VqeResult {
  AnsatzKind ansatz = AnsatzKind::Entangled;
  BackendKind backend = BackendKind::Exact;
  std::string sector;
  std::vector<double> theta;
  double energy = 0.0;
  double energy_std = 0.0;
  double raw_energy = 0.0;
  double raw_energy_std = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> restart_energies;
  std::vector<std::vector<double>> history;  // objective values per restart
  std::vector<PurificationReport> purification;
};

/// Restart points built from {0, pi/2} combinations.
inline std::vector<std::vector<double>> restart_points(AnsatzKind kind) {
  constexpr double h = std::numbers::pi / 2;
  if (kind == AnsatzKind::Product) return {{0, 0}, {h, 0}, {0, h}, {h, h}};
  return {{0, 0, 0}, {h, h, 0}, {h, 0, h}, {0, h, h}};
}

namespace detail {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

inline constexpr int kNoiseProbes = 5;
inline constexpr double kMinSampledTolerance = 1e-9;
inline constexpr int kMaxPolish = 8;

/// Nelder-Mead from each restart point, restarted from its own optimum
/// until the gain drops below the tolerance.
/// For sampled backends the simplex tolerance is the objective's standard
/// deviation at the restart point. The best restart is re-evaluated
/// `repeats` times.
inline VqeResult optimize(const EnergyEstimator& est, std::uint64_t seed) {
  const auto& backend = est.backend();
  VqeResult res;
  res.ansatz = est.ansatz();
  res.backend = backend.kind;

  optim::NelderMeadOptions opt;
  opt.max_evaluations = backend.max_evaluations;
  opt.f_tolerance = backend.is_sampled() ? est.shot_noise_scale() : backend.exact_f_tolerance;
  opt.initial_step = std::numbers::pi / 4;

  const auto starts = restart_points(est.ansatz());
  optim::NelderMeadResult best;
  bool have_best = false;
  for (std::size_t r = 0; r < starts.size(); ++r) {
    Rng rng(derive_seed(seed, r));
    std::vector<double> trace;
    auto f = [&](const std::vector<double>& x) {
      const double e = est.evaluate(x, rng).energy;
      trace.push_back(e);
      return e;
    };
    if (backend.is_sampled()) {
      // Mitigation changes the noise level, so the scale is measured, not assumed.
      std::vector<double> probe;
      for (int i = 0; i < kNoiseProbes; ++i) probe.push_back(f(starts[r]));
      opt.f_tolerance = std::max(kMinSampledTolerance, backend.sampled_tolerance_factor *
                                                        std::min(est.shot_noise_scale(), detail::stddev(probe)));
    }
    auto nm = optim::nelder_mead(f, starts[r], opt);
    nm.evaluations += backend.is_sampled() ? kNoiseProbes : 0;
    // Restarting from the optimum refreshes a collapsed simplex.
    optim::NelderMeadOptions polish = opt;
    polish.initial_step = backend.is_sampled() ? 0.2 : 1e-2;
    for (int k = 0; k < kMaxPolish; ++k) {
      if (backend.is_sampled()) {
        std::vector<double> probe;
        for (int i = 0; i < kNoiseProbes; ++i) probe.push_back(f(nm.x));
        nm.evaluations += kNoiseProbes;
        polish.f_tolerance = std::max(kMinSampledTolerance, backend.sampled_tolerance_factor *
                                                                std::min(est.shot_noise_scale(), detail::stddev(probe)));
      }
      const auto again = optim::nelder_mead(f, nm.x, polish);
      const double gain = nm.f - again.f;
      const int used = nm.evaluations + again.evaluations;
      if (gain > 0.0) nm = again;
      nm.evaluations = used;
      if (gain <= polish.f_tolerance) break;
    }
    res.evaluations += nm.evaluations;
    res.restart_energies.push_back(nm.f);
    res.history.push_back(std::move(trace));
    if (!have_best || nm.f < best.f) {
      best = nm;
      have_best = true;
    }
  }
  res.theta = best.x;
  res.converged = best.converged;

  Rng rng(derive_seed(seed, starts.size()));
  const int reps = backend.is_sampled() ? backend.repeats : 1;
  std::vector<double> e, raw;
  for (int i = 0; i < reps; ++i) {
    const auto ev = est.evaluate(res.theta, rng);
    e.push_back(ev.energy);
    raw.push_back(ev.raw);
    if (ev.purification) res.purification.push_back(*ev.purification);
  }
  res.energy = detail::mean(e);
  res.energy_std = detail::stddev(e);
  res.raw_energy = detail::mean(raw);
  res.raw_energy_std = detail::stddev(raw);
  return res;
}

inline VqeResult optimize(const SectorHamiltonian& sector, AnsatzKind ansatz, const BackendSpec& backend,
                          std::uint64_t seed, const std::optional<ReadoutCalibration>& cal = std::nullopt) {
  const int n = sector.pauli.qubit_count();
  if (n != 2) throw ValidationError("optimize: sector must act on 2 qubits, got " + std::to_string(n));
  const EnergyEstimator est(sector, ansatz, backend,
                            cal ? *cal : ReadoutCalibration::from_noise(backend.noise, n));
  auto res = optimize(est, seed);
  res.sector = sector.label();
  return res;
}

struct GapResult {
  VqeResult ground;   // {+,+}
  VqeResult excited;  // {-,+}
  double gap = 0.0;
  double gap_std = 0.0;
  double raw_gap = 0.0;
  ReadoutCalibration calibration;
};

/// The two sector Hamiltonians used for the gap: {+,+} and {-,+}.
inline std::pair<SectorHamiltonian, SectorHamiltonian> gap_sectors(const lattice::ModelParams& params) {
  params.validate();
  if (params.L != 2) throw ValidationError("mass_gap_vqe: only L = 2 is supported by the 2-qubit ansatz");
  const auto h = fock::build_H(params);
  auto blocks = encoding::parity_blocks(h, params);
  auto& ground = blocks[0];
  auto& excited = blocks[2];
  for (const auto* s : {&ground, &excited})
    if (s->block.rows() != 4)
      throw ValidationError("mass_gap_vqe: sector " + s->label() + " has dimension " +
                            std::to_string(s->block.rows()) + ", the ansatz needs 4 (n_max = 4)");
  return {std::move(ground), std::move(excited)};
}

inline GapResult mass_gap_vqe(const lattice::ModelParams& params, const BackendSpec& backend, AnsatzKind ansatz,
                              std::uint64_t seed) {
  backend.validate();
  const auto [s0, s1] = gap_sectors(params);
  GapResult out;
  if (backend.kind == BackendKind::NoisyMitigated && backend.readout_correction) {
    Rng rng(derive_seed(seed, 0));
    out.calibration = mitigation::calibrate(backend.noise, 2, backend.calibration_shots, rng);
  } else {
    out.calibration = ReadoutCalibration::ideal(2);
  }
  out.ground = optimize(s0, ansatz, backend, derive_seed(seed, 1), out.calibration);
  out.excited = optimize(s1, ansatz, backend, derive_seed(seed, 2), out.calibration);
  out.gap = out.excited.energy - out.ground.energy;
  out.gap_std = std::hypot(out.ground.energy_std, out.excited.energy_std);
  out.raw_gap = out.excited.raw_energy - out.ground.raw_energy;
  return out;
}

}  // namespace phi4q::vqe
