#pragma once

// The four experiment drivers behind the command-line tool. Each writes CSV
// tables plus a result.json record into an output directory.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "phi4q/criticality.hpp"
#include "phi4q/experiment_config.hpp"
#include "phi4q/fock_space.hpp"
#include "phi4q/io.hpp"
#include "phi4q/lattice_model.hpp"
#include "phi4q/qubit_encoding.hpp"
#include "phi4q/seeding.hpp"
#include "phi4q/vqe.hpp"

namespace phi4q::experiments {

using config::Command;
using config::ExperimentConfig;
using io::Column;
using io::CsvWriter;
using nlohmann::json;
namespace fs = std::filesystem;

struct RunOutput {
  json record;
  std::vector<fs::path> files;
};

namespace detail {

inline json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json report_json(const mitigation::PurificationReport& r) {
  return {{"iterations", r.iterations},
          {"non_idempotency", r.non_idempotency},
          {"converged", r.converged},
          {"initial_purity", r.initial_purity},
          {"final_purity", r.final_purity}};
}

inline json vqe_json(const vqe::VqeResult& r) {
  json reports = json::array();
  for (const auto& p : r.purification) reports.push_back(report_json(p));
  return {{"sector", r.sector},
          {"theta", r.theta},
          {"energy", r.energy},
          {"energy_std", r.energy_std},
          {"raw_energy", r.raw_energy},
          {"raw_energy_std", r.raw_energy_std},
          {"evaluations", r.evaluations},
          {"converged", r.converged},
          {"restart_energies", r.restart_energies},
          {"purification", reports}};
}

inline std::string lattice_label(const config::LatticeSize& L) { return L ? std::to_string(*L) : "inf"; }

}  // namespace detail

/// Eigenvalues and gaps for every (n_max, lambda) point.
inline RunOutput cmd_spectrum(const ExperimentConfig& c, const fs::path& out) {
  struct Job {
    int n_max;
    double lambda;
  };
  std::vector<Job> jobs;
  for (int n : c.n_max)
    for (double lam : c.lambdas) jobs.push_back({n, lam});

  // One HamiltonianTerms per cutoff, shared read-only by the workers.
  std::vector<fock::HamiltonianTerms> terms;
  for (int n : c.n_max) terms.emplace_back(c.model(0.0, n));

  const auto results = io::parallel_map<fock::Spectrum>(jobs.size(), io::resolve_threads(c.threads), [&](std::size_t i) {
    const auto k = static_cast<std::size_t>(std::find(c.n_max.begin(), c.n_max.end(), jobs[i].n_max) - c.n_max.begin());
    return fock::exact_spectrum(terms[k].hamiltonian(c.counterterm(), jobs[i].lambda));
  });

  RunOutput o;
  {
    CsvWriter w(out / "spectrum.csv", {{"n_max", "1"}, {"lambda", "1/a^2"}, {"level", "1"}, {"energy", "1/a"}});
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto& ev = results[i].eigenvalues;
      const auto levels = std::min<std::size_t>(ev.size(), static_cast<std::size_t>(c.levels));
      for (std::size_t l = 0; l < levels; ++l) w.row(jobs[i].n_max, jobs[i].lambda, static_cast<int>(l), ev[l]);
    }
    o.files.push_back(w.path());
  }
  {
    std::vector<Column> cols{{"lambda", "1/a^2"}};
    for (int n : c.n_max) cols.push_back({"gap_nmax" + std::to_string(n), "1/a"});
    CsvWriter w(out / "gaps.csv", cols);
    for (std::size_t li = 0; li < c.lambdas.size(); ++li) {
      std::vector<std::string> cells{io::fmt(c.lambdas[li])};
      for (std::size_t ni = 0; ni < c.n_max.size(); ++ni)
        cells.push_back(io::fmt(results[ni * c.lambdas.size() + li].gap));
      w.row(cells);
    }
    o.files.push_back(w.path());
  }
  json points = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i)
    points.push_back({{"n_max", jobs[i].n_max},
                      {"lambda", jobs[i].lambda},
                      {"gap", results[i].gap},
                      {"degenerate", results[i].degenerate}});
  o.record["points"] = points;
  return o;
}

/// First-order counter-term curves, gap-vs-delta_m sweeps and the
/// self-consistent counter terms marked on those sweeps.
inline RunOutput cmd_counterterm(const ExperimentConfig& c, const fs::path& out) {
  RunOutput o;
  const unsigned threads = io::resolve_threads(c.threads);
  const double m0_sq = c.bare_mass_sq();

  {
    CsvWriter w(out / "first_order.csv", {{"m_sq", "1/a^2"}, {"L", "sites"}, {"lambda", "1/a^2"}, {"delta_m", "1/a^2"}});
    for (double m : c.curve_m_sq)
      for (const auto& L : c.curve_L)
        for (double lam : c.curve_lambda)
          w.row(m, detail::lattice_label(L), lam,
                L ? lattice::counterterm_first_order(*L, m, lam) : lattice::counterterm_continuum(m, lam));
    o.files.push_back(w.path());
  }

  struct SweepJob {
    int n_max;
    double lambda;
  };
  std::vector<SweepJob> jobs;
  for (int n : c.n_max)
    for (double lam : c.sweep_lambda) jobs.push_back({n, lam});

  const auto sweeps = io::parallel_map<std::vector<double>>(jobs.size(), threads, [&](std::size_t i) {
    std::vector<double> gaps;
    for (double d : c.sweep_delta_m) {
      const auto p = lattice::ModelParams::from_bare_mass(c.L, m0_sq - d, m0_sq, jobs[i].lambda, jobs[i].n_max);
      gaps.push_back(fock::mass_gap(p));
    }
    return gaps;
  });
  {
    CsvWriter w(out / "gap_vs_delta.csv",
                {{"n_max", "1"}, {"lambda", "1/a^2"}, {"delta_m", "1/a^2"}, {"m_sq", "1/a^2"}, {"gap", "1/a"}});
    for (std::size_t i = 0; i < jobs.size(); ++i)
      for (std::size_t k = 0; k < c.sweep_delta_m.size(); ++k)
        w.row(jobs[i].n_max, jobs[i].lambda, c.sweep_delta_m[k], m0_sq - c.sweep_delta_m[k], sweeps[i][k]);
    o.files.push_back(w.path());
  }

  struct Circle {
    double delta_m = std::nan("");
    double gap = std::nan("");
    std::string error;
  };
  const auto circles = io::parallel_map<Circle>(jobs.size(), threads, [&](std::size_t i) {
    Circle cc;
    try {
      cc.delta_m = fock::self_consistent_counterterm(c.L, m0_sq, jobs[i].lambda, jobs[i].n_max);
      cc.gap = std::sqrt(m0_sq - cc.delta_m);
    } catch (const NumericalError& e) {
      cc.error = e.what();
    }
    return cc;
  });
  json points = json::array();
  {
    CsvWriter w(out / "counterterm_roots.csv",
                {{"n_max", "1"}, {"lambda", "1/a^2"}, {"delta_m", "1/a^2"}, {"gap", "1/a"}, {"ok", "1"}});
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const bool ok = circles[i].error.empty();
      w.row(jobs[i].n_max, jobs[i].lambda, circles[i].delta_m, circles[i].gap, ok);
      json p = {{"n_max", jobs[i].n_max},
                {"lambda", jobs[i].lambda},
                {"delta_m", detail::finite_or_null(circles[i].delta_m)},
                {"gap", detail::finite_or_null(circles[i].gap)},
                {"ok", ok}};
      if (!ok) p["error"] = circles[i].error;
      points.push_back(p);
    }
    o.files.push_back(w.path());
  }
  o.record["points"] = points;
  return o;
}

/// Critical curves at fixed target gaps, gap sweeps at fixed bare mass and
/// the power-law fits near the gap minimum.
inline RunOutput cmd_critical(const ExperimentConfig& c, const fs::path& out) {
  RunOutput o;
  const unsigned threads = io::resolve_threads(c.threads);

  struct CurveJob {
    double target;
    int n_max;
  };
  std::vector<CurveJob> cjobs;
  for (double t : c.target_gap_sq)
    for (int n : c.n_max) cjobs.push_back({t, n});
  const auto curves = io::parallel_map<std::vector<fock::CurvePoint>>(cjobs.size(), threads, [&](std::size_t i) {
    // Oscillator basis at the target mass, so the lambda = 0 root is exact.
    const lattice::ModelParams base{c.L, cjobs[i].target, 0.0, 0.0, cjobs[i].n_max};
    return fock::critical_curve(c.critical_lambda, cjobs[i].target, base);
  });
  json curve_json = json::array();
  {
    CsvWriter w(out / "critical_curve.csv", {{"target_gap_sq", "1/a^2"}, {"n_max", "1"}, {"lambda", "1/a^2"},
                                             {"m0_sq", "1/a^2"}, {"delta_m", "1/a^2"}, {"ok", "1"}});
    for (std::size_t i = 0; i < cjobs.size(); ++i) {
      int failed = 0;
      for (const auto& p : curves[i]) {
        w.row(cjobs[i].target, cjobs[i].n_max, p.lambda, p.m0_sq, p.delta_m, p.ok);
        failed += p.ok ? 0 : 1;
      }
      curve_json.push_back({{"target_gap_sq", cjobs[i].target}, {"n_max", cjobs[i].n_max}, {"failed_points", failed}});
    }
    o.files.push_back(w.path());
  }

  struct FitJob {
    double m0_sq;
    int n_max;
  };
  struct FitOut {
    std::vector<fock::GapPoint> sweep;
    std::optional<fock::CriticalFit> fit;
    std::vector<fock::GapPoint> window;
    std::string error;
  };
  std::vector<FitJob> fjobs;
  for (double m0 : c.fit_m0_sq)
    for (int n : c.fit_n_max) fjobs.push_back({m0, n});
  const auto fits = io::parallel_map<FitOut>(fjobs.size(), threads, [&](std::size_t i) {
    FitOut f;
    const auto base = lattice::ModelParams::from_bare_mass(c.L, c.m_sq, fjobs[i].m0_sq, 0.0, fjobs[i].n_max);
    const fock::HamiltonianTerms terms(base);
    for (double lam : c.fit_lambda) f.sweep.push_back({lam, fock::gap_at(terms, base.delta_m, lam)});
    try {
      f.window = fock::select_precritical_window(f.sweep, static_cast<std::size_t>(c.window), c.plateau_fraction);
      f.fit = fock::critical_exponent_fit(f.window);
    } catch (const std::exception& e) {
      f.error = e.what();
    }
    return f;
  });
  json fit_json = json::array();
  {
    CsvWriter sweep(out / "critical_gap.csv", {{"m0_sq", "1/a^2"}, {"n_max", "1"}, {"lambda", "1/a^2"}, {"gap", "1/a"}});
    CsvWriter slopes(out / "critical_slopes.csv",
                     {{"m0_sq", "1/a^2"}, {"n_max", "1"}, {"lambda_mid", "1/a^2"}, {"dgap_dlambda", "a"}});
    CsvWriter table(out / "critical_fits.csv",
                    {{"m0_sq", "1/a^2"}, {"n_max", "1"}, {"lambda_c", "1/a^2"}, {"nu", "1"}, {"amplitude", "1"},
                     {"rms_residual", "1/a"}, {"window_lo", "1/a^2"}, {"window_hi", "1/a^2"}, {"converged", "1"}});
    for (std::size_t i = 0; i < fjobs.size(); ++i) {
      const auto& f = fits[i];
      for (const auto& p : f.sweep) sweep.row(fjobs[i].m0_sq, fjobs[i].n_max, p.lambda, p.gap);
      for (const auto& s : fock::slope_series(f.sweep)) slopes.row(fjobs[i].m0_sq, fjobs[i].n_max, s.lambda, s.gap);
      json rec = {{"m0_sq", fjobs[i].m0_sq}, {"n_max", fjobs[i].n_max}};
      if (f.fit) {
        const auto& fit = *f.fit;
        table.row(fjobs[i].m0_sq, fjobs[i].n_max, fit.lambda_c, fit.nu, fit.amplitude, fit.residual, fit.window.first,
                  fit.window.second, fit.converged);
        json sl = json::array();
        for (const auto& s : fit.slopes) sl.push_back({{"lambda_mid", s.lambda}, {"slope", s.gap}});
        rec.update({{"lambda_c", fit.lambda_c},
                    {"nu", fit.nu},
                    {"amplitude", fit.amplitude},
                    {"rms_residual", fit.residual},
                    {"window", {fit.window.first, fit.window.second}},
                    {"slopes", sl},
                    {"iterations", fit.iterations},
                    {"converged", fit.converged}});
      } else {
        table.row(fjobs[i].m0_sq, fjobs[i].n_max, std::nan(""), std::nan(""), std::nan(""), std::nan(""), std::nan(""),
                  std::nan(""), false);
        rec["error"] = f.error;
      }
      fit_json.push_back(rec);
    }
    o.files.insert(o.files.end(), {sweep.path(), slopes.path(), table.path()});
  }
  o.record["curves"] = curve_json;
  o.record["fits"] = fit_json;
  return o;
}

/// Oracle reference for one VQE point: lowest eigenvalues of the two
/// sector blocks.
struct OracleGap {
  double e0 = 0.0;
  double e1 = 0.0;
  [[nodiscard]] double gap() const { return e1 - e0; }
};

inline OracleGap oracle_gap(const lattice::ModelParams& p) {
  const auto [s0, s1] = vqe::gap_sectors(p);
  return {fock::exact_spectrum(s0.block).eigenvalues.front(), fock::exact_spectrum(s1.block).eigenvalues.front()};
}

/// Acceptance thresholds applied to the VQE benchmark table.
inline constexpr double kExactTolerance = 1e-6;
inline constexpr double kProductExcessLo = 0.0005;
inline constexpr double kProductExcessHi = 0.05;

inline RunOutput cmd_vqe(const ExperimentConfig& c, const fs::path& out) {
  struct Job {
    std::size_t backend;
    std::string ansatz;
    int n_max;
    double lambda;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t b = 0; b < c.backends.size(); ++b)
    for (const auto& a : c.ansatz)
      for (int n : c.n_max)
        for (double lam : c.lambdas) jobs.push_back({b, a, n, lam, derive_seed(c.seed, jobs.size())});

  struct Point {
    vqe::GapResult vqe;
    OracleGap oracle;
  };
  const auto points = io::parallel_map<Point>(jobs.size(), io::resolve_threads(c.threads), [&](std::size_t i) {
    const auto& j = jobs[i];
    try {
      const auto p = c.model(j.lambda, j.n_max);
      return Point{vqe::mass_gap_vqe(p, c.backends[j.backend].spec(), sim::parse_ansatz(j.ansatz), j.seed),
                   oracle_gap(p)};
    } catch (const ValidationError& e) {
      throw ValidationError("vqe point " + std::to_string(i) + " (lambda=" + io::fmt(j.lambda) + "): " + e.what());
    } catch (const std::exception& e) {
      throw NumericalError("vqe point " + std::to_string(i) + " (lambda=" + io::fmt(j.lambda) + "): " + e.what());
    }
  });

  RunOutput o;
  json recs = json::array();
  {
    CsvWriter w(out / "vqe.csv",
                {{"backend", "-"},      {"ansatz", "-"},        {"n_max", "1"},          {"lambda", "1/a^2"},
                 {"delta_m", "1/a^2"},  {"seed", "-"},          {"E0", "1/a"},           {"E0_std", "1/a"},
                 {"E1", "1/a"},         {"E1_std", "1/a"},      {"gap", "1/a"},          {"gap_std", "1/a"},
                 {"E0_raw", "1/a"},     {"E1_raw", "1/a"},      {"gap_raw", "1/a"},      {"E0_exact", "1/a"},
                 {"E1_exact", "1/a"},   {"gap_exact", "1/a"},   {"within_1sigma", "1"},  {"evaluations", "1"},
                 {"purification_iterations", "1"}});
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto& j = jobs[i];
      const auto& r = points[i].vqe;
      const auto& ex = points[i].oracle;
      const bool within = std::abs(r.gap - ex.gap()) <= r.gap_std;
      int purif = 0;
      for (const auto* side : {&r.ground, &r.excited})
        for (const auto& rep : side->purification) purif += rep.iterations;
      w.row(c.backends[j.backend].kind, j.ansatz, j.n_max, j.lambda, c.counterterm(), std::to_string(j.seed),
            r.ground.energy, r.ground.energy_std, r.excited.energy, r.excited.energy_std, r.gap, r.gap_std,
            r.ground.raw_energy, r.excited.raw_energy, r.raw_gap, ex.e0, ex.e1, ex.gap(), within,
            r.ground.evaluations + r.excited.evaluations, purif);
      json cal = json::array();
      for (const auto& rr : r.calibration.rates) cal.push_back({{"p0_given_1", rr.p0_given_1}, {"p1_given_0", rr.p1_given_0}});
      recs.push_back({{"index", i},
                      {"backend", c.backends[j.backend].kind},
                      {"ansatz", j.ansatz},
                      {"n_max", j.n_max},
                      {"lambda", j.lambda},
                      {"seed", j.seed},
                      {"shots", c.backends[j.backend].shots},
                      {"calibration", cal},
                      {"ground", detail::vqe_json(r.ground)},
                      {"excited", detail::vqe_json(r.excited)},
                      {"gap", r.gap},
                      {"gap_std", r.gap_std},
                      {"raw_gap", r.raw_gap},
                      {"exact", {{"E0", ex.e0}, {"E1", ex.e1}, {"gap", ex.gap()}}}});
    }
    o.files.push_back(w.path());
  }

  // Verdict table: one row per (backend, ansatz, n_max) group.
  json verdicts = json::array();
  {
    CsvWriter w(out / "verdicts.csv", {{"backend", "-"}, {"ansatz", "-"}, {"n_max", "1"}, {"check", "-"},
                                       {"value", "-"}, {"threshold", "-"}, {"pass", "1"}});
    auto emit = [&](const Job& g, const std::string& check, double value, const std::string& threshold, bool pass) {
      w.row(c.backends[g.backend].kind, g.ansatz, g.n_max, check, value, threshold, pass);
      verdicts.push_back({{"backend", c.backends[g.backend].kind},
                          {"ansatz", g.ansatz},
                          {"n_max", g.n_max},
                          {"check", check},
                          {"value", value},
                          {"threshold", threshold},
                          {"pass", pass}});
    };
    for (std::size_t start = 0; start < jobs.size(); start += c.lambdas.size()) {
      const auto& g = jobs[start];
      const auto kind = c.backends[g.backend].spec().kind;
      const auto ansatz = sim::parse_ansatz(g.ansatz);
      double worst = 0.0, min_excess = 1e300, max_excess = -1e300;
      int within = 0;
      bool mitigated_better = true;
      for (std::size_t k = start; k < start + c.lambdas.size(); ++k) {
        const auto& r = points[k].vqe;
        const auto& ex = points[k].oracle;
        worst = std::max({worst, std::abs(r.ground.energy - ex.e0), std::abs(r.excited.energy - ex.e1)});
        const double excess = (r.ground.energy - ex.e0) / std::abs(ex.e0);
        min_excess = std::min(min_excess, excess);
        max_excess = std::max(max_excess, excess);
        within += std::abs(r.gap - ex.gap()) <= r.gap_std ? 1 : 0;
        mitigated_better = mitigated_better &&
                           std::abs(r.ground.energy - ex.e0) < std::abs(r.ground.raw_energy - ex.e0) &&
                           std::abs(r.excited.energy - ex.e1) < std::abs(r.excited.raw_energy - ex.e1);
      }
      const int n = static_cast<int>(c.lambdas.size());
      if (kind == vqe::BackendKind::Exact && ansatz == sim::AnsatzKind::Entangled) {
        emit(g, "max_abs_energy_error", worst, "<= 1e-06", worst <= kExactTolerance);
      } else if (kind == vqe::BackendKind::Exact) {
        emit(g, "min_relative_E0_excess", min_excess, ">= 0.0005", min_excess >= kProductExcessLo);
        emit(g, "max_relative_E0_excess", max_excess, "<= 0.05", max_excess <= kProductExcessHi);
      } else {
        const int need = std::max(0, n - 2);
        emit(g, "gaps_within_1sigma", within, ">= " + std::to_string(need) + " of " + std::to_string(n), within >= need);
        if (kind == vqe::BackendKind::NoisyMitigated)
          emit(g, "mitigated_beats_raw_all_points", mitigated_better ? 1.0 : 0.0, "== 1", mitigated_better);
      }
    }
    o.files.push_back(w.path());
  }
  o.record["points"] = recs;
  o.record["verdicts"] = verdicts;
  return o;
}

/// Resolves the config, runs `cmd` into `out` and writes result.json.
inline RunOutput run(Command cmd, const ExperimentConfig& raw, const fs::path& out) {
  const auto c = config::resolve(raw, cmd);
  fs::create_directories(out);
  RunOutput o;
  switch (cmd) {
    case Command::Spectrum: o = cmd_spectrum(c, out); break;
    case Command::Counterterm: o = cmd_counterterm(c, out); break;
    case Command::Critical: o = cmd_critical(c, out); break;
    case Command::Vqe: o = cmd_vqe(c, out); break;
  }
  json rec = {{"schema", config::kResultSchema}, {"command", config::to_string(cmd)}, {"config", config::to_json(c, cmd)}};
  rec.update(o.record);
  json files = json::array();
  for (const auto& f : o.files) files.push_back(f.filename().string());
  rec["files"] = files;
  const auto path = out / "result.json";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << rec.dump(2) << '\n';
  o.files.push_back(path);
  o.record = std::move(rec);
  return o;
}

}  // namespace phi4q::experiments
