#pragma once

// JSON experiment configuration. Apart from the bare mass (model.m0_sq or
// model.delta_m) every key is optional; missing keys take per-command
// defaults in resolve(). The resolved form serializes back to
// the same schema, so an echoed config reproduces its run.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "phi4q/circuit_sim.hpp"
#include "phi4q/errors.hpp"
#include "phi4q/lattice_model.hpp"
#include "phi4q/vqe.hpp"

namespace phi4q::config {

using nlohmann::json;

inline constexpr const char* kResultSchema = "phi4q.result/1";

enum class Command { Spectrum, Counterterm, Critical, Vqe };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Spectrum: return "spectrum";
    case Command::Counterterm: return "counterterm";
    case Command::Critical: return "critical";
    case Command::Vqe: return "vqe";
  }
  return "?";
}

/// Lattice size for first-order counter-term curves; nullopt is L -> inf.
using LatticeSize = std::optional<int>;

struct BackendConfig {
  std::string kind = "exact";
  std::int64_t shots = 8192;
  double readout_rate = 0.03;
  double p_dep = 0.02;
  bool readout_correction = true;
  bool purification = true;
  std::int64_t calibration_shots = 8192;
  double purification_tolerance = 1e-4;
  int purification_max_iter = 100;
  int repeats = 10;
  int max_evaluations = 600;
  double exact_tolerance = 1e-7;
  double sampled_tolerance_factor = 0.3;

  [[nodiscard]] vqe::BackendSpec spec() const {
    vqe::BackendSpec b;
    b.kind = vqe::parse_backend(kind);
    b.shots = shots;
    if (b.kind != vqe::BackendKind::Exact)
      b.noise = kind == "noisy_mitigated" ? sim::NoiseModel::uniform(2, readout_rate, p_dep, 0)
                                          : sim::NoiseModel::noiseless();
    b.readout_correction = readout_correction;
    b.purification = purification;
    b.calibration_shots = calibration_shots;
    b.purification_tolerance = purification_tolerance;
    b.purification_max_iter = purification_max_iter;
    b.repeats = repeats;
    b.max_evaluations = max_evaluations;
    b.exact_f_tolerance = exact_tolerance;
    b.sampled_tolerance_factor = sampled_tolerance_factor;
    return b;
  }
};

struct ExperimentConfig {
  // model
  int L = 2;
  double m_sq = 1.0;
  std::optional<double> m0_sq;
  std::optional<double> delta_m;
  std::vector<double> lambdas;
  std::vector<int> n_max;

  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency

  // spectrum
  int levels = 6;

  // counterterm
  std::vector<double> curve_m_sq;
  std::vector<LatticeSize> curve_L;
  std::vector<double> curve_lambda;
  std::vector<double> sweep_lambda;
  std::vector<double> sweep_delta_m;

  // critical
  std::vector<double> target_gap_sq;
  std::vector<double> critical_lambda;
  std::vector<double> fit_m0_sq;
  std::vector<double> fit_lambda;
  std::vector<int> fit_n_max;
  int window = 6;
  double plateau_fraction = 0.9;

  // vqe
  std::vector<std::string> ansatz;
  std::vector<BackendConfig> backends;

  [[nodiscard]] double bare_mass_sq() const { return m0_sq ? *m0_sq : m_sq + *delta_m; }
  [[nodiscard]] double counterterm() const { return delta_m ? *delta_m : *m0_sq - m_sq; }

  [[nodiscard]] lattice::ModelParams model(double lambda, int n) const {
    return lattice::ModelParams{L, m_sq, lambda, counterterm(), n};
  }
};

namespace detail {

inline std::vector<double> range_grid(double start, double stop, double step, const std::string& where) {
  if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(stop) || stop < start)
    throw ValidationError(where + ": range needs finite start <= stop and step > 0");
  const auto n = static_cast<long long>(std::floor((stop - start) / step + 1e-9));
  if (n > 1000000) throw ValidationError(where + ": range has too many points");
  std::vector<double> g;
  for (long long i = 0; i <= n; ++i) g.push_back(start + static_cast<double>(i) * step);
  return g;
}

inline std::vector<double> range_grid(const json& j, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (k != "start" && k != "stop" && k != "step")
      throw ValidationError(where + ": unknown range key '" + k + "'");
  for (const char* k : {"start", "stop", "step"})
    if (!j.contains(k) || !j[k].is_number()) throw ValidationError(where + ": range needs numeric '" + k + "'");
  return range_grid(j["start"].get<double>(), j["stop"].get<double>(), j["step"].get<double>(), where);
}

/// A number, an array of numbers, or {"start", "stop", "step"}.
inline std::vector<double> real_grid(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_object()) return range_grid(j, where);
  if (!j.is_array()) throw ValidationError(where + ": expected a number, an array or a range object");
  std::vector<double> g;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(where + "[" + std::to_string(i) + "]: expected a number");
    g.push_back(j[i].get<double>());
  }
  if (g.empty()) throw ValidationError(where + ": grid must be nonempty");
  return g;
}

inline std::vector<int> int_list(const json& j, const std::string& where) {
  std::vector<int> out;
  auto one = [&](const json& v, const std::string& w) {
    if (!v.is_number_integer()) throw ValidationError(w + ": expected an integer");
    out.push_back(v.get<int>());
  };
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) one(j[i], where + "[" + std::to_string(i) + "]");
  } else {
    one(j, where);
  }
  if (out.empty()) throw ValidationError(where + ": list must be nonempty");
  return out;
}

class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> known)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
    for (const auto& [k, v] : j_.items())
      if (!known.count(k)) throw ValidationError(path_ + ": unknown key '" + k + "'");
  }

  [[nodiscard]] bool has(const std::string& k) const { return j_.contains(k) && !j_[k].is_null(); }
  [[nodiscard]] const json& at(const std::string& k) const { return j_[k]; }
  [[nodiscard]] std::string where(const std::string& k) const { return path_ + "." + k; }

  template <class T>
  void read(const std::string& k, T& out) const {
    if (!has(k)) return;
    const json& v = j_[k];
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError(where(k) + ": expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ValidationError(where(k) + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.get<long long>() < 0 && !v.is_number_unsigned())
          throw ValidationError(where(k) + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError(where(k) + ": expected a number");
    } else {
      if (!v.is_string()) throw ValidationError(where(k) + ": expected a string");
    }
    out = v.get<T>();
  }

  void read_opt(const std::string& k, std::optional<double>& out) const {
    if (!has(k)) return;
    if (!j_[k].is_number()) throw ValidationError(where(k) + ": expected a number");
    out = j_[k].get<double>();
  }

 private:
  const json& j_;
  std::string path_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace detail

inline ExperimentConfig parse(const json& root) {
  using detail::Section;
  ExperimentConfig c;
  const json empty = json::object();
  const Section top(root, "config",
                    {"schema", "model", "seed", "threads", "spectrum", "counterterm", "critical", "vqe"});

  if (top.has("schema")) {
    std::string s;
    top.read("schema", s);
    if (s != "phi4q.config/1") throw ValidationError("config.schema: unsupported '" + s + "'");
  }

  const Section model(top.has("model") ? root["model"] : empty, "model",
                      {"L", "m_sq", "m0_sq", "delta_m", "lambda", "n_max"});
  model.read("L", c.L);
  model.read("m_sq", c.m_sq);
  model.read_opt("m0_sq", c.m0_sq);
  model.read_opt("delta_m", c.delta_m);
  if (model.has("lambda")) c.lambdas = detail::real_grid(model.at("lambda"), "model.lambda");
  if (model.has("n_max")) c.n_max = detail::int_list(model.at("n_max"), "model.n_max");
  top.read("seed", c.seed);
  top.read("threads", c.threads);

  if (top.has("spectrum")) {
    const Section s(root["spectrum"], "spectrum", {"levels"});
    s.read("levels", c.levels);
  }
  if (top.has("counterterm")) {
    const Section s(root["counterterm"], "counterterm",
                    {"curve_m_sq", "curve_L", "curve_lambda", "sweep_lambda", "sweep_delta_m"});
    if (s.has("curve_m_sq")) c.curve_m_sq = detail::real_grid(s.at("curve_m_sq"), s.where("curve_m_sq"));
    if (s.has("curve_L")) {
      const json& v = s.at("curve_L");
      if (!v.is_array() || v.empty()) throw ValidationError("counterterm.curve_L: expected a nonempty array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string w = "counterterm.curve_L[" + std::to_string(i) + "]";
        if (v[i].is_string() && v[i].get<std::string>() == "inf")
          c.curve_L.emplace_back(std::nullopt);
        else if (v[i].is_number_integer())
          c.curve_L.emplace_back(v[i].get<int>());
        else
          throw ValidationError(w + ": expected an integer or \"inf\"");
      }
    }
    if (s.has("curve_lambda")) c.curve_lambda = detail::real_grid(s.at("curve_lambda"), s.where("curve_lambda"));
    if (s.has("sweep_lambda")) c.sweep_lambda = detail::real_grid(s.at("sweep_lambda"), s.where("sweep_lambda"));
    if (s.has("sweep_delta_m")) c.sweep_delta_m = detail::real_grid(s.at("sweep_delta_m"), s.where("sweep_delta_m"));
  }
  if (top.has("critical")) {
    const Section s(root["critical"], "critical",
                    {"target_gap_sq", "lambda", "fit_m0_sq", "fit_lambda", "fit_n_max", "window",
                     "plateau_fraction"});
    if (s.has("target_gap_sq")) c.target_gap_sq = detail::real_grid(s.at("target_gap_sq"), s.where("target_gap_sq"));
    if (s.has("lambda")) c.critical_lambda = detail::real_grid(s.at("lambda"), s.where("lambda"));
    if (s.has("fit_m0_sq")) c.fit_m0_sq = detail::real_grid(s.at("fit_m0_sq"), s.where("fit_m0_sq"));
    if (s.has("fit_lambda")) c.fit_lambda = detail::real_grid(s.at("fit_lambda"), s.where("fit_lambda"));
    if (s.has("fit_n_max")) c.fit_n_max = detail::int_list(s.at("fit_n_max"), s.where("fit_n_max"));
    s.read("window", c.window);
    s.read("plateau_fraction", c.plateau_fraction);
  }
  if (top.has("vqe")) {
    const Section s(root["vqe"], "vqe", {"ansatz", "backends"});
    if (s.has("ansatz")) {
      const json& v = s.at("ansatz");
      if (!v.is_array() || v.empty()) throw ValidationError("vqe.ansatz: expected a nonempty array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) throw ValidationError("vqe.ansatz[" + std::to_string(i) + "]: expected a string");
        c.ansatz.push_back(v[i].get<std::string>());
      }
    }
    if (s.has("backends")) {
      const json& v = s.at("backends");
      if (!v.is_array() || v.empty()) throw ValidationError("vqe.backends: expected a nonempty array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Section b(v[i], "vqe.backends[" + std::to_string(i) + "]",
                        {"kind", "shots", "readout_rate", "p_dep", "readout_correction", "purification",
                         "calibration_shots", "purification_tolerance", "purification_max_iter", "repeats",
                         "max_evaluations", "exact_tolerance", "sampled_tolerance_factor"});
        BackendConfig bc;
        b.read("kind", bc.kind);
        b.read("shots", bc.shots);
        b.read("readout_rate", bc.readout_rate);
        b.read("p_dep", bc.p_dep);
        b.read("readout_correction", bc.readout_correction);
        b.read("purification", bc.purification);
        bc.calibration_shots = bc.shots;
        b.read("calibration_shots", bc.calibration_shots);
        b.read("purification_tolerance", bc.purification_tolerance);
        b.read("purification_max_iter", bc.purification_max_iter);
        b.read("repeats", bc.repeats);
        b.read("max_evaluations", bc.max_evaluations);
        b.read("exact_tolerance", bc.exact_tolerance);
        b.read("sampled_tolerance_factor", bc.sampled_tolerance_factor);
        c.backends.push_back(bc);
      }
    }
  }
  return c;
}

/// Parses JSON text; syntax errors carry the line and column.
inline ExperimentConfig parse_text(const std::string& text, const std::string& source = "config") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Map the byte offset to line:column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": invalid JSON (" << e.what() << ")";
    throw ValidationError(os.str());
  }
  try {
    return parse(j);
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

inline ExperimentConfig load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_text(ss.str(), path);
}

/// Fills command defaults and checks the result.
inline ExperimentConfig resolve(ExperimentConfig c, Command cmd) {
  using detail::require;
  require(c.m0_sq.has_value() != c.delta_m.has_value(), "model: give exactly one of m0_sq and delta_m");
  require(c.m_sq > 0.0 && std::isfinite(c.m_sq), "model.m_sq: must be > 0");
  require(c.L >= 1, "model.L: must be >= 1");
  require(std::isfinite(c.bare_mass_sq()), "model: bare mass must be finite");
  require(c.threads >= 0, "threads: must be >= 0");

  switch (cmd) {
    case Command::Spectrum:
      if (c.lambdas.empty()) c.lambdas = detail::range_grid(0.0, 25.0, 0.5, "model.lambda");
      if (c.n_max.empty()) c.n_max = {4, 8, 12};
      require(c.levels >= 1, "spectrum.levels: must be >= 1");
      break;
    case Command::Counterterm:
      if (c.n_max.empty()) c.n_max = {4, 8, 12};
      if (c.curve_m_sq.empty()) c.curve_m_sq = {0.1, 1.5};
      if (c.curve_L.empty()) c.curve_L = {8, 16, 32, 64, std::nullopt};
      if (c.curve_lambda.empty()) c.curve_lambda = detail::range_grid(0.0, 2.0, 0.05, "counterterm.curve_lambda");
      if (c.sweep_lambda.empty()) c.sweep_lambda = {6.0, 10.0, 24.0};
      if (c.sweep_delta_m.empty())
        c.sweep_delta_m = detail::range_grid(c.bare_mass_sq() - 8.0, c.bare_mass_sq() - 0.1, 0.1,
                                             "counterterm.sweep_delta_m");
      for (double m : c.curve_m_sq) require(m > 0.0, "counterterm.curve_m_sq: entries must be > 0");
      for (const auto& l : c.curve_L) require(!l || *l >= 1, "counterterm.curve_L: entries must be >= 1");
      for (double d : c.sweep_delta_m)
        require(c.bare_mass_sq() - d > 0.0,
                "counterterm.sweep_delta_m: every entry must leave m_sq = m0_sq - delta_m > 0");
      break;
    case Command::Critical:
      if (c.n_max.empty()) c.n_max = {4, 8, 12};
      if (c.target_gap_sq.empty()) c.target_gap_sq = {0.1, 0.25, 0.5};
      if (c.critical_lambda.empty()) c.critical_lambda = detail::range_grid(0.0, 10.0, 0.5, "critical.lambda");
      if (c.fit_m0_sq.empty()) c.fit_m0_sq = {-1.5, -2.5};
      if (c.fit_lambda.empty()) c.fit_lambda = detail::range_grid(0.0, 30.0, 0.5, "critical.fit_lambda");
      if (c.fit_n_max.empty()) c.fit_n_max = {8};
      for (double t : c.target_gap_sq) require(t > 0.0, "critical.target_gap_sq: entries must be > 0");
      for (int n : c.fit_n_max) require(n >= 2, "critical.fit_n_max: entries must be >= 2");
      require(c.window >= 4, "critical.window: must be >= 4");
      require(c.plateau_fraction > 0.0 && c.plateau_fraction <= 1.0,
              "critical.plateau_fraction: must lie in (0, 1]");
      break;
    case Command::Vqe:
      if (c.lambdas.empty()) c.lambdas = {2.0, 4.0, 6.0, 8.21, 10.0, 12.0, 14.0};
      if (c.n_max.empty()) c.n_max = {4};
      if (c.ansatz.empty()) c.ansatz = {"entangled", "product"};
      if (c.backends.empty()) {
        BackendConfig noisy;
        noisy.kind = "noisy_mitigated";
        c.backends = {BackendConfig{}, noisy};
      }
      for (int n : c.n_max) {
        require(n % 2 == 0, "model.n_max: parity blocking needs an even cutoff, got " + std::to_string(n));
        require(lattice::is_power_of_two(n),
                "model.n_max: qubit encoding needs a power-of-two cutoff, got " + std::to_string(n));
      }
      require(c.L == 2, "model.L: the vqe command supports L = 2 only");
      for (const auto& a : c.ansatz) sim::parse_ansatz(a);
      for (std::size_t i = 0; i < c.backends.size(); ++i) {
        try {
          c.backends[i].spec().validate();
        } catch (const ValidationError& e) {
          throw ValidationError("vqe.backends[" + std::to_string(i) + "]: " + e.what());
        }
      }
      break;
  }
  for (int n : c.n_max) require(n >= 2, "model.n_max: entries must be >= 2");
  return c;
}

inline json to_json(const BackendConfig& b) {
  return {{"kind", b.kind},
          {"shots", b.shots},
          {"readout_rate", b.readout_rate},
          {"p_dep", b.p_dep},
          {"readout_correction", b.readout_correction},
          {"purification", b.purification},
          {"calibration_shots", b.calibration_shots},
          {"purification_tolerance", b.purification_tolerance},
          {"purification_max_iter", b.purification_max_iter},
          {"repeats", b.repeats},
          {"max_evaluations", b.max_evaluations},
          {"exact_tolerance", b.exact_tolerance},
          {"sampled_tolerance_factor", b.sampled_tolerance_factor}};
}

/// Canonical config for `cmd`: only the model keys and the section that the
/// command reads.
inline json to_json(const ExperimentConfig& c, Command cmd) {
  json model = {{"L", c.L}, {"m_sq", c.m_sq}};
  if (c.m0_sq) model["m0_sq"] = *c.m0_sq;
  if (c.delta_m) model["delta_m"] = *c.delta_m;
  if (!c.lambdas.empty()) model["lambda"] = c.lambdas;
  model["n_max"] = c.n_max;
  json j = {{"schema", "phi4q.config/1"}, {"model", model}, {"seed", c.seed}, {"threads", c.threads}};
  switch (cmd) {
    case Command::Spectrum:
      j["spectrum"] = {{"levels", c.levels}};
      break;
    case Command::Counterterm: {
      json ls = json::array();
      for (const auto& l : c.curve_L) ls.push_back(l ? json(*l) : json("inf"));
      j["counterterm"] = {{"curve_m_sq", c.curve_m_sq},
                          {"curve_L", ls},
                          {"curve_lambda", c.curve_lambda},
                          {"sweep_lambda", c.sweep_lambda},
                          {"sweep_delta_m", c.sweep_delta_m}};
      break;
    }
    case Command::Critical:
      j["critical"] = {{"target_gap_sq", c.target_gap_sq}, {"lambda", c.critical_lambda},
                       {"fit_m0_sq", c.fit_m0_sq},         {"fit_lambda", c.fit_lambda},
                       {"fit_n_max", c.fit_n_max},         {"window", c.window},
                       {"plateau_fraction", c.plateau_fraction}};
      break;
    case Command::Vqe: {
      json bs = json::array();
      for (const auto& b : c.backends) bs.push_back(to_json(b));
      j["vqe"] = {{"ansatz", c.ansatz}, {"backends", bs}};
      break;
    }
  }
  return j;
}

}  // namespace phi4q::config
