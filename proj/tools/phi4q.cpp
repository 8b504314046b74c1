// phi4q: exact-diagonalization and VQE experiments for lattice phi^4 theory.
//
//   phi4q <spectrum|counterterm|critical|vqe> --config PATH [--out DIR]
//         [--seed N] [--threads N]
//
// Exit status: 0 success, 1 invalid input, 2 numerical failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "phi4q/errors.hpp"
#include "phi4q/experiment_config.hpp"
#include "phi4q/experiments.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output directory (default: out/<command>)");
  sub->add_option("--seed", o.seed, "master seed, overrides the config");
  sub->add_option("--threads", o.threads, "worker threads, 0 = all cores; overrides the config")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  using phi4q::config::Command;
  CLI::App app{"Lattice phi^4 spectra, counter terms, critical behavior and VQE benchmarks"};
  app.require_subcommand(1);
  Options opts;
  const std::pair<const char*, Command> commands[] = {
      {"spectrum", Command::Spectrum},
      {"counterterm", Command::Counterterm},
      {"critical", Command::Critical},
      {"vqe", Command::Vqe},
  };
  const char* help[] = {
      "eigenvalues and mass gaps over (n_max, lambda) grids",
      "first-order counter terms, gap vs delta_m sweeps and self-consistent roots",
      "critical curves at fixed gap and power-law fits of the gap",
      "variational mass-gap benchmark against the exact oracle",
  };
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < 4; ++i) {
    subs.push_back(app.add_subcommand(commands[i].first, help[i]));
    add_common(subs.back(), opts);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    Command cmd = Command::Spectrum;
    for (std::size_t i = 0; i < 4; ++i)
      if (subs[i]->parsed()) cmd = commands[i].second;
    auto cfg = phi4q::config::load(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.threads) cfg.threads = *opts.threads;
    const std::string out = opts.out.empty() ? std::string("out/") + phi4q::config::to_string(cmd) : opts.out;
    const auto result = phi4q::experiments::run(cmd, cfg, out);
    for (const auto& f : result.files) std::cout << f.string() << '\n';
    return 0;
  } catch (const phi4q::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const phi4q::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
