// Command-line front end.
//
//   kamnf solve --config run.json [--out DIR] [--max-steps N] [--tol X]
//               [--seed S]
//   kamnf diophantine --omega 1,1.618 --tau 1 --kmax 50
//   kamnf cohomology-selftest [--trials N] [--kmax K] [--seed S]
//   kamnf verify --run out/report.json
//   kamnf sweep --config run.json --eps-min A --eps-max B [--count N]
//               [--out DIR] [--max-steps N]
//
// Results go to standard output as JSON; failures go to standard error as a
// single JSON line {"error": kind, "message": text} with exit status 2.
// `solve` exits 0 only when the run converged and every check passed.

#include <cstdint>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kamnf/cohomology.hpp"
#include "kamnf/config.hpp"
#include "kamnf/diophantine.hpp"
#include "kamnf/pipeline.hpp"

namespace {

using kam::Json;

struct SolveOptions {
  std::string config_path;
  std::string out_dir;
  int max_steps = -1;
  double tol = -1.0;
  std::uint64_t seed = 0;
  bool out_set = false;
  bool max_steps_set = false;
  bool tol_set = false;
  bool seed_set = false;
};

kam::RunConfig load_config(const SolveOptions& opts) {
  kam::RunConfig config = kam::parse_config(opts.config_path);
  if (opts.out_set) config.out_dir = opts.out_dir;
  if (opts.max_steps_set) {
    if (opts.max_steps < 0) {
      throw kam::ConfigError("--max-steps: must be non-negative");
    }
    config.schedule.max_steps = opts.max_steps;
  }
  if (opts.tol_set) {
    if (!(opts.tol >= 0.0)) {
      throw kam::ConfigError("--tol: must be non-negative");
    }
    config.schedule.stop_tol = opts.tol;
  }
  if (opts.seed_set) config.verify.seed = opts.seed;
  return config;
}

int run_solve(const SolveOptions& opts) {
  const kam::RunConfig config = load_config(opts);
  const kam::PipelineOutcome outcome = kam::run_pipeline(config);
  Json summary{
      {"report", outcome.report_path.string()},
      {"status", outcome.run.converged ? "converged" : "not_converged"},
      {"converged", outcome.run.converged},
      {"iterations", outcome.run.records.empty()
                         ? 0
                         : static_cast<int>(outcome.run.records.size()) - 1},
      {"final_epsilon", outcome.run.records.empty()
                            ? 0.0
                            : outcome.run.records.back().epsilon_n},
      {"verification_all_pass", outcome.verification.all_ok()},
      {"exit_code", outcome.exit_code}};
  std::cout << summary.dump() << "\n";
  return outcome.exit_code;
}

int run_diophantine(const std::vector<double>& omega, double tau, int kmax) {
  const kam::ResonanceScan scan = kam::worst_resonance(omega, tau, kmax);
  Json out{{"c_hat", scan.c_hat},
           {"k_star", scan.k_star},
           {"divisor", scan.divisor},
           {"tau", scan.tau},
           {"scan_depth", scan.scan_depth}};
  std::cout << out.dump() << "\n";
  return 0;
}

// Random zero-mean series solved and resubstituted; the recovered right-hand
// side must match to a relative 1e-12 in the weighted norm.
int run_cohomology_selftest(int trials, int kmax, std::uint64_t seed) {
  if (trials < 1) throw kam::ConfigError("--trials: must be at least 1");
  if (kmax < 1 || kmax > kam::kMaxFourierCutoff) {
    throw kam::ConfigError("--kmax: out of range");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  std::uniform_int_distribution<int> mode(-kmax, kmax);
  std::uniform_int_distribution<int> power(0, 2);

  const auto omega1 = kam::FrequencyVector::certify({1.0}, 0.5, kmax);
  const auto omega2 = kam::FrequencyVector::certify(
      {1.0, 0.5 * (1.0 + std::sqrt(5.0))}, 1.0, kmax);
  const kam::AnalyticityDomain domain{1.0, 1.0};

  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int d = 1 + trial % 2;
    std::vector<kam::Term> terms;
    for (int t = 0; t < 40; ++t) {
      std::vector<int> k(static_cast<std::size_t>(d), 0);
      bool nonzero = false;
      for (int a = 0; a < d; ++a) {
        k[static_cast<std::size_t>(a)] = mode(rng);
        nonzero = nonzero || k[static_cast<std::size_t>(a)] != 0;
      }
      if (!nonzero) continue;  // keep the angular mean exactly zero
      std::vector<int> m(static_cast<std::size_t>(d), 0);
      m[0] = power(rng);
      terms.push_back({kam::make_index(k, m),
                       kam::Complex(coeff(rng), coeff(rng))});
    }
    const kam::FourierTaylorSeries g(d, kmax, 2, std::move(terms));
    if (g.empty()) continue;
    const auto& omega = d == 1 ? omega1 : omega2;
    const auto f = kam::solve_cohomological(g, omega);
    const double residual = kam::strip_norm_majorant(
        kam::sub(kam::lie_derivative(f, omega), g), domain);
    const double scale = kam::strip_norm_majorant(g, domain);
    if (scale > 0.0) worst = std::max(worst, residual / scale);
  }
  const bool passed = worst < 1e-12;
  Json out{{"trials", trials},
           {"max_rel_residual", worst},
           {"tolerance", 1e-12},
           {"passed", passed}};
  std::cout << out.dump() << "\n";
  return passed ? 0 : 1;
}

int run_verify(const std::string& report_path) {
  const Json out = kam::verify_saved_run(report_path);
  std::cout << out.dump() << "\n";
  return out.value("all_pass", false) ? 0 : 1;
}

int run_sweep_cmd(const SolveOptions& opts, double eps_min, double eps_max,
                  int count) {
  const kam::RunConfig config = load_config(opts);
  const Json out = kam::run_sweep(config, eps_min, eps_max, count);
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Constructive normal-form iteration for near-integrable Hamiltonians"};
  app.require_subcommand(1);

  SolveOptions solve_opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", solve_opts.config_path,
                    "run configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", solve_opts.out_dir, "output directory override");
    sub->add_option("--max-steps", solve_opts.max_steps,
                    "iteration cap override");
    sub->add_option("--tol", solve_opts.tol, "stopping tolerance override");
  };

  auto* solve = app.add_subcommand(
      "solve", "run the full pipeline: iterate, check, report");
  add_common(solve);
  solve->add_option("--seed", solve_opts.seed,
                    "seed for the symplecticity sampling");

  auto* dio = app.add_subcommand(
      "diophantine", "exhaustive non-resonance scan of a frequency vector");
  std::vector<double> omega;
  double tau = 1.0;
  int kmax = 50;
  dio->add_option("--omega", omega, "frequency components, comma separated")
      ->required()
      ->delimiter(',');
  dio->add_option("--tau", tau, "Diophantine exponent")->required();
  dio->add_option("--kmax", kmax, "scan depth |k|_inf <= kmax");

  auto* selftest = app.add_subcommand(
      "cohomology-selftest",
      "solve random zero-mean series and check exact resubstitution");
  int trials = 100;
  int st_kmax = 16;
  std::uint64_t st_seed = 12345;
  selftest->add_option("--trials", trials, "number of random series");
  selftest->add_option("--kmax", st_kmax, "Fourier cutoff of the samples");
  selftest->add_option("--seed", st_seed, "sampling seed");

  auto* verify = app.add_subcommand(
      "verify", "re-run the a-posteriori checks on a saved run");
  std::string report_path;
  verify->add_option("--run", report_path, "path to a report.json")
      ->required()
      ->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand(
      "sweep", "iteration-only runs over a geometric epsilon0 grid");
  add_common(sweep);
  double eps_min = 0.0;
  double eps_max = 0.0;
  int count = 7;
  sweep->add_option("--eps-min", eps_min, "smallest epsilon0")->required();
  sweep->add_option("--eps-max", eps_max, "largest epsilon0")->required();
  sweep->add_option("--count", count, "grid size");

  try {
    app.parse(argc, argv);
    solve_opts.out_set = solve->count("--out") > 0 || sweep->count("--out") > 0;
    solve_opts.max_steps_set =
        solve->count("--max-steps") > 0 || sweep->count("--max-steps") > 0;
    solve_opts.tol_set =
        solve->count("--tol") > 0 || sweep->count("--tol") > 0;
    solve_opts.seed_set = solve->count("--seed") > 0;

    if (solve->parsed()) return run_solve(solve_opts);
    if (dio->parsed()) return run_diophantine(omega, tau, kmax);
    if (selftest->parsed()) {
      return run_cohomology_selftest(trials, st_kmax, st_seed);
    }
    if (verify->parsed()) return run_verify(report_path);
    if (sweep->parsed()) {
      return run_sweep_cmd(solve_opts, eps_min, eps_max, count);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const kam::Error& e) {
    std::cerr << kam::error_json_line(e) << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << kam::error_json_line("internal", e.what()) << std::endl;
    return 2;
  }
  return 0;
}
