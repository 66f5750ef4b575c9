#pragma once

// Orchestration: build the initial form from a configuration, run the
// iteration, run every a-posteriori check against fixed thresholds, and
// write the run artifacts
//
//   report.json     summary, resolved config, thresholds, pass/fail
//   iterations.csv  n,delta_n,eps_n,eps_hat_n,gamma_n,eta_n,ms
//   eps_vs_n.csv    remainder sizes for log-scale plotting
//   residuals.csv   verification residuals vs thresholds
//   plots.gp        gnuplot script rendering both
//   form.json       the initial normal form (self-contained)
//   map.json        the composed change of variables
//
// into the configured output directory.  Everything except the wall-time
// column of iterations.csv is byte-deterministic for a fixed configuration.

#include <filesystem>
#include <string>

#include "kamnf/config.hpp"
#include "kamnf/iteration.hpp"
#include "kamnf/verify.hpp"

namespace kam {

// Acceptance thresholds applied to the checks.
inline constexpr double kFreqErrThreshold = 1e-8;
inline constexpr double kAngleDepErrThreshold = 1e-8;
inline constexpr double kFlowDistanceThreshold = 1e-6;
inline constexpr double kFlowFrequencyRelThreshold = 1e-6;
inline constexpr double kSymplecticDefectThreshold = 1e-8;

struct VerificationSummary {
  ConjugacyResidual conjugacy;
  FlowInvariance flow;
  double symplectic_defect = 0.0;
  bool conjugacy_ok = false;
  bool flow_ok = false;
  bool symplectic_ok = false;
  std::string flow_error;  // set when the trajectory left the domain

  bool all_ok() const { return conjugacy_ok && flow_ok && symplectic_ok; }
};

// Runs the three checks on a computed map; an integrator blow-up is recorded
// as a failed flow check rather than thrown.
VerificationSummary verify_map(const KolmogorovForm& original,
                               const ComposedMap& map,
                               const VerifySettings& settings);

struct PipelineOutcome {
  RunResult run;
  VerificationSummary verification;
  std::filesystem::path report_path;
  int exit_code = 0;  // 0 iff converged and every check passed
  double total_ms = 0.0;
};

PipelineOutcome run_pipeline(const RunConfig& config);

// Re-runs the checks on the artifacts of a saved run; returns
// {freq_err, angle_dep_err, flow_dist, sympl_defect, ..., all_pass}.
Json verify_saved_run(const std::filesystem::path& report_path);

// Iteration-only runs over a geometric epsilon0 grid; reports each outcome,
// the largest converged / smallest failed sizes, and the certified threshold
// kappa for comparison.  Also writes <out_dir>/sweep.csv.
Json run_sweep(const RunConfig& base, double eps_min, double eps_max,
               int count);

// {"error": <kind>, "message": <text>} on a single line.
std::string error_json_line(const Error& error);
std::string error_json_line(const std::string& kind,
                            const std::string& message);

}  // namespace kam
