#include "kamnf/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "kamnf/errors.hpp"
#include "kamnf/kolmogorov.hpp"

namespace kam {

namespace {

std::string format_full(double x) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", x);
  return buffer;
}

std::string format_ms(double x) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.3f", x);
  return buffer;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) {
    throw Error("io", "cannot write '" + path.string() + "'");
  }
  out << text;
  if (!out.good()) {
    throw Error("io", "write to '" + path.string() + "' failed");
  }
}

Json load_json_file(const std::filesystem::path& path,
                    const std::string& what) {
  std::ifstream in(path);
  if (!in.good()) {
    throw ConfigError(what + ": cannot open '" + path.string() + "'");
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(what + ": invalid JSON: " + e.what());
  }
}

const char* status_name(RunStatus status) {
  switch (status) {
    case RunStatus::Converged:
      return "converged";
    case RunStatus::MaxStepsReached:
      return "max_steps_reached";
    case RunStatus::HypothesisFailed:
      return "hypothesis_failed";
    case RunStatus::StepError:
      return "step_error";
  }
  return "unknown";
}

std::string iterations_csv(const RunResult& run) {
  std::ostringstream out;
  out << "n,delta_n,eps_n,eps_hat_n,gamma_n,eta_n,ms\n";
  for (const IterationRecord& record : run.records) {
    out << record.n << ',' << format_full(record.delta_n) << ','
        << format_full(record.epsilon_n) << ','
        << format_full(record.epsilon_hat_n) << ','
        << format_full(record.gamma_n) << ',' << format_full(record.eta_n)
        << ',' << format_ms(record.wall_time_ms) << '\n';
  }
  return out.str();
}

std::string eps_plot_csv(const RunResult& run) {
  std::ostringstream out;
  out << "n,eps_n\n";
  for (const IterationRecord& record : run.records) {
    out << record.n << ',' << format_full(record.epsilon_n) << '\n';
  }
  return out.str();
}

std::string residuals_csv(const VerificationSummary& v) {
  std::ostringstream out;
  out << "check,value,threshold,pass\n";
  auto row = [&](const char* name, double value, double threshold, bool ok) {
    out << name << ',' << format_full(value) << ',' << format_full(threshold)
        << ',' << (ok ? 1 : 0) << '\n';
  };
  row("conjugacy_freq_err", v.conjugacy.freq_err, kFreqErrThreshold,
      v.conjugacy.freq_err < kFreqErrThreshold);
  row("conjugacy_angle_dep_err", v.conjugacy.angle_dep_err,
      kAngleDepErrThreshold, v.conjugacy.angle_dep_err < kAngleDepErrThreshold);
  row("flow_max_distance", v.flow.max_distance, kFlowDistanceThreshold,
      v.flow.max_distance < kFlowDistanceThreshold);
  row("flow_frequency_rel_err", v.flow.frequency_rel_err,
      kFlowFrequencyRelThreshold,
      v.flow.frequency_rel_err < kFlowFrequencyRelThreshold);
  row("symplectic_defect", v.symplectic_defect, kSymplecticDefectThreshold,
      v.symplectic_ok);
  return out.str();
}

std::string gnuplot_script() {
  return "# Renders the run artifacts written next to this script.\n"
         "set datafile separator comma\n"
         "set terminal pngcairo size 900,600\n"
         "set output 'eps_vs_n.png'\n"
         "set logscale y\n"
         "set xlabel 'step n'\n"
         "set ylabel 'remainder size eps_n'\n"
         "plot 'eps_vs_n.csv' skip 1 using 1:2 with linespoints"
         " title 'eps_n'\n"
         "unset logscale y\n"
         "set output 'residuals.png'\n"
         "set style data histogram\n"
         "set style fill solid 0.6\n"
         "set logscale y\n"
         "set ylabel 'residual'\n"
         "plot 'residuals.csv' skip 1 using 2:xtic(1) title 'value',"
         " '' skip 1 using 3 title 'threshold'\n";
}

Json verification_to_json(const VerificationSummary& v) {
  Json j{{"freq_err", v.conjugacy.freq_err},
         {"angle_dep_err", v.conjugacy.angle_dep_err},
         {"flow_max_distance", v.flow.max_distance},
         {"flow_frequency_rel_err", v.flow.frequency_rel_err},
         {"flow_fitted_frequency", v.flow.fitted_frequency},
         {"symplectic_defect", v.symplectic_defect},
         {"thresholds",
          Json{{"freq_err", kFreqErrThreshold},
               {"angle_dep_err", kAngleDepErrThreshold},
               {"flow_max_distance", kFlowDistanceThreshold},
               {"flow_frequency_rel_err", kFlowFrequencyRelThreshold},
               {"symplectic_defect", kSymplecticDefectThreshold}}},
         {"pass",
          Json{{"conjugacy", v.conjugacy_ok},
               {"flow", v.flow_ok},
               {"symplectic", v.symplectic_ok}}},
         {"all_pass", v.all_ok()}};
  if (!v.flow_error.empty()) j["flow_error"] = v.flow_error;
  return j;
}

}  // namespace

VerificationSummary verify_map(const KolmogorovForm& original,
                               const ComposedMap& map,
                               const VerifySettings& settings) {
  VerificationSummary out;
  out.conjugacy = conjugacy_residual(original, map, original.omega(),
                                     settings.grid_per_axis);
  out.conjugacy_ok = out.conjugacy.freq_err < kFreqErrThreshold &&
                     out.conjugacy.angle_dep_err < kAngleDepErrThreshold;
  std::vector<double> theta0 = settings.theta0;
  if (theta0.empty()) {
    theta0.assign(static_cast<std::size_t>(original.dim()), 0.3);
  }
  try {
    out.flow = flow_invariance(original, map, theta0, settings.flow_T,
                               settings.flow_dt);
    out.flow_ok = out.flow.max_distance < kFlowDistanceThreshold &&
                  out.flow.frequency_rel_err < kFlowFrequencyRelThreshold;
  } catch (const IntegratorError& e) {
    out.flow.max_distance = std::numeric_limits<double>::infinity();
    out.flow.frequency_rel_err = std::numeric_limits<double>::infinity();
    out.flow_ok = false;
    out.flow_error = e.what();
  }
  out.symplectic_defect =
      symplectic_check(map, settings.symplectic_samples, settings.seed);
  out.symplectic_ok = out.symplectic_defect < kSymplecticDefectThreshold;
  return out;
}

PipelineOutcome run_pipeline(const RunConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  KolmogorovForm form = build_initial_form(config);
  TwistData twist = TwistData::from_form(form, nullptr);
  IterationSchedule schedule = IterationSchedule::create(
      form, twist, config.schedule.C, config.schedule.max_steps,
      config.schedule.stop_tol, config.schedule.eta0);

  PipelineOutcome outcome;
  outcome.run = run_iteration(form, twist, schedule);
  outcome.verification = verify_map(form, outcome.run.map, config.verify);
  outcome.exit_code =
      (outcome.run.converged && outcome.verification.all_ok()) ? 0 : 1;
  outcome.total_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();

  std::filesystem::create_directories(config.out_dir);
  write_text(config.out_dir / "iterations.csv", iterations_csv(outcome.run));
  write_text(config.out_dir / "eps_vs_n.csv", eps_plot_csv(outcome.run));
  write_text(config.out_dir / "residuals.csv",
             residuals_csv(outcome.verification));
  write_text(config.out_dir / "plots.gp", gnuplot_script());
  write_text(config.out_dir / "form.json", form_to_json(form).dump(2) + "\n");
  write_text(config.out_dir / "map.json",
             map_to_json(outcome.run.map).dump(2) + "\n");

  const RunResult& run = outcome.run;
  Json report{
      {"version", 1},
      {"config", config_to_json(config)},
      {"run",
       Json{{"status", status_name(run.status)},
            {"message", run.message},
            {"converged", run.converged},
            {"iterations",
             run.records.empty() ? 0
                                 : static_cast<int>(run.records.size()) - 1},
            {"final_epsilon",
             run.records.empty() ? 0.0 : run.records.back().epsilon_n},
            {"epsilon0_normalized", form.epsilon()},
            {"quadratic_slope", run.quadratic_slope},
            {"deviation_sum", run.deviation_sum},
            {"jacobian_defect", run.jacobian_defect},
            {"kappa", schedule.kappa},
            {"nu", schedule.nu},
            {"total_ms", outcome.total_ms}}},
      {"verification", verification_to_json(outcome.verification)},
      {"artifacts", Json{{"iterations_csv", "iterations.csv"},
                         {"eps_plot_csv", "eps_vs_n.csv"},
                         {"residuals_csv", "residuals.csv"},
                         {"gnuplot", "plots.gp"},
                         {"form", "form.json"},
                         {"map", "map.json"}}}};
  outcome.report_path = config.out_dir / "report.json";
  write_text(outcome.report_path, report.dump(2) + "\n");
  return outcome;
}

Json verify_saved_run(const std::filesystem::path& report_path) {
  const Json report = load_json_file(report_path, "report");
  if (!report.is_object() || !report.contains("artifacts") ||
      !report.contains("config")) {
    throw ConfigError("report: missing artifacts or config section");
  }
  const auto dir = std::filesystem::absolute(report_path).parent_path();
  const Json& artifacts = report["artifacts"];
  if (!artifacts.contains("form") || !artifacts.contains("map")) {
    throw ConfigError("report.artifacts: must name form and map files");
  }
  KolmogorovForm form = form_from_json(
      load_json_file(dir / artifacts["form"].get<std::string>(), "form"));
  ComposedMap map = map_from_json(
      load_json_file(dir / artifacts["map"].get<std::string>(), "map"));
  const RunConfig config = parse_config_json(report["config"], dir);
  const VerificationSummary v = verify_map(form, map, config.verify);
  Json out{{"freq_err", v.conjugacy.freq_err},
           {"angle_dep_err", v.conjugacy.angle_dep_err},
           {"flow_dist", v.flow.max_distance},
           {"flow_freq_rel_err", v.flow.frequency_rel_err},
           {"sympl_defect", v.symplectic_defect},
           {"all_pass", v.all_ok()}};
  if (!v.flow_error.empty()) out["flow_error"] = v.flow_error;
  return out;
}

Json run_sweep(const RunConfig& base, double eps_min, double eps_max,
               int count) {
  if (!(eps_min > 0.0) || !(eps_max >= eps_min)) {
    throw ValidationError("sweep: need 0 < eps_min <= eps_max");
  }
  if (count < 1) throw ValidationError("sweep: need at least one grid point");

  Json grid = Json::array();
  std::ostringstream csv;
  csv << "epsilon0,converged,steps,final_eps,status\n";
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double largest_converged = 0.0;
  double smallest_failed = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const double eps =
        count == 1 ? eps_min
                   : std::exp(std::log(eps_min) +
                              (std::log(eps_max) - std::log(eps_min)) * i /
                                  (count - 1));
    RunConfig config = base;
    config.epsilon0 = eps;
    Json entry{{"epsilon0", eps}};
    try {
      KolmogorovForm form = build_initial_form(config);
      TwistData twist = TwistData::from_form(form, nullptr);
      IterationSchedule schedule = IterationSchedule::create(
          form, twist, config.schedule.C, config.schedule.max_steps,
          config.schedule.stop_tol, config.schedule.eta0);
      if (std::isnan(kappa)) kappa = schedule.kappa;
      const RunResult run = run_iteration(form, twist, schedule);
      const int steps =
          run.records.empty() ? 0 : static_cast<int>(run.records.size()) - 1;
      const double final_eps =
          run.records.empty() ? 0.0 : run.records.back().epsilon_n;
      entry["converged"] = run.converged;
      entry["status"] = status_name(run.status);
      entry["steps"] = steps;
      entry["final_eps"] = final_eps;
      csv << format_full(eps) << ',' << (run.converged ? 1 : 0) << ',' << steps
          << ',' << format_full(final_eps) << ',' << status_name(run.status)
          << '\n';
      if (run.converged) {
        largest_converged = std::max(largest_converged, eps);
      } else {
        smallest_failed = std::min(smallest_failed, eps);
      }
    } catch (const Error& e) {
      entry["converged"] = false;
      entry["status"] = "error";
      entry["error"] = e.kind();
      csv << format_full(eps) << ",0,0,nan,error:" << e.kind() << '\n';
      smallest_failed = std::min(smallest_failed, eps);
    }
    grid.push_back(entry);
  }

  std::filesystem::create_directories(base.out_dir);
  write_text(base.out_dir / "sweep.csv", csv.str());

  Json out{{"kappa", kappa}, {"grid", grid}};
  out["largest_converged"] =
      largest_converged > 0.0 ? Json(largest_converged) : Json(nullptr);
  out["smallest_failed"] = std::isfinite(smallest_failed)
                               ? Json(smallest_failed)
                               : Json(nullptr);
  return out;
}

std::string error_json_line(const Error& error) {
  return error_json_line(error.kind(), error.what());
}

std::string error_json_line(const std::string& kind,
                            const std::string& message) {
  return Json{{"error", kind}, {"message", message}}.dump();
}

}  // namespace kam
