#pragma once

// Run configuration and JSON (de)serialization.
//
// A run is described by a JSON file:
//
//   {
//     "hamiltonian": "pendulum",            // registry name, or
//     // "hamiltonian": {"f0": <series|file>, "f1": <series|file>},
//     "omega": [1.0],                       // explicit Hamiltonians only
//     "epsilon0": 1e-4,                     // physical perturbation size
//     "tau": 0.5, "kmax": 200,              // Diophantine exponent + scan depth
//     "fourier_cutoff": 16, "taylor_degree": 4,
//     "rho": 1.0, "delta": 1.0,             // analyticity radii
//     "schedule": {"C": 1.0, "max_steps": 8, "stop_tol": 1e-300, "eta0": 0},
//     "verify":   {"flow_T": 100.0, "flow_dt": 1e-3, "theta0": [0.3],
//                  "grid_per_axis": 64, "symplectic_samples": 100,
//                  "seed": 12345},
//     "out_dir": "out"
//   }
//
// Registry entries fill every default (including omega, which cannot be
// overridden for them); explicit Hamiltonians are a pair of series in the
// schema {dim, fourier_cutoff, taylor_degree, terms: [{k, m, re, im}]},
// either inline or as a path relative to the config file.  f0 is the
// angle-independent integrable part whose gradient at r = 0 must equal
// omega; f1 is the perturbation shape, rescaled internally to unit strip
// norm. Unknown keys and type mismatches are rejected with the offending
// field named in the error.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kamnf/fourier_taylor.hpp"
#include "kamnf/iteration.hpp"
#include "kamnf/kolmogorov.hpp"
#include "kamnf/verify.hpp"

namespace kam {

using Json = nlohmann::json;

// --- series schema -----------------------------------------------------------

Json series_to_json(const FourierTaylorSeries& f);

// `field` prefixes error messages ("f1.terms[3].k: ...").  Terms outside the
// declared cutoffs are rejected rather than silently truncated.
FourierTaylorSeries series_from_json(const Json& j, const std::string& field);

// --- run configuration --------------------------------------------------------

struct VerifySettings {
  double flow_T = 100.0;
  double flow_dt = 1e-3;
  std::vector<double> theta0;  // start angle; filled with 0.3 per axis
  int grid_per_axis = 64;
  int symplectic_samples = 100;
  std::uint64_t seed = kVerifySeedDefault;
};

struct ScheduleSettings {
  double C = 1.0;
  int max_steps = 8;
  double stop_tol = 1e-300;  // remainder size declared "converged"
  double eta0 = 0.0;         // 0 selects the schedule's default
};

struct RunConfig {
  std::string preset;      // registry name; empty for explicit Hamiltonians
  FourierTaylorSeries f0;  // integrable part, materialized at (K, M)
  FourierTaylorSeries f1;  // perturbation shape, unnormalized
  std::vector<double> omega;
  double tau = 1.0;
  int certify_kmax = 200;
  int fourier_cutoff = 16;
  int taylor_degree = 4;
  double rho = 1.0;
  double delta_strip = 1.0;
  double epsilon0 = 0.0;
  ScheduleSettings schedule;
  VerifySettings verify;
  std::filesystem::path out_dir = "out";
};

// Shipped Hamiltonians: "pendulum" (d = 1) and "golden2d" (d = 2).
std::vector<std::string> registry_names();
RunConfig registry_config(const std::string& name);

// Field-validated parse; series-file paths resolve relative to `base_dir`.
RunConfig parse_config_json(const Json& j,
                            const std::filesystem::path& base_dir);
RunConfig parse_config(const std::filesystem::path& path);

// Fully-resolved settings (inline series for explicit Hamiltonians); parsing
// the result returns an equivalent configuration.
Json config_to_json(const RunConfig& config);

// Initial normal form from the resolved configuration: certifies omega at
// (tau, kmax), splits f0 into offset + frequency + quadratic part + cubic
// remainder, and rescales f1 to a unit-majorant perturbation shape so
// epsilon0 carries the physical size.
KolmogorovForm build_initial_form(const RunConfig& config);

// --- saved-run artifacts -------------------------------------------------------

Json form_to_json(const KolmogorovForm& form);
KolmogorovForm form_from_json(const Json& j);  // re-certifies omega

Json map_to_json(const ComposedMap& map);
ComposedMap map_from_json(const Json& j);

}  // namespace kam
