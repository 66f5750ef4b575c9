#pragma once

// Independent verification oracles for a finished run: everything the
// normal-form construction promises, re-checked by pointwise evaluation,
// finite differences, and numerical integration only.  Nothing here re-uses
// the series-composition machinery whose output is being judged, so these
// checks fail loudly if the pipeline conjugates to the wrong thing.

#include <cstdint>
#include <span>
#include <vector>

#include "kamnf/iteration.hpp"
#include "kamnf/kolmogorov.hpp"

namespace kam {

// Defaults for the finite-difference probes.
inline constexpr double kFreqFdStepFactor = 1e-5;  // of the action radius
inline constexpr double kJacobianFdStep = 1e-6;
inline constexpr std::uint64_t kVerifySeedDefault = 12345;
// Gauss-Newton refinements of the nearest-angle solve per trajectory sample.
inline constexpr int kTorusProjectionIterations = 3;

// Residuals of the conjugacy H o psi = const + omega.R + O(R^2), measured on
// a uniform angle grid by evaluating H at psi(R, theta) pointwise:
//
//   freq_err      = max over the grid and components of
//                   |d(H o psi)/dR_a (0, theta) - omega_a|,
//                   central differences of step fd_step, Richardson-
//                   extrapolated once (fourth-order);
//   angle_dep_err = max - min over the grid of (H o psi)(0, theta).
struct ConjugacyResidual {
  double freq_err = 0.0;
  double angle_dep_err = 0.0;
  int grid_points = 0;
  double fd_step = 0.0;
};

// grid_per_axis angle samples per dimension; fd_step <= 0 selects
// kFreqFdStepFactor * (action radius of the original form's domain).
ConjugacyResidual conjugacy_residual(const KolmogorovForm& original,
                                     const ComposedMap& map,
                                     const FrequencyVector& omega,
                                     int grid_per_axis = 64,
                                     double fd_step = 0.0);

// Invariance of the computed torus {psi(0, theta)} under the true flow of
// the original Hamiltonian: integrates Hamilton's equations
//
//   theta-dot = dH/dr,   r-dot = -dH/dtheta
//
// from psi(0, theta0) with fixed-step fourth-order Runge-Kutta and measures
// at every step the distance to the torus via a nearest-angle Gauss-Newton
// solve seeded by the linear flow theta0 + omega t.  The angle history is
// also fit per component by least squares, so a wrong internal frequency
// shows up as fitted_frequency drifting from omega.
struct FlowInvariance {
  double max_distance = 0.0;
  std::vector<double> fitted_frequency;
  // max_a |fitted_a - omega_a| / |omega_a|.
  double frequency_rel_err = 0.0;
  long steps = 0;
};

// Throws IntegratorError when the trajectory leaves the analyticity domain
// or becomes non-finite, ValidationError for nonpositive T or dt.
FlowInvariance flow_invariance(const KolmogorovForm& original,
                               const ComposedMap& map,
                               std::span<const double> theta0, double T,
                               double dt);

// Symplecticity of the map at `samples` random real points of its domain:
// builds the finite-difference Jacobian J in the coordinates z = (R, phi)
// and returns the largest entry of |J^T Omega J - Omega| seen, with Omega
// the standard canonical matrix pairing each action with its angle.
double symplectic_check(const ComposedMap& map, int samples,
                        std::uint64_t seed = kVerifySeedDefault,
                        double fd_step = kJacobianFdStep);

}  // namespace kam
