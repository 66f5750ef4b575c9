#pragma once

// The linearized conjugacy (cohomological) equation
//
//   L_omega f = g,   L_omega = sum_i omega_i d/dtheta_i,
//
// solved mode-by-mode in Fourier space: each coefficient divides by the small
// divisor i(omega.k), which exists for k != 0 exactly when omega is
// non-resonant.  The solution loses analyticity: its strip norm on a narrower
// strip Delta - delta is controlled by the norm-loss constant `lemma_bound`.

#include "kamnf/diophantine.hpp"
#include "kamnf/fourier_taylor.hpp"

namespace kam {

// |omega.k| below this fraction of |omega|_2 counts as numerically resonant.
inline constexpr double kDivisorFloorFactor = 1e-13;

// Relative size under which a nonzero angular mean is treated as rounding
// dust and skipped rather than rejected.
inline constexpr double kMeanDustTolerance = 1e-12;

// L_omega f: term-wise multiplication by i(omega.k).
FourierTaylorSeries lie_derivative(const FourierTaylorSeries& f,
                                   const FrequencyVector& omega);

// The unique zero-mean solution of L_omega f = g, f_k = g_k / (i omega.k).
// No drop threshold is applied to the result, so L_omega(solve(g)) recovers g
// exactly up to one rounding per coefficient.
//
// pre:  g has zero angular mean per r-monomial (k = 0 coefficients at most
//       kMeanDustTolerance relative to the largest coefficient are skipped);
//       omega carries a certificate with scan_depth >= g.fourier_cutoff().
// errors: ZeroMeanError (mean too large), SmallDivisorError when some
//       |omega.k| < divisor_floor_factor * |omega|_2, ValidationError for a
//       missing or too-shallow certificate, DimensionError on dim mismatch.
FourierTaylorSeries solve_cohomological(
    const FourierTaylorSeries& g, const FrequencyVector& omega,
    double divisor_floor_factor = kDivisorFloorFactor);

// Norm-loss constant of the solution operator between strips Delta and
// Delta - delta:
//
//   bound(delta, c, tau, d) = (1/c) delta^{-(tau+d)} I(tau, d),
//   I(tau, d) = integral over R^d of |x|_inf^tau e^{-|x|_inf} dx
//             = d 2^d Gamma(tau + d)   (closed form by shell integration).
//
// pre: delta > 0, c > 0, d >= 1, tau > -d.  errors: ValidationError.
double lemma_bound(double delta, double c, double tau, int d);

}  // namespace kam
