#pragma once

// One step of the quadratic normal-form scheme for a near-integrable
// Hamiltonian in Kolmogorov form
//
//   H(r, theta) = m + omega.r + (1/2) r.S(theta).r + eps h(r, theta) + g(r, theta),
//
// with S an angle-only symmetric matrix, |h| normalized to majorant <= 1, and
// g = O(r^3).  The step solves a linear system for a generating function,
// builds the induced symplectic change of variables, and pulls the
// Hamiltonian back, producing the same structure with eps replaced by an
// eps_bar of order eps^2 (at the price of shrinking the analyticity domain by
// delta).

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "kamnf/cohomology.hpp"
#include "kamnf/diophantine.hpp"
#include "kamnf/fourier_taylor.hpp"

namespace kam {

// --- tolerances -------------------------------------------------------------

// Coefficient-wise symmetry of S, relative to its largest coefficient.
inline constexpr double kHessianSymmetryTol = 1e-12;
// Conjugate (reality) symmetry of the stored series.
inline constexpr double kRealityTol = 1e-9;
// Slack over the exact normalization majorant(h) <= 1.
inline constexpr double kNormalizationSlack = 1e-9;
// Residual tolerance for the generator equations, relative to max(1, eps).
inline constexpr double kGeneratorResidualTol = 1e-12;
// Fixed-point tolerance for the inverse angle shift w = -v(Id + w).
inline constexpr double kInverseShiftTol = 1e-13;
inline constexpr int kInverseShiftMaxIterations = 100;
// Neumann-series tail cut for (Id + dv^T)^{-1} and its term cap.
inline constexpr double kNeumannTailTol = 1e-15;
inline constexpr int kNeumannMaxTerms = 200;
// The generator deviation must stay O(eps): majorant(DeltaR) <= factor * eps.
inline constexpr double kDeviationBudgetFactor = 1e6;
// Residue of degree < 3 left in the cubic collector after exact cancellation,
// relative to max(1, eps).
inline constexpr double kLowDegreeDustTol = 1e-10;
// Remainder majorants below this count as exactly zero (eps_bar floor).
inline constexpr double kEpsilonBarFloor = 1e-300;
// Discarded remainder tail above 1e-10 * eps^2 raises a truncation warning.
inline constexpr double kPullbackTailWarnFactor = 1e-10;

// --- the normal form --------------------------------------------------------

class KolmogorovForm {
 public:
  // S is the row-major d*d matrix of angle-only series.  All component
  // series must share the same dimension and cutoffs; the Taylor degree must
  // be at least 3 so that the cubic collector g and the quadratic remainder
  // pieces are representable.  Validates: S symmetric and angle-only, g free
  // of degree < 3 monomials, majorant(h) <= 1 (+ slack) on the domain,
  // conjugate symmetry of S, h, g, certified omega, eps >= 0, positive
  // domain.
  KolmogorovForm(double energy_offset, FrequencyVector omega,
                 std::vector<FourierTaylorSeries> S, double epsilon,
                 FourierTaylorSeries h, FourierTaylorSeries g,
                 AnalyticityDomain domain);

  int dim() const { return omega_.dim(); }
  int fourier_cutoff() const { return h_.fourier_cutoff(); }
  int taylor_degree() const { return h_.taylor_degree(); }

  double energy_offset() const { return energy_offset_; }
  const FrequencyVector& omega() const { return omega_; }
  const FourierTaylorSeries& S(int i, int j) const;
  std::span<const FourierTaylorSeries> S_flat() const { return S_; }
  double epsilon() const { return epsilon_; }
  const FourierTaylorSeries& h() const { return h_; }
  const FourierTaylorSeries& g() const { return g_; }
  const AnalyticityDomain& domain() const { return domain_; }

 private:
  double energy_offset_ = 0.0;
  FrequencyVector omega_;
  std::vector<FourierTaylorSeries> S_;
  double epsilon_ = 0.0;
  FourierTaylorSeries h_;
  FourierTaylorSeries g_;
  AnalyticityDomain domain_;
};

// H(r, theta) at a real point; the imaginary part (conjugate-symmetry dust)
// is discarded.
double evaluate_hamiltonian(const KolmogorovForm& form,
                            std::span<const double> r,
                            std::span<const double> theta);

// --- twist (non-degeneracy) data ---------------------------------------------

// The reference action Hessian S_hat = Re integral of S(theta) dtheta, its
// inverse S_tilde, the invertibility radius beta, and the aggregate sizes the
// iteration monitors.  beta = 1 / (|S_tilde| (1 + |S_tilde|)) in the induced
// infinity norm, which guarantees: any matrix M with |M - S_hat| < beta is
// invertible with |M^{-1} - S_tilde| < 1.
struct TwistData {
  Eigen::MatrixXd S_hat;
  Eigen::MatrixXd S_tilde;
  double beta = 0.0;
  // Majorant of S - S_hat on the form's domain (induced infinity norm).
  double eta = 0.0;
  // |m| + |S| + |g| + |S_hat| + |S_tilde| with series measured by majorant.
  double gamma = 0.0;

  // S_hat defaults to the mean of the form's own S; the iteration passes the
  // initial reference to keep it fixed across steps.  Throws TwistError when
  // the reference Hessian is singular.
  static TwistData from_form(const KolmogorovForm& form,
                             const Eigen::MatrixXd* reference = nullptr);
};

// --- jets and the generator --------------------------------------------------

// Taylor jets of h at r = 0: h = a + b.r + (1/2) r.c.r + tail.
struct Jets {
  FourierTaylorSeries a;                // h(0, theta)
  std::vector<FourierTaylorSeries> b;   // dh/dr_i (0, theta)
  std::vector<FourierTaylorSeries> c;   // row-major d2h/dr_i dr_j (0, theta)
  FourierTaylorSeries h_tail;           // the |m|_1 >= 3 part of h
};

Jets extract_jets(const KolmogorovForm& form);

// Solution of the linearized conjugacy system, solved in the fixed order
// u -> alpha -> v (alpha is what gives the v equation zero mean):
//
//   L_omega u = -eps a + eps (integral of a),
//   (integral of S) alpha = -integral(S du/dtheta + eps b),
//   L_omega v = -S (du/dtheta + alpha) - eps b.
struct GeneratorSolution {
  FourierTaylorSeries u;                // zero-mean scalar angle series
  std::vector<FourierTaylorSeries> v;   // zero-mean angle series, d entries
  std::vector<double> alpha;            // frequency-correcting action shift
  std::vector<FourierTaylorSeries> du;  // du[j] = du/dtheta_j
  std::vector<FourierTaylorSeries> dv;  // row-major dv[i*d+j] = dv_i/dtheta_j
  double epsilon = 0.0;                 // the eps the system was solved at
};

// Errors: resonance/small divisors from the cohomological solver, TwistError
// when the current mean of S leaves the invertibility radius of the
// reference, ZeroMeanError if the v equation fails its zero-mean assertion.
GeneratorSolution solve_generator(const KolmogorovForm& form,
                                  const TwistData& twist);

// The inverse angle shift w with (Id + w) = (Id + v)^{-1}, by fixed-point
// iteration w = -v(Id + w) to tolerance kInverseShiftTol in majorant norm.
// Throws ContractionError if the iteration does not settle.
std::vector<FourierTaylorSeries> invert_angle_shift(
    std::span<const FourierTaylorSeries> v, int* iterations = nullptr);

// --- the symplectic step map -------------------------------------------------

// Both directions of the change of variables generated by
// A = theta.R + u(theta) + alpha.theta + v(theta).R:
//
//   forward   (r, theta) -> (R, phi):  phi = theta + v(theta),
//             R = N(theta) (r - alpha - du(theta)),   N = (Id + dv^T)^{-1};
//   inverse   (R, phi) -> (r, theta):  theta = phi + w(phi),
//             r = a_step(phi) + b_step(phi) R,
//
// where a_step = (alpha + du) o (Id + w) and b_step = (Id + dv^T) o (Id + w).
struct SymplecticMapData {
  int dim = 0;
  std::vector<double> alpha;
  std::vector<FourierTaylorSeries> v;        // forward angle shift
  std::vector<FourierTaylorSeries> w;        // inverse angle shift
  std::vector<FourierTaylorSeries> du;
  std::vector<FourierTaylorSeries> dv;       // row-major
  std::vector<FourierTaylorSeries> neumann;  // row-major N = (Id + dv^T)^{-1}
  std::vector<FourierTaylorSeries> a_step;   // inverse action offset, new angle
  std::vector<FourierTaylorSeries> b_step;   // row-major, new angle
  AnalyticityDomain domain;                  // where the deviations are measured
  double deviation_forward = 0.0;            // majorant of |map - Id|
  double deviation_inverse = 0.0;            // majorant of |map^{-1} - Id|
  int w_iterations = 0;
  int neumann_terms = 0;
};

// domain: the shrunk domain the mapped form will live on.  Throws
// ContractionError when majorant(dv) >= 1 there (Neumann divergence).
SymplecticMapData build_map(const GeneratorSolution& gen,
                            const AnalyticityDomain& domain);

// --- the pullback ------------------------------------------------------------

struct PullbackDiagnostics {
  double eps_bar = 0.0;
  // eps_bar / eps^2, the delta-free quadratic ratio (0 when eps == 0).
  double quadratic_ratio = 0.0;
  // Majorant of the degree < 3 residue cancelled out of the cubic collector.
  double low_degree_dust = 0.0;
  // Truncation mass of the remainder construction and re-expansion only.
  TruncationStats remainder_stats;
  // All truncation mass, including the S_bar / g_bar assembly.
  TruncationStats stats;
  bool truncation_warning = false;
  int w_iterations = 0;
};

struct PullbackResult {
  KolmogorovForm form;
  PullbackDiagnostics diagnostics;
};

// Pulls the Hamiltonian back through the inverse step map and renormalizes:
// the output lives on the domain shrunk by delta, its eps is the measured
// strip majorant of the quadratic remainder there (floored to 0 below
// kEpsilonBarFloor), and its h has majorant <= 1 by construction.  Throws
// ValidationError when the generator deviation is not O(eps) or delta does
// not leave a positive domain.
PullbackResult pullback(const KolmogorovForm& form,
                        const GeneratorSolution& gen, double delta);

}  // namespace kam
