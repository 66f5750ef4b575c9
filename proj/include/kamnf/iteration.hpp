#pragma once

// Outer loop of the quadratic normal-form scheme.
//
// The driver repeatedly applies the one-step reduction (generator solve,
// symplectic step map, pullback) while the analyticity domain shrinks along a
// fixed geometric schedule that spends exactly half of the initial radii in
// total.  Each state is measured against the two smallness hypotheses that
// make the induction close:
//
//   H1: twist bookkeeping stays bounded (gamma <= 2 gamma0, eta <= eta0 <
//       beta) and the domain has lost at most half of each radius;
//   H2: the next scheduled loss delta_{n+1} is admissible and the current
//       perturbation satisfies eps_n < C^{-1} delta_{n+1}^nu.
//
// A sufficient smallness threshold kappa for eps_0 is computed a priori from
// a bounding lemma for double-exponential sequences; runs starting above
// kappa are still performed and judged empirically, with hypothesis failures
// recorded instead of enforced.  The composition of all step maps is
// maintained on a fixed verification domain together with a per-step
// deviation log.

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kamnf/fourier_taylor.hpp"
#include "kamnf/kolmogorov.hpp"

namespace kam {

// Default stop tolerance as a fraction of the initial twist size gamma0.
inline constexpr double kStopTolGammaFactor = 1e-13;
// Default eta0 as a fraction of the invertibility radius beta.
inline constexpr double kEtaZeroBetaFactor = 0.5;
// Slack applied to exact-boundary comparisons of scheduled radii.
inline constexpr double kScheduleBoundaryTol = 1e-12;

// Smallness threshold of the bounding lemma: returns the largest kappa (as a
// closed-form expression, not a scan) such that |x| < kappa implies both
//
//   sup_{n>=0}  |x|^{2^n} C1^n C2^{n^2}  < c1        (sup branch, kappa1)
//   sum_{n>=0} |x|^{2^n} C3^n C4^{n^2}  < c2        (sum branch, kappa2)
//
// with kappa1 = exp(min(-2 ln C2, -ln C1, ln c1) / ln 2) and kappa2 the same
// expression evaluated at (2 C4, 2 C3, c2); the result is min(kappa1,
// kappa2).  The sum branch doubles the constants so that the n-th term is
// dominated by c2 / (3 * 2^{n + n^2}), whose sum is below c2.  All six
// arguments must be positive and finite (ValidationError).
double kappa_threshold(double C1, double C2, double C3, double C4, double c1,
                       double c2);

// Geometric schedule of analyticity losses delta_n = delta_base / 3^n
// (n >= 1), so that sum_n delta_n = delta_base / 2 and the domain radii never
// drop below half their initial values.
struct IterationSchedule {
  double rho0 = 0.0;
  double delta0_strip = 0.0;  // initial strip half-width Delta_0
  double delta_base = 0.0;    // min(rho0, Delta_0, 1)
  double nu = 0.0;            // 2 (d + tau + 2)
  double C = 1.0;             // configured aggregate step constant
  double kappa = 0.0;         // sufficient smallness threshold for eps_0
  int max_steps = 8;
  double stop_tol = 0.0;
  double gamma0 = 0.0;        // twist size of the initial form
  double eta0 = 0.0;          // allowed Hessian drift, must stay < beta
  double beta = 0.0;          // invertibility radius of the reference Hessian

  // delta_n for n >= 1; zero for n <= 0 (no loss before the first step).
  double delta(int n) const;
  // Radii after n completed steps (closed form, exact at n = 0).
  double rho_after(int n) const;
  double strip_after(int n) const;
  // Fixed domain A_{3 rho0 / 8, 3 Delta0 / 8} on which the composed map is
  // stored; strictly inside the limit domain A_{rho0/2, Delta0/2}.
  AnalyticityDomain verification_domain() const;

  // Builds the schedule for an initial form: radii from the form's domain,
  // nu from its certified frequency, gamma0/beta from the twist, and kappa
  // from the bounding lemma applied to the double-exponential majorants of
  // the scheme (see kappa_threshold).  stop_tol <= 0 selects the default
  // kStopTolGammaFactor * gamma0; eta0 <= 0 selects kEtaZeroBetaFactor *
  // beta.  Throws ValidationError for C <= 0, max_steps < 0, or eta0 >=
  // beta.
  static IterationSchedule create(const KolmogorovForm& initial,
                                  const TwistData& twist, double C,
                                  int max_steps, double stop_tol = 0.0,
                                  double eta0 = 0.0);
};

// Outcome of measuring one state against the two hypotheses.  `n` is the
// number of completed steps, so the relevant next loss is delta_{n+1}.
struct HypothesisReport {
  bool h1_ok = false;
  bool h2_ok = false;
  bool gamma_ok = false;       // gamma <= 2 gamma0
  bool eta_ok = false;         // eta <= eta0 < beta
  bool radius_ok = false;      // rho0 >= rho >= rho0 / 2
  bool strip_ok = false;       // Delta0 >= Delta > Delta0 / 2
  bool delta_range_ok = false; // 0 < delta_{n+1} <= min(rho0/3, Delta0/3, 1)
  bool epsilon_ok = false;     // eps < C^{-1} delta_{n+1}^nu (true when eps = 0)
  double epsilon_threshold = 0.0;
  std::string details;
};

HypothesisReport check_hypotheses(const KolmogorovForm& form,
                                  const TwistData& twist,
                                  const IterationSchedule& schedule,
                                  int completed_steps);

// Running composition psi_n = phi_1 o ... o phi_n expressed in the inverse
// (old-from-new) direction on a fixed domain V:
//
//   theta = phi + W(phi),   r = A(phi) + B(phi) R,
//
// with W, A angle-only series vectors and B an angle-only matrix (row-major).
// psi_0 = Id.  Composing a further step appends the measured deviation
// |psi_{n} - psi_{n-1}|_V to the log.
class ComposedMap {
 public:
  // Dimension-zero placeholder; use identity() for a working map.
  ComposedMap() = default;

  static ComposedMap identity(int dim, int fourier_cutoff, int taylor_degree,
                              const AnalyticityDomain& domain);

  // Reassembles a map from serialized parts: dim angle shifts, dim action
  // offsets, dim*dim row-major action-matrix entries, all of the given
  // dimension (ValidationError/DimensionError otherwise).
  static ComposedMap from_parts(int dim, int fourier_cutoff, int taylor_degree,
                                const AnalyticityDomain& domain,
                                std::vector<FourierTaylorSeries> angle_shift,
                                std::vector<FourierTaylorSeries> action_offset,
                                std::vector<FourierTaylorSeries> action_matrix,
                                std::vector<double> deviations);

  int dim() const { return dim_; }
  int fourier_cutoff() const { return fourier_cutoff_; }
  int taylor_degree() const { return taylor_degree_; }
  const AnalyticityDomain& domain() const { return domain_; }

  const FourierTaylorSeries& angle_shift(int i) const;    // W_i
  const FourierTaylorSeries& action_offset(int i) const;  // A_i
  const FourierTaylorSeries& action_matrix(int i, int j) const;  // B_ij

  bool is_identity() const;

  // Per-step deviations |psi_n - psi_{n-1}|_V in composition order.
  const std::vector<double>& deviations() const { return deviations_; }
  double deviation_sum() const;

  // Majorant bound for the induced infinity norm of (d psi - Id) on V,
  // treating (R, phi) as the 2d coordinates.  The scheme keeps this below
  // 1/2, which makes psi a diffeomorphism onto its image.
  double jacobian_defect() const;

  // Old coordinates (r, theta) of the new point (R, phi); spans of length
  // dim.
  std::pair<std::vector<double>, std::vector<double>> evaluate(
      std::span<const double> action, std::span<const double> angle) const;

 private:
  int dim_ = 0;
  int fourier_cutoff_ = 0;
  int taylor_degree_ = 0;
  AnalyticityDomain domain_;
  std::vector<FourierTaylorSeries> W_;  // angle shift
  std::vector<FourierTaylorSeries> A_;  // action offset
  std::vector<FourierTaylorSeries> B_;  // action matrix, row-major
  std::vector<double> deviations_;

  friend ComposedMap compose_step(const ComposedMap& map,
                                  const SymplecticMapData& step);
};

// psi' = psi o phi_step for the inverse-direction data of one step:
//
//   W' = w + W o (Id + w),  A' = A o (Id + w) + [B o (Id + w)] a_step,
//   B' = [B o (Id + w)] b_step,
//
// truncated back to the map's fixed cutoffs.  The step must be at least as
// wide as the map's stored domain (ValidationError otherwise); the deviation
// of the new map from the old one is measured on that domain and appended.
ComposedMap compose_step(const ComposedMap& map, const SymplecticMapData& step);

enum class RunStatus {
  Converged,          // eps fell below stop_tol
  MaxStepsReached,    // schedule exhausted before stop_tol
  HypothesisFailed,   // a hypothesis failed on a run with eps_0 < kappa
  StepError,          // a step threw; records up to the failure are kept
};

// One measured state of the iteration.  Row n = 0 is the initial form (no
// step, delta_n = 0); row n >= 1 is the state after step n.  h1_ok / h2_ok
// are evaluated on that state with next loss delta_{n+1}.
struct IterationRecord {
  int n = 0;
  double delta_n = 0.0;
  double epsilon_n = 0.0;
  // Forward deviation |phi_n - Id| of step n on its shrunk domain.
  double epsilon_hat_n = 0.0;
  double gamma_n = 0.0;
  double eta_n = 0.0;
  bool h1_ok = true;
  bool h2_ok = true;
  // Measured step constant eps_n delta_n^{2 nu} / eps_{n-1}^2 (0 at n = 0).
  double c_audit = 0.0;
  double wall_time_ms = 0.0;
};

struct RunResult {
  RunStatus status = RunStatus::Converged;
  std::string message;
  bool converged = false;
  std::vector<IterationRecord> records;
  // State after the last completed step (the initial form when no step ran).
  std::optional<KolmogorovForm> final_form;
  // psi_n on the verification domain.
  ComposedMap map;
  // Least-squares slope of log eps_n against log eps_{n-1} over consecutive
  // positive pairs; quadratic convergence shows as a slope near 2.  NaN when
  // fewer than two pairs exist.
  double quadratic_slope = std::numeric_limits<double>::quiet_NaN();
  double deviation_sum = 0.0;
  double jacobian_defect = 0.0;
};

// Runs the scheme from `initial`, whose twist data provides the fixed
// reference Hessian mean used for all subsequent drift measurements.  Stops
// on eps < stop_tol (converged), on schedule exhaustion, on a hypothesis
// failure when eps_0 < kappa (above kappa the failure is only recorded and
// the run proceeds empirically), or on a thrown step error; records
// accumulated so far are returned in every case.
RunResult run_iteration(const KolmogorovForm& initial, const TwistData& twist,
                        const IterationSchedule& schedule);

}  // namespace kam
