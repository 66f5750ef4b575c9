#pragma once

// Truncated Fourier-Taylor series
//
//   f(r, theta) = sum_{|k|_inf <= K, |m|_1 <= M} c_{k,m} r^m e^{i k.theta}
//
// on T^d x C^d, stored sparsely as a sorted coefficient table.  Values are
// immutable after construction; every operation is a pure function returning
// a new series.  Coefficients with magnitude below a relative drop threshold
// are not stored, and operations that push mass outside the cutoffs report it
// through TruncationStats.

#include <array>
#include <compare>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "kamnf/errors.hpp"

namespace kam {

using Complex = std::complex<double>;

// Hard cap on the number of degrees of freedom; the intended scale is d <= 3.
inline constexpr int kMaxDim = 4;
// Generous caps that keep multi-index arithmetic far from integer limits.
inline constexpr int kMaxFourierCutoff = 512;
inline constexpr int kMaxTaylorDegree = 64;
// A stored coefficient must exceed this fraction of the largest one.
inline constexpr double kDropThreshold = 1e-16;

// Polydisc |Im theta| <= delta_strip, |r|_inf <= rho on which strip norms are
// measured.
struct AnalyticityDomain {
  double rho = 0.0;
  double delta_strip = 0.0;

  // Both radii reduced by delta; throws ValidationError if a radius would
  // become negative.
  AnalyticityDomain shrink(double delta) const;
};

// Fourier mode k and Taylor powers m of one term; entries beyond the series
// dimension stay zero so the default lexicographic order is canonical.
struct TermIndex {
  std::array<int16_t, kMaxDim> k{};
  std::array<int16_t, kMaxDim> m{};

  friend auto operator<=>(const TermIndex&, const TermIndex&) = default;

  int k_sup() const;      // |k|_inf
  int k_abs_sum() const;  // |k|_1
  int degree() const;     // |m|_1
};

// Convenience builders for the common low-dimensional cases.
TermIndex make_index(std::span<const int> k, std::span<const int> m);
TermIndex make_index(std::initializer_list<int> k, std::initializer_list<int> m);

struct Term {
  TermIndex index;
  Complex coeff;
};

// Mass lost by an operation: coefficients cut at the cutoffs or the drop
// threshold, plus spectral mass found above the cutoff when re-expanding on a
// grid (which indicates aliasing).
struct TruncationStats {
  double discarded_mass = 0.0;
  double aliasing_mass = 0.0;
  bool aliasing_warning = false;

  void merge(const TruncationStats& other);
};

// Relative level of above-cutoff spectral mass that raises aliasing_warning.
inline constexpr double kAliasingWarnThreshold = 1e-10;

class FourierTaylorSeries {
 public:
  // Dimension-zero placeholder so containers can default-construct; any
  // arithmetic on it throws DimensionError.
  FourierTaylorSeries() = default;

  // Normalizes the given terms: sums duplicates, truncates to the cutoffs,
  // applies the drop threshold, and sorts canonically.
  FourierTaylorSeries(int dim, int fourier_cutoff, int taylor_degree,
                      std::vector<Term> terms, TruncationStats* stats = nullptr,
                      double drop_threshold = kDropThreshold);

  static FourierTaylorSeries zero(int dim, int fourier_cutoff, int taylor_degree);
  static FourierTaylorSeries constant(int dim, int fourier_cutoff,
                                      int taylor_degree, Complex value);

  int dim() const { return dim_; }
  int fourier_cutoff() const { return fourier_cutoff_; }
  int taylor_degree() const { return taylor_degree_; }

  std::span<const Term> terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  // Zero when the index is not stored.
  Complex coeff(const TermIndex& index) const;
  double max_abs_coeff() const;

  // True when c_{-k,m} = conj(c_{k,m}) within tol relative to the largest
  // coefficient, i.e. the series takes real values at real arguments.
  bool is_conjugate_symmetric(double tol = 1e-12) const;

 private:
  int dim_ = 0;
  int fourier_cutoff_ = 0;
  int taylor_degree_ = 0;
  std::vector<Term> terms_;
};

// --- arithmetic -----------------------------------------------------------

// Sum and difference with cutoffs max(K1,K2), max(M1,M2).
FourierTaylorSeries add(const FourierTaylorSeries& f, const FourierTaylorSeries& g);
FourierTaylorSeries sub(const FourierTaylorSeries& f, const FourierTaylorSeries& g);
FourierTaylorSeries scale(const FourierTaylorSeries& f, Complex factor);

// Cauchy product truncated to cutoffs max(K1,K2), max(M1,M2); cut mass is
// reported through stats.
FourierTaylorSeries multiply(const FourierTaylorSeries& f,
                             const FourierTaylorSeries& g,
                             TruncationStats* stats = nullptr);

inline FourierTaylorSeries operator+(const FourierTaylorSeries& f,
                                     const FourierTaylorSeries& g) {
  return add(f, g);
}
inline FourierTaylorSeries operator-(const FourierTaylorSeries& f,
                                     const FourierTaylorSeries& g) {
  return sub(f, g);
}
inline FourierTaylorSeries operator*(const FourierTaylorSeries& f,
                                     const FourierTaylorSeries& g) {
  return multiply(f, g);
}
inline FourierTaylorSeries operator*(Complex a, const FourierTaylorSeries& f) {
  return scale(f, a);
}
inline FourierTaylorSeries operator*(const FourierTaylorSeries& f, Complex a) {
  return scale(f, a);
}

// d/dtheta_j: c_{k,m} -> i k_j c_{k,m}.
FourierTaylorSeries partial_theta(const FourierTaylorSeries& f, int j);
// d/dr_j: c_{k,m} -> m_j c_{k,m-e_j}.
FourierTaylorSeries partial_r(const FourierTaylorSeries& f, int j);
// The k = 0 slice, still a function of r.
FourierTaylorSeries average(const FourierTaylorSeries& f);

// Retruncation to new cutoffs (used when composing series of unlike size).
FourierTaylorSeries truncated(const FourierTaylorSeries& f, int fourier_cutoff,
                              int taylor_degree, TruncationStats* stats = nullptr);

// The coordinate monomial r_axis as a series; taylor_degree must be >= 1.
FourierTaylorSeries action_monomial(int dim, int fourier_cutoff,
                                    int taylor_degree, int axis);

// (f + conj-reflected f)/2: enforces c_{-k,m} = conj(c_{k,m}) exactly.
FourierTaylorSeries symmetrized(const FourierTaylorSeries& f);

// Pointwise value at complex (r, theta); spans must have length dim.
Complex evaluate(const FourierTaylorSeries& f, std::span<const Complex> r,
                 std::span<const Complex> theta);
Complex evaluate(const FourierTaylorSeries& f, std::span<const double> r,
                 std::span<const double> theta);

// Weighted coefficient norm
//
//   |f|_{rho,Delta} = sum |c_{k,m}| rho^{|m|_1} e^{Delta |k|_1},
//
// an upper bound for |f| on the domain.  Throws MajorantOverflowError when
// the sum is not finite.
double strip_norm_majorant(const FourierTaylorSeries& f,
                           const AnalyticityDomain& domain);

// --- angle substitution ---------------------------------------------------

// Reusable substitution operator theta -> theta + v(theta) for a fixed
// angle-only shift v.  Sampling happens on a uniform grid with a
// power-of-two point count >= 2(2K+1) per axis, followed by discrete Fourier
// re-expansion, so the result is exact (up to rounding) whenever the composed
// function has no modes above the grid Nyquist band; mass found between the
// output cutoff and the Nyquist band is reported as aliasing.
class AngleComposition {
 public:
  // shift: dim angle-only series (taylor degree 0 terms only).
  AngleComposition(std::span<const FourierTaylorSeries> shift, int output_cutoff);

  FourierTaylorSeries apply(const FourierTaylorSeries& f,
                            TruncationStats* stats = nullptr) const;

  bool is_identity() const { return identity_; }
  int grid_points_per_axis() const { return grid_n_; }
  int output_cutoff() const { return cutoff_; }

 private:
  int dim_ = 0;
  int cutoff_ = 0;
  int grid_n_ = 0;
  std::size_t n_points_ = 0;
  bool identity_ = false;
  // p^j for p = e^{i(theta_a + v_a(theta))}, laid out as
  // [axis][point][j + cutoff], j = -cutoff..cutoff.
  std::vector<Complex> phase_powers_;
};

// f(r, theta + v(theta)) with output cutoff max(K_f, K_v).
FourierTaylorSeries compose_angle(const FourierTaylorSeries& f,
                                  std::span<const FourierTaylorSeries> shift,
                                  TruncationStats* stats = nullptr);

// --- action substitution --------------------------------------------------

// f(r + delta_r(r, theta), theta) expanded binomially, keeping only the
// terms that contain at least min_order factors from delta_r.  min_order 0
// is plain substitution; 1 gives f(r + dr) - f(r); 2 additionally removes
// the linear term t(dr).df/dr(r).  The split is exact term arithmetic, so
// the low orders are removed without cancellation error.
FourierTaylorSeries shift_actions(const FourierTaylorSeries& f,
                                  std::span<const FourierTaylorSeries> delta_r,
                                  int min_order = 0,
                                  TruncationStats* stats = nullptr);

}  // namespace kam
