#pragma once

// Resonance analysis of frequency vectors.
//
// A frequency omega in R^d is non-resonant of type (c, tau) up to depth Kmax
// when |omega.k| >= c / |k|_inf^tau for every integer mode 0 < |k|_inf <= Kmax.
// The sharp empirical constant is found by exhaustive scan,
//
//   c_hat = min_{0 < |k|_inf <= Kmax} |omega.k| |k|_inf^tau,
//
// and packaged as a finite-depth certificate.  A true Diophantine condition
// quantifies over all of Z^d, which no floating-point scan can decide; the
// certificate therefore always records its scan depth.

#include <optional>
#include <span>
#include <vector>

#include "kamnf/errors.hpp"
#include "kamnf/fourier_taylor.hpp"

namespace kam {

// Argmin data of the exhaustive scan.  Since |omega.k| = |omega.(-k)|, only
// the canonical half lattice (first nonzero component positive) is searched;
// ties are broken by the lexicographically smallest k.
struct ResonanceScan {
  double c_hat = 0.0;           // min |omega.k| |k|_inf^tau
  std::vector<int> k_star;      // argmin mode
  double divisor = 0.0;         // |omega.k_star|, before the |k|^tau weight
  double tau = 0.0;
  int scan_depth = 0;           // the Kmax that was scanned
};

// Exhaustive scan over 0 < |k|_inf <= kmax.  An exact resonance omega.k = 0
// is reported as c_hat = 0 with the resonant mode, not as an error.
// Throws ValidationError for omega = 0, empty/oversized omega, or kmax < 1.
ResonanceScan worst_resonance(std::span<const double> omega, double tau,
                              int kmax);

struct DiophantineCertificate {
  double c = 0.0;     // certified lower-bound constant (= scanned c_hat)
  double tau = 0.0;
  int scan_depth = 0;
};

// A frequency vector, optionally carrying a finite-depth non-resonance
// certificate.  The certificate is only created through `certify`, so its
// invariant |omega.k| >= c/|k|_inf^tau for 0 < |k|_inf <= scan_depth holds by
// construction of c as the scan minimum.
class FrequencyVector {
 public:
  explicit FrequencyVector(std::vector<double> omega);

  // Runs worst_resonance and attaches {c = c_hat, tau, kmax}.  Throws
  // ResonantFrequencyError when the scan finds an exact resonance and
  // ValidationError for tau <= 0 or malformed input.
  static FrequencyVector certify(std::vector<double> omega, double tau,
                                 int kmax);

  int dim() const { return static_cast<int>(omega_.size()); }
  std::span<const double> components() const { return omega_; }
  double operator[](int i) const { return omega_[static_cast<std::size_t>(i)]; }
  double norm2() const;  // Euclidean norm

  // omega.k for the Fourier mode of a term index (first dim() slots).
  double mode_dot(const TermIndex& index) const;

  const std::optional<DiophantineCertificate>& certificate() const {
    return cert_;
  }

 private:
  std::vector<double> omega_;
  std::optional<DiophantineCertificate> cert_;
};

}  // namespace kam
