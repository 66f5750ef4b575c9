#include "kamnf/diophantine.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace kam {
namespace {

void validate_omega(std::span<const double> omega) {
  if (omega.empty() || omega.size() > static_cast<std::size_t>(kMaxDim)) {
    throw ValidationError("frequency vector must have between 1 and " +
                          std::to_string(kMaxDim) + " components, got " +
                          std::to_string(omega.size()));
  }
  bool any_nonzero = false;
  for (double w : omega) {
    if (!std::isfinite(w)) {
      throw ValidationError("frequency vector has a non-finite component");
    }
    if (w != 0.0) any_nonzero = true;
  }
  if (!any_nonzero) {
    throw ValidationError("frequency vector must be nonzero");
  }
}

std::string mode_to_string(std::span<const int> k) {
  std::string s = "(";
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(k[i]);
  }
  s += ")";
  return s;
}

}  // namespace

ResonanceScan worst_resonance(std::span<const double> omega, double tau,
                              int kmax) {
  validate_omega(omega);
  if (!std::isfinite(tau)) {
    throw ValidationError("tau must be finite");
  }
  if (kmax < 1) {
    throw ValidationError("scan depth must be >= 1, got " +
                          std::to_string(kmax));
  }
  const int d = static_cast<int>(omega.size());

  ResonanceScan best;
  best.tau = tau;
  best.scan_depth = kmax;
  bool have_best = false;

  // Odometer over the box [-kmax, kmax]^d in lexicographic order; the
  // strict-less update therefore keeps the lexicographically smallest mode
  // among ties automatically.
  std::vector<int> k(static_cast<std::size_t>(d), -kmax);
  for (;;) {
    int first_nonzero = 0;
    int sup = 0;
    for (int i = 0; i < d; ++i) {
      if (first_nonzero == 0 && k[static_cast<std::size_t>(i)] != 0) {
        first_nonzero = k[static_cast<std::size_t>(i)];
      }
      sup = std::max(sup, std::abs(k[static_cast<std::size_t>(i)]));
    }
    // Canonical half lattice: skip k = 0 and the mirrored half.
    if (first_nonzero > 0) {
      double dot = 0.0;
      for (int i = 0; i < d; ++i) {
        dot += omega[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(i)];
      }
      const double value = std::abs(dot) * std::pow(static_cast<double>(sup), tau);
      if (!have_best || value < best.c_hat) {
        have_best = true;
        best.c_hat = value;
        best.divisor = std::abs(dot);
        best.k_star = k;
      }
    }
    // Advance the odometer.
    int axis = d - 1;
    while (axis >= 0) {
      if (++k[static_cast<std::size_t>(axis)] <= kmax) break;
      k[static_cast<std::size_t>(axis)] = -kmax;
      --axis;
    }
    if (axis < 0) break;
  }
  return best;
}

FrequencyVector::FrequencyVector(std::vector<double> omega)
    : omega_(std::move(omega)) {
  validate_omega(omega_);
}

FrequencyVector FrequencyVector::certify(std::vector<double> omega, double tau,
                                         int kmax) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ValidationError("certificate exponent tau must be positive");
  }
  ResonanceScan scan = worst_resonance(omega, tau, kmax);
  if (scan.c_hat == 0.0) {
    throw ResonantFrequencyError(
        "exact resonance omega.k = 0 at k = " + mode_to_string(scan.k_star),
        scan.k_star);
  }
  FrequencyVector out(std::move(omega));
  out.cert_ = DiophantineCertificate{scan.c_hat, tau, kmax};
  return out;
}

double FrequencyVector::norm2() const {
  double sum = 0.0;
  for (double w : omega_) sum += w * w;
  return std::sqrt(sum);
}

double FrequencyVector::mode_dot(const TermIndex& index) const {
  double dot = 0.0;
  for (int i = 0; i < dim(); ++i) {
    dot += omega_[static_cast<std::size_t>(i)] *
           static_cast<double>(index.k[static_cast<std::size_t>(i)]);
  }
  return dot;
}

}  // namespace kam
