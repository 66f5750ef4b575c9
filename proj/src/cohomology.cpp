#include "kamnf/cohomology.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace kam {
namespace {

void check_dims(const FourierTaylorSeries& f, const FrequencyVector& omega,
                const char* what) {
  if (f.dim() == 0) {
    throw DimensionError(std::string(what) +
                         ": series is a default-constructed placeholder");
  }
  if (f.dim() != omega.dim()) {
    throw DimensionError(std::string(what) + ": series dimension " +
                         std::to_string(f.dim()) +
                         " does not match frequency dimension " +
                         std::to_string(omega.dim()));
  }
}

std::vector<int> mode_of(const TermIndex& index, int dim) {
  std::vector<int> k(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    k[static_cast<std::size_t>(i)] = index.k[static_cast<std::size_t>(i)];
  }
  return k;
}

std::string mode_to_string(const std::vector<int>& k) {
  std::string s = "(";
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(k[i]);
  }
  s += ")";
  return s;
}

}  // namespace

FourierTaylorSeries lie_derivative(const FourierTaylorSeries& f,
                                   const FrequencyVector& omega) {
  check_dims(f, omega, "lie_derivative");
  std::vector<Term> terms;
  terms.reserve(f.size());
  for (const Term& t : f.terms()) {
    const double divisor = omega.mode_dot(t.index);
    terms.push_back({t.index, Complex(0.0, divisor) * t.coeff});
  }
  return FourierTaylorSeries(f.dim(), f.fourier_cutoff(), f.taylor_degree(),
                             std::move(terms), nullptr, 0.0);
}

FourierTaylorSeries solve_cohomological(const FourierTaylorSeries& g,
                                        const FrequencyVector& omega,
                                        double divisor_floor_factor) {
  check_dims(g, omega, "solve_cohomological");
  if (!omega.certificate().has_value()) {
    throw ValidationError(
        "solve_cohomological: frequency vector carries no non-resonance "
        "certificate");
  }
  if (omega.certificate()->scan_depth < g.fourier_cutoff()) {
    throw ValidationError(
        "solve_cohomological: certificate depth " +
        std::to_string(omega.certificate()->scan_depth) +
        " is shallower than the series Fourier cutoff " +
        std::to_string(g.fourier_cutoff()));
  }

  const double floor = divisor_floor_factor * omega.norm2();
  const double mean_dust = kMeanDustTolerance * g.max_abs_coeff();

  std::vector<Term> terms;
  terms.reserve(g.size());
  for (const Term& t : g.terms()) {
    if (t.index.k_sup() == 0) {
      if (std::abs(t.coeff) <= mean_dust) continue;  // rounding dust
      std::vector<int> powers(static_cast<std::size_t>(g.dim()));
      for (int i = 0; i < g.dim(); ++i) {
        powers[static_cast<std::size_t>(i)] =
            t.index.m[static_cast<std::size_t>(i)];
      }
      throw ZeroMeanError(
          "solve_cohomological: right-hand side has angular mean " +
          std::to_string(std::abs(t.coeff)) + " at r-powers " +
          mode_to_string(powers));
    }
    const double divisor = omega.mode_dot(t.index);
    if (std::abs(divisor) < floor) {
      std::vector<int> k = mode_of(t.index, g.dim());
      throw SmallDivisorError("solve_cohomological: divisor |omega.k| = " +
                                  std::to_string(std::abs(divisor)) +
                                  " below floor at k = " + mode_to_string(k),
                              std::move(k));
    }
    // f_k = g_k / (i divisor) = -i g_k / divisor.
    terms.push_back({t.index, t.coeff * Complex(0.0, -1.0 / divisor)});
  }
  return FourierTaylorSeries(g.dim(), g.fourier_cutoff(), g.taylor_degree(),
                             std::move(terms), nullptr, 0.0);
}

double lemma_bound(double delta, double c, double tau, int d) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw ValidationError("lemma_bound: delta must be positive");
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ValidationError("lemma_bound: c must be positive");
  }
  if (d < 1) {
    throw ValidationError("lemma_bound: dimension must be >= 1");
  }
  if (!(tau + d > 0.0) || !std::isfinite(tau)) {
    throw ValidationError("lemma_bound: tau + d must be positive");
  }
  const double shell_integral =
      static_cast<double>(d) * std::pow(2.0, d) * std::tgamma(tau + d);
  return shell_integral / (c * std::pow(delta, tau + static_cast<double>(d)));
}

}  // namespace kam
