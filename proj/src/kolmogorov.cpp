#include "kamnf/kolmogorov.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace kam {
namespace {

FourierTaylorSeries real_constant(int dim, int K, int M, double value) {
  if (value == 0.0) return FourierTaylorSeries::zero(dim, K, M);
  return FourierTaylorSeries::constant(dim, K, M, Complex(value, 0.0));
}

// Terms of f with no r-dependence.
FourierTaylorSeries degree_zero_slice(const FourierTaylorSeries& f) {
  std::vector<Term> terms;
  for (const Term& t : f.terms()) {
    if (t.index.degree() == 0) terms.push_back(t);
  }
  return FourierTaylorSeries(f.dim(), f.fourier_cutoff(), f.taylor_degree(),
                             std::move(terms), nullptr, 0.0);
}

double coeff_distance(const FourierTaylorSeries& a,
                      const FourierTaylorSeries& b) {
  double worst = 0.0;
  for (const Term& t : a.terms()) {
    worst = std::max(worst, std::abs(t.coeff - b.coeff(t.index)));
  }
  for (const Term& t : b.terms()) {
    worst = std::max(worst, std::abs(t.coeff - a.coeff(t.index)));
  }
  return worst;
}

double induced_inf_norm(const Eigen::MatrixXd& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

// Majorant norm used for fixed-point convergence of angle-only series: the
// plain coefficient sum (strip norm at rho = 0, Delta = 0).
double coefficient_norm(const FourierTaylorSeries& f) {
  return strip_norm_majorant(f, AnalyticityDomain{0.0, 0.0});
}

}  // namespace

// --- KolmogorovForm ----------------------------------------------------------

KolmogorovForm::KolmogorovForm(double energy_offset, FrequencyVector omega,
                               std::vector<FourierTaylorSeries> S,
                               double epsilon, FourierTaylorSeries h,
                               FourierTaylorSeries g, AnalyticityDomain domain)
    : energy_offset_(energy_offset),
      omega_(std::move(omega)),
      S_(std::move(S)),
      epsilon_(epsilon),
      h_(std::move(h)),
      g_(std::move(g)),
      domain_(domain) {
  const int d = omega_.dim();
  if (!std::isfinite(energy_offset_)) {
    throw ValidationError("energy offset must be finite");
  }
  if (!(epsilon_ >= 0.0) || !std::isfinite(epsilon_)) {
    throw ValidationError("epsilon must be a finite nonnegative real");
  }
  if (!(domain_.rho > 0.0) || !(domain_.delta_strip > 0.0)) {
    throw ValidationError("analyticity domain radii must be positive");
  }
  if (!omega_.certificate().has_value()) {
    throw ValidationError(
        "the frequency vector must carry a non-resonance certificate");
  }
  if (static_cast<int>(S_.size()) != d * d) {
    throw DimensionError("S must hold " + std::to_string(d * d) +
                         " series, got " + std::to_string(S_.size()));
  }

  const int K = h_.fourier_cutoff();
  const int M = h_.taylor_degree();
  if (M < 3) {
    throw ValidationError(
        "the Taylor degree must be at least 3 to hold the cubic collector");
  }
  auto check_series = [&](const FourierTaylorSeries& f, const std::string& name) {
    if (f.dim() != d) {
      throw DimensionError("series " + name + " has dimension " +
                           std::to_string(f.dim()) + ", expected " +
                           std::to_string(d));
    }
    if (f.fourier_cutoff() != K || f.taylor_degree() != M) {
      throw ValidationError("series " + name +
                            " does not share the common cutoffs (" +
                            std::to_string(K) + ", " + std::to_string(M) + ")");
    }
    if (!f.is_conjugate_symmetric(kRealityTol)) {
      throw ValidationError("series " + name +
                            " is not conjugate-symmetric (not real-valued)");
    }
  };
  check_series(h_, "h");
  check_series(g_, "g");

  double s_scale = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const FourierTaylorSeries& entry = S_[static_cast<std::size_t>(i * d + j)];
      check_series(entry, "S(" + std::to_string(i) + "," + std::to_string(j) + ")");
      for (const Term& t : entry.terms()) {
        if (t.index.degree() != 0) {
          throw ValidationError("S entries must be angle-only series");
        }
      }
      s_scale = std::max(s_scale, entry.max_abs_coeff());
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double dist = coeff_distance(S_[static_cast<std::size_t>(i * d + j)],
                                         S_[static_cast<std::size_t>(j * d + i)]);
      if (dist > kHessianSymmetryTol * std::max(1.0, s_scale)) {
        throw ValidationError("S is not symmetric: entries (" +
                              std::to_string(i) + "," + std::to_string(j) +
                              ") differ by " + std::to_string(dist));
      }
    }
  }

  for (const Term& t : g_.terms()) {
    if (t.index.degree() < 3) {
      throw ValidationError(
          "g contains a monomial of degree < 3 in the actions");
    }
  }

  const double h_maj = strip_norm_majorant(h_, domain_);
  if (h_maj > 1.0 + kNormalizationSlack) {
    throw ValidationError("h is not normalized: majorant " +
                          std::to_string(h_maj) + " exceeds 1");
  }
}

const FourierTaylorSeries& KolmogorovForm::S(int i, int j) const {
  const int d = dim();
  if (i < 0 || i >= d || j < 0 || j >= d) {
    throw DimensionError("S index out of range");
  }
  return S_[static_cast<std::size_t>(i * d + j)];
}

double evaluate_hamiltonian(const KolmogorovForm& form,
                            std::span<const double> r,
                            std::span<const double> theta) {
  const int d = form.dim();
  if (static_cast<int>(r.size()) != d || static_cast<int>(theta.size()) != d) {
    throw DimensionError("evaluate_hamiltonian: point has wrong dimension");
  }
  double value = form.energy_offset();
  for (int i = 0; i < d; ++i) value += form.omega()[i] * r[i];
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      value += 0.5 * evaluate(form.S(i, j), r, theta).real() *
               r[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(j)];
    }
  }
  if (form.epsilon() > 0.0) {
    value += form.epsilon() * evaluate(form.h(), r, theta).real();
  }
  value += evaluate(form.g(), r, theta).real();
  return value;
}

// --- TwistData ---------------------------------------------------------------

TwistData TwistData::from_form(const KolmogorovForm& form,
                               const Eigen::MatrixXd* reference) {
  const int d = form.dim();
  const TermIndex zero_idx{};

  Eigen::MatrixXd S_hat(d, d);
  if (reference != nullptr) {
    if (reference->rows() != d || reference->cols() != d) {
      throw DimensionError("reference Hessian has wrong shape");
    }
    S_hat = *reference;
  } else {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        S_hat(i, j) = form.S(i, j).coeff(zero_idx).real();
      }
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(S_hat);
  if (!lu.isInvertible()) {
    throw TwistError("the reference action Hessian is singular");
  }
  TwistData out;
  out.S_hat = S_hat;
  out.S_tilde = lu.inverse();
  const double defect =
      (S_hat * out.S_tilde - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
  if (defect > 1e-12) {
    throw TwistError("the reference Hessian is numerically singular: "
                     "inverse defect " + std::to_string(defect));
  }

  const double tilde_norm = induced_inf_norm(out.S_tilde);
  out.beta = 1.0 / (tilde_norm * (1.0 + tilde_norm));

  Eigen::MatrixXd dev_maj(d, d);
  Eigen::MatrixXd s_maj(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const FourierTaylorSeries& entry = form.S(i, j);
      FourierTaylorSeries dev =
          add(entry, real_constant(entry.dim(), entry.fourier_cutoff(),
                                   entry.taylor_degree(), -S_hat(i, j)));
      dev_maj(i, j) = strip_norm_majorant(dev, form.domain());
      s_maj(i, j) = strip_norm_majorant(entry, form.domain());
    }
  }
  out.eta = dev_maj.rowwise().sum().maxCoeff();
  out.gamma = std::abs(form.energy_offset()) +
              s_maj.rowwise().sum().maxCoeff() +
              strip_norm_majorant(form.g(), form.domain()) +
              induced_inf_norm(S_hat) + tilde_norm;
  return out;
}

// --- jets ---------------------------------------------------------------------

Jets extract_jets(const KolmogorovForm& form) {
  const int d = form.dim();
  const int K = form.fourier_cutoff();
  const int M = form.taylor_degree();
  const FourierTaylorSeries& h = form.h();

  std::vector<Term> a_terms;
  std::vector<std::vector<Term>> b_terms(static_cast<std::size_t>(d));
  std::vector<Term> tail_terms;
  for (const Term& t : h.terms()) {
    const int deg = t.index.degree();
    if (deg == 0) {
      a_terms.push_back(t);
    } else if (deg == 1) {
      for (int i = 0; i < d; ++i) {
        if (t.index.m[static_cast<std::size_t>(i)] == 1) {
          TermIndex idx = t.index;
          idx.m[static_cast<std::size_t>(i)] = 0;
          b_terms[static_cast<std::size_t>(i)].push_back({idx, t.coeff});
          break;
        }
      }
    } else if (deg >= 3) {
      tail_terms.push_back(t);
    }
  }

  Jets out{FourierTaylorSeries(d, K, M, std::move(a_terms), nullptr, 0.0),
           {},
           {},
           FourierTaylorSeries(d, K, M, std::move(tail_terms), nullptr, 0.0)};
  out.b.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    out.b.emplace_back(d, K, M, std::move(b_terms[static_cast<std::size_t>(i)]),
                       nullptr, 0.0);
  }
  out.c.reserve(static_cast<std::size_t>(d * d));
  for (int i = 0; i < d; ++i) {
    FourierTaylorSeries hi = partial_r(h, i);
    for (int j = 0; j < d; ++j) {
      out.c.push_back(degree_zero_slice(partial_r(hi, j)));
    }
  }
  return out;
}

// --- generator ----------------------------------------------------------------

GeneratorSolution solve_generator(const KolmogorovForm& form,
                                  const TwistData& twist) {
  const int d = form.dim();
  const int K = form.fourier_cutoff();
  const int M = form.taylor_degree();
  const double eps = form.epsilon();
  const FrequencyVector& omega = form.omega();
  const TermIndex zero_idx{};

  // Current mean of S, and the precondition that it stays within the
  // invertibility radius of the reference Hessian.
  Eigen::MatrixXd S0(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const Complex mu = form.S(i, j).coeff(zero_idx);
      S0(i, j) = mu.real();
    }
  }
  const double drift = induced_inf_norm(S0 - twist.S_hat);
  if (!(drift < twist.beta)) {
    throw TwistError("current Hessian mean left the invertibility radius: "
                     "|S0 - S_hat| = " + std::to_string(drift) +
                     " >= beta = " + std::to_string(twist.beta));
  }

  Jets jets = extract_jets(form);

  // (i)  L_omega u = -eps (a - mean a).  The mean cancels exactly because the
  // same value is subtracted term-wise before scaling.
  const Complex mean_a = jets.a.coeff(zero_idx);
  FourierTaylorSeries centered_a = jets.a;
  if (mean_a != Complex(0.0, 0.0)) {
    centered_a = add(jets.a, FourierTaylorSeries::constant(d, K, M, -mean_a));
  }
  FourierTaylorSeries u =
      solve_cohomological(scale(centered_a, Complex(-eps, 0.0)), omega);
  std::vector<FourierTaylorSeries> du;
  du.reserve(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) du.push_back(partial_theta(u, j));

  // (ii)  (integral of S) alpha = -integral(S du + eps b).
  std::vector<FourierTaylorSeries> s_du_eb(static_cast<std::size_t>(d));
  Eigen::VectorXd rhs_alpha(d);
  for (int i = 0; i < d; ++i) {
    FourierTaylorSeries tot = FourierTaylorSeries::zero(d, K, M);
    for (int j = 0; j < d; ++j) {
      tot = add(tot, multiply(form.S(i, j), du[static_cast<std::size_t>(j)]));
    }
    tot = add(tot, scale(jets.b[static_cast<std::size_t>(i)], Complex(eps, 0.0)));
    const Complex mu = tot.coeff(zero_idx);
    if (std::abs(mu.imag()) >
        kGeneratorResidualTol * std::max({1.0, eps, std::abs(mu)})) {
      throw ValidationError(
          "alpha equation: the mean of S du + eps b has an imaginary part");
    }
    rhs_alpha(i) = -mu.real();
    s_du_eb[static_cast<std::size_t>(i)] = std::move(tot);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(S0);
  if (!lu.isInvertible()) {
    throw TwistError("the current mean of S is singular");
  }
  const Eigen::VectorXd alpha_vec = lu.solve(rhs_alpha);

  // (iii)  L_omega v_i = -(S (du + alpha))_i - eps b_i, zero mean by the
  // construction of alpha; the leftover linear-solve dust is cancelled
  // exactly and the residual asserted small.
  std::vector<FourierTaylorSeries> v;
  v.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    FourierTaylorSeries tot = s_du_eb[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) {
      tot = add(tot, scale(form.S(i, j), Complex(alpha_vec(j), 0.0)));
    }
    FourierTaylorSeries rhs = scale(tot, Complex(-1.0, 0.0));
    const Complex mu = rhs.coeff(zero_idx);
    if (std::abs(mu) >
        kGeneratorResidualTol * std::max({1.0, eps, rhs.max_abs_coeff()})) {
      throw ZeroMeanError(
          "v equation: right-hand side mean " + std::to_string(std::abs(mu)) +
          " exceeds the linear-solve dust tolerance");
    }
    if (mu != Complex(0.0, 0.0)) {
      rhs = add(rhs, FourierTaylorSeries::constant(d, K, M, -mu));
    }
    v.push_back(solve_cohomological(rhs, omega));
  }

  std::vector<FourierTaylorSeries> dv;
  dv.reserve(static_cast<std::size_t>(d * d));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      dv.push_back(partial_theta(v[static_cast<std::size_t>(i)], j));
    }
  }

  std::vector<double> alpha(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) alpha[static_cast<std::size_t>(i)] = alpha_vec(i);
  return GeneratorSolution{std::move(u),  std::move(v), std::move(alpha),
                           std::move(du), std::move(dv), eps};
}

// --- inverse angle shift -------------------------------------------------------

std::vector<FourierTaylorSeries> invert_angle_shift(
    std::span<const FourierTaylorSeries> v, int* iterations) {
  if (v.empty()) {
    throw DimensionError("invert_angle_shift: empty shift");
  }
  const int d = static_cast<int>(v.size());
  bool all_zero = true;
  int K = 0;
  for (const FourierTaylorSeries& vi : v) {
    if (vi.dim() != d) {
      throw DimensionError(
          "invert_angle_shift: shift component dimension mismatch");
    }
    if (!vi.empty()) all_zero = false;
    K = std::max(K, vi.fourier_cutoff());
  }

  std::vector<FourierTaylorSeries> w;
  w.reserve(v.size());
  for (const FourierTaylorSeries& vi : v) w.push_back(scale(vi, Complex(-1.0, 0.0)));
  if (all_zero) {
    if (iterations) *iterations = 0;
    return w;
  }

  for (int iter = 1; iter <= kInverseShiftMaxIterations; ++iter) {
    AngleComposition comp(w, K);
    std::vector<FourierTaylorSeries> next;
    next.reserve(v.size());
    double err = 0.0;
    for (int i = 0; i < d; ++i) {
      next.push_back(scale(comp.apply(v[static_cast<std::size_t>(i)]),
                           Complex(-1.0, 0.0)));
      err = std::max(err, coefficient_norm(sub(next[static_cast<std::size_t>(i)],
                                               w[static_cast<std::size_t>(i)])));
    }
    w = std::move(next);
    if (err < kInverseShiftTol) {
      if (iterations) *iterations = iter;
      return w;
    }
  }
  throw ContractionError(
      "inverse angle shift: fixed point did not converge (shift too large)");
}

// --- step map -------------------------------------------------------------------

SymplecticMapData build_map(const GeneratorSolution& gen,
                            const AnalyticityDomain& domain) {
  const int d = static_cast<int>(gen.v.size());
  if (d == 0 || static_cast<int>(gen.du.size()) != d ||
      static_cast<int>(gen.dv.size()) != d * d ||
      static_cast<int>(gen.alpha.size()) != d) {
    throw DimensionError("build_map: inconsistent generator component counts");
  }
  const int K = gen.u.fourier_cutoff();
  const int M = gen.u.taylor_degree();
  if (gen.u.dim() != d) {
    throw DimensionError("build_map: generator dimension mismatch");
  }
  if (M < 1) {
    throw ValidationError(
        "build_map: the generator series must allow Taylor degree >= 1");
  }

  SymplecticMapData map;
  map.dim = d;
  map.alpha = gen.alpha;
  map.v.assign(gen.v.begin(), gen.v.end());
  map.du.assign(gen.du.begin(), gen.du.end());
  map.dv.assign(gen.dv.begin(), gen.dv.end());
  map.domain = domain;

  // Contraction of the Neumann series for N = (Id + dv^T)^{-1}: the induced
  // infinity norm of the majorant matrix of dv^T must be below 1.
  Eigen::MatrixXd t_maj(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      // (dv^T)_{ij} = dv_j/dtheta_i.
      t_maj(i, j) = strip_norm_majorant(gen.dv[static_cast<std::size_t>(j * d + i)],
                                        domain);
    }
  }
  const double t_norm = induced_inf_norm(t_maj);
  if (!(t_norm < 1.0)) {
    throw ContractionError(
        "build_map: majorant of dv is " + std::to_string(t_norm) +
        " >= 1, the angle shift is not invertible on this domain");
  }

  // N = sum_p (-dv^T)^p, truncated when the term majorant drops below
  // kNeumannTailTol.
  std::vector<FourierTaylorSeries> neumann(static_cast<std::size_t>(d * d));
  std::vector<FourierTaylorSeries> power(static_cast<std::size_t>(d * d));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      neumann[static_cast<std::size_t>(i * d + j)] =
          (i == j) ? real_constant(d, K, M, 1.0)
                   : FourierTaylorSeries::zero(d, K, M);
      power[static_cast<std::size_t>(i * d + j)] =
          neumann[static_cast<std::size_t>(i * d + j)];
    }
  }
  map.neumann_terms = 0;
  for (int p = 1; p <= kNeumannMaxTerms; ++p) {
    std::vector<FourierTaylorSeries> next(static_cast<std::size_t>(d * d));
    double term_maj = 0.0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        FourierTaylorSeries acc = FourierTaylorSeries::zero(d, K, M);
        for (int l = 0; l < d; ++l) {
          // next_{ij} = sum_l power_{il} * (-(dv^T)_{lj}).
          acc = add(acc,
                    multiply(power[static_cast<std::size_t>(i * d + l)],
                             scale(gen.dv[static_cast<std::size_t>(j * d + l)],
                                   Complex(-1.0, 0.0))));
        }
        term_maj = std::max(term_maj, strip_norm_majorant(acc, domain));
        next[static_cast<std::size_t>(i * d + j)] = std::move(acc);
      }
    }
    for (int e = 0; e < d * d; ++e) {
      neumann[static_cast<std::size_t>(e)] =
          add(neumann[static_cast<std::size_t>(e)],
              next[static_cast<std::size_t>(e)]);
    }
    power = std::move(next);
    map.neumann_terms = p;
    if (term_maj < kNeumannTailTol) break;
  }
  map.neumann = std::move(neumann);

  // Inverse pieces: w, then the step map written in the new angle.
  map.w = invert_angle_shift(gen.v, &map.w_iterations);
  bool w_zero = true;
  for (const FourierTaylorSeries& wi : map.w) {
    if (!wi.empty()) w_zero = false;
  }

  std::vector<FourierTaylorSeries> a_base(static_cast<std::size_t>(d));
  std::vector<FourierTaylorSeries> b_base(static_cast<std::size_t>(d * d));
  for (int i = 0; i < d; ++i) {
    a_base[static_cast<std::size_t>(i)] =
        add(gen.du[static_cast<std::size_t>(i)],
            real_constant(d, K, M, gen.alpha[static_cast<std::size_t>(i)]));
    for (int j = 0; j < d; ++j) {
      // (Id + dv^T)_{ij} = delta_ij + dv_j/dtheta_i.
      FourierTaylorSeries entry = gen.dv[static_cast<std::size_t>(j * d + i)];
      if (i == j) entry = add(entry, real_constant(d, K, M, 1.0));
      b_base[static_cast<std::size_t>(i * d + j)] = std::move(entry);
    }
  }
  if (w_zero) {
    map.a_step = a_base;  // a_base is still needed for the deviation bound
    map.b_step = std::move(b_base);
  } else {
    AngleComposition comp(map.w, K);
    map.a_step.reserve(static_cast<std::size_t>(d));
    map.b_step.reserve(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d; ++i) {
      map.a_step.push_back(
          symmetrized(comp.apply(a_base[static_cast<std::size_t>(i)])));
    }
    for (int e = 0; e < d * d; ++e) {
      map.b_step.push_back(
          symmetrized(comp.apply(b_base[static_cast<std::size_t>(e)])));
    }
  }

  // Deviation majorants |map - Id| and |map^{-1} - Id| on the domain.
  double dev_f = 0.0, dev_i = 0.0;
  for (int i = 0; i < d; ++i) {
    dev_f = std::max(dev_f,
                     strip_norm_majorant(gen.v[static_cast<std::size_t>(i)], domain));
    dev_i = std::max(dev_i,
                     strip_norm_majorant(map.w[static_cast<std::size_t>(i)], domain));
  }
  for (int i = 0; i < d; ++i) {
    // Forward action displacement: sum_j (N_ij - delta_ij) r_j - N_ij (alpha_j + du_j).
    FourierTaylorSeries fwd = FourierTaylorSeries::zero(d, K, std::max(M, 1));
    // Inverse action displacement: a_step_i + sum_j (b_step_ij - delta_ij) R_j.
    FourierTaylorSeries inv = map.a_step[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) {
      FourierTaylorSeries n_dev = map.neumann[static_cast<std::size_t>(i * d + j)];
      FourierTaylorSeries b_dev = map.b_step[static_cast<std::size_t>(i * d + j)];
      if (i == j) {
        n_dev = add(n_dev, real_constant(d, K, M, -1.0));
        b_dev = add(b_dev, real_constant(d, K, M, -1.0));
      }
      const FourierTaylorSeries rj = action_monomial(d, K, std::max(M, 1), j);
      fwd = add(fwd, multiply(n_dev, rj));
      fwd = sub(fwd, multiply(map.neumann[static_cast<std::size_t>(i * d + j)],
                              a_base[static_cast<std::size_t>(j)]));
      inv = add(inv, multiply(b_dev, rj));
    }
    dev_f = std::max(dev_f, strip_norm_majorant(fwd, domain));
    dev_i = std::max(dev_i, strip_norm_majorant(inv, domain));
  }
  map.deviation_forward = dev_f;
  map.deviation_inverse = dev_i;
  return map;
}

// --- pullback --------------------------------------------------------------------

PullbackResult pullback(const KolmogorovForm& form,
                        const GeneratorSolution& gen, double delta) {
  const int d = form.dim();
  const int K = form.fourier_cutoff();
  const int M = form.taylor_degree();
  const double eps = form.epsilon();
  const TermIndex zero_idx{};

  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw ValidationError("pullback: delta must be positive");
  }
  const AnalyticityDomain new_domain = form.domain().shrink(delta);
  if (!(new_domain.rho > 0.0) || !(new_domain.delta_strip > 0.0)) {
    throw ValidationError("pullback: delta consumes the whole domain");
  }
  if (static_cast<int>(gen.v.size()) != d) {
    throw DimensionError("pullback: generator dimension mismatch");
  }

  PullbackDiagnostics diag;
  TruncationStats stats_all;   // everything
  TruncationStats stats_rem;   // remainder construction + re-expansion only

  Jets jets = extract_jets(form);
  const Complex mean_a = jets.a.coeff(zero_idx);
  if (std::abs(mean_a.imag()) > 1e-12 * std::max(1.0, std::abs(mean_a))) {
    throw ValidationError("pullback: the mean of h(0,.) is not real");
  }

  // The action displacement DeltaR_i = du_i + alpha_i + sum_j dv_j/dtheta_i r_j
  // and its angle-only part.
  std::vector<FourierTaylorSeries> dR(static_cast<std::size_t>(d));
  std::vector<FourierTaylorSeries> dRt(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    FourierTaylorSeries tilde =
        add(gen.du[static_cast<std::size_t>(i)],
            real_constant(d, K, M, gen.alpha[static_cast<std::size_t>(i)]));
    FourierTaylorSeries full = tilde;
    for (int j = 0; j < d; ++j) {
      full = add(full, multiply(gen.dv[static_cast<std::size_t>(j * d + i)],
                                action_monomial(d, K, M, j), &stats_all));
    }
    const double m = strip_norm_majorant(full, form.domain());
    if (m > kDeviationBudgetFactor * eps) {
      throw ValidationError(
          "pullback: generator deviation majorant " + std::to_string(m) +
          " is not O(eps) (budget " +
          std::to_string(kDeviationBudgetFactor * eps) + ")");
    }
    dRt[static_cast<std::size_t>(i)] = std::move(tilde);
    dR[static_cast<std::size_t>(i)] = std::move(full);
  }

  // Q_k with (Q_k)_{ij} = (1/2) d^3 g / dr_k dr_i dr_j (0, theta): the cubic
  // jet of the collector, normalized so that r.(sum_k Q_k x_k).r reproduces
  // the degree-2 part of x.dg/dr exactly.
  std::vector<FourierTaylorSeries> Q(static_cast<std::size_t>(d * d * d));
  for (int k = 0; k < d; ++k) {
    FourierTaylorSeries gk = partial_r(form.g(), k);
    for (int i = 0; i < d; ++i) {
      FourierTaylorSeries gki = partial_r(gk, i);
      for (int j = 0; j < d; ++j) {
        Q[static_cast<std::size_t>((k * d + i) * d + j)] = scale(
            degree_zero_slice(partial_r(gki, j)), Complex(0.5, 0.0));
      }
    }
  }

  // Energy offset.
  double m_bar = form.energy_offset();
  for (int i = 0; i < d; ++i) {
    m_bar += form.omega()[i] * gen.alpha[static_cast<std::size_t>(i)];
  }
  m_bar += eps * mean_a.real();

  // New Hessian, still in the old angle: S + eps c + 2 sum_k Q_k (dRt)_k
  // + S dv^T + dv S.  Only the upper triangle is formed; the formula is
  // symmetric in (i, j) term by term, so mirroring is exact.
  std::vector<FourierTaylorSeries> Sb(static_cast<std::size_t>(d * d));
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      FourierTaylorSeries s = form.S(i, j);
      s = add(s, scale(jets.c[static_cast<std::size_t>(i * d + j)],
                       Complex(eps, 0.0)));
      for (int k = 0; k < d; ++k) {
        s = add(s, scale(multiply(Q[static_cast<std::size_t>((k * d + i) * d + j)],
                                  dRt[static_cast<std::size_t>(k)], &stats_all),
                         Complex(2.0, 0.0)));
      }
      for (int l = 0; l < d; ++l) {
        // (S dv^T)_{ij} = sum_l S_il dv_j/dtheta_l;  (dv S)_{ij} = sum_l
        // dv_i/dtheta_l S_lj.
        s = add(s, multiply(form.S(i, l),
                            gen.dv[static_cast<std::size_t>(j * d + l)],
                            &stats_all));
        s = add(s, multiply(gen.dv[static_cast<std::size_t>(i * d + l)],
                            form.S(l, j), &stats_all));
      }
      Sb[static_cast<std::size_t>(i * d + j)] = s;
      if (j != i) Sb[static_cast<std::size_t>(j * d + i)] = std::move(s);
    }
  }

  // Cubic collector, still in the old angle:
  //   g + eps h_tail + DeltaR.dg/dr - r.(sum_k Q_k (dRt)_k).r.
  // The last two terms cancel in degree 2 up to rounding dust, which is
  // measured and dropped.
  FourierTaylorSeries gb = add(form.g(), scale(jets.h_tail, Complex(eps, 0.0)));
  for (int k = 0; k < d; ++k) {
    gb = add(gb, multiply(dR[static_cast<std::size_t>(k)],
                          partial_r(form.g(), k), &stats_all));
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      std::vector<int> kz(static_cast<std::size_t>(d), 0);
      std::vector<int> mm(static_cast<std::size_t>(d), 0);
      mm[static_cast<std::size_t>(i)] += 1;
      mm[static_cast<std::size_t>(j)] += 1;
      FourierTaylorSeries rij(
          d, K, M, {{make_index(kz, mm), Complex(1.0, 0.0)}});
      for (int k = 0; k < d; ++k) {
        gb = sub(gb,
                 multiply(multiply(Q[static_cast<std::size_t>((k * d + i) * d + j)],
                                   dRt[static_cast<std::size_t>(k)], &stats_all),
                          rij, &stats_all));
      }
    }
  }
  {
    std::vector<Term> low, high;
    for (const Term& t : gb.terms()) {
      (t.index.degree() < 3 ? low : high).push_back(t);
    }
    FourierTaylorSeries dust(d, K, M, std::move(low), nullptr, 0.0);
    diag.low_degree_dust = strip_norm_majorant(dust, form.domain());
    if (diag.low_degree_dust > kLowDegreeDustTol * std::max(1.0, eps)) {
      throw ValidationError(
          "pullback: degree < 3 residue " +
          std::to_string(diag.low_degree_dust) +
          " in the cubic collector exceeds the cancellation tolerance");
    }
    gb = FourierTaylorSeries(d, K, M, std::move(high), nullptr, 0.0);
  }

  // Quadratic remainder, still in the old angle:
  //   eps (h(r + DeltaR) - h(r)) + (g(r + DeltaR) - g(r) - DeltaR.dg/dr)
  //   + (1/2) DeltaR.S.DeltaR.
  FourierTaylorSeries rem =
      scale(shift_actions(form.h(), dR, 1, &stats_rem), Complex(eps, 0.0));
  rem = add(rem, shift_actions(form.g(), dR, 2, &stats_rem));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      rem = add(rem, scale(multiply(multiply(dR[static_cast<std::size_t>(i)],
                                             form.S(i, j), &stats_rem),
                                    dR[static_cast<std::size_t>(j)], &stats_rem),
                           Complex(0.5, 0.0)));
    }
  }

  // Re-expression in the new angle phi, theta = phi + w(phi).
  std::vector<FourierTaylorSeries> w = invert_angle_shift(gen.v, &diag.w_iterations);
  bool w_zero = true;
  for (const FourierTaylorSeries& wi : w) {
    if (!wi.empty()) w_zero = false;
  }
  std::optional<AngleComposition> comp;
  if (!w_zero) comp.emplace(w, K);
  auto to_new_angle = [&](const FourierTaylorSeries& f,
                          TruncationStats* st) -> FourierTaylorSeries {
    if (w_zero) return symmetrized(f);
    return symmetrized(comp->apply(f, st));
  };

  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      FourierTaylorSeries entry =
          to_new_angle(Sb[static_cast<std::size_t>(i * d + j)], &stats_all);
      Sb[static_cast<std::size_t>(i * d + j)] = entry;
      if (j != i) Sb[static_cast<std::size_t>(j * d + i)] = std::move(entry);
    }
  }
  gb = to_new_angle(gb, &stats_all);
  rem = to_new_angle(rem, &stats_rem);

  // Renormalization: the new eps is the measured remainder majorant on the
  // shrunk domain, and the new h is the remainder scaled to unit majorant.
  double eps_bar = strip_norm_majorant(rem, new_domain);
  FourierTaylorSeries h_bar;
  if (eps_bar < kEpsilonBarFloor) {
    eps_bar = 0.0;
    h_bar = FourierTaylorSeries::zero(d, K, M);
  } else {
    h_bar = scale(rem, Complex(1.0 / eps_bar, 0.0));
  }

  diag.eps_bar = eps_bar;
  diag.quadratic_ratio = eps > 0.0 ? eps_bar / (eps * eps) : 0.0;
  diag.remainder_stats = stats_rem;
  diag.truncation_warning =
      (stats_rem.discarded_mass + stats_rem.aliasing_mass) >
      kPullbackTailWarnFactor * eps * eps;
  stats_all.merge(stats_rem);
  diag.stats = stats_all;

  KolmogorovForm out(m_bar, form.omega(), std::move(Sb), eps_bar,
                     std::move(h_bar), std::move(gb), new_domain);
  return PullbackResult{std::move(out), std::move(diag)};
}

}  // namespace kam
