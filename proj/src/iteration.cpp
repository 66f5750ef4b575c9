#include "kamnf/iteration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <utility>

#include "kamnf/errors.hpp"

namespace kam {

namespace {

void require_positive_finite(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << "kappa_threshold: " << name << " must be positive and finite, got "
        << value;
    throw ValidationError(msg.str());
  }
}

std::string flag(bool ok) { return ok ? "ok" : "FAIL"; }

}  // namespace

// --- smallness threshold ----------------------------------------------------

double kappa_threshold(double C1, double C2, double C3, double C4, double c1,
                       double c2) {
  require_positive_finite(C1, "C1");
  require_positive_finite(C2, "C2");
  require_positive_finite(C3, "C3");
  require_positive_finite(C4, "C4");
  require_positive_finite(c1, "c1");
  require_positive_finite(c2, "c2");
  const double ln2 = std::log(2.0);
  const double kappa1 =
      std::exp(std::min({-2.0 * std::log(C2), -std::log(C1), std::log(c1)}) /
               ln2);
  const double kappa2 = std::exp(
      std::min({-2.0 * std::log(2.0 * C4), -std::log(2.0 * C3), std::log(c2)}) /
      ln2);
  return std::min(kappa1, kappa2);
}

// --- schedule ----------------------------------------------------------------

double IterationSchedule::delta(int n) const {
  if (n <= 0) return 0.0;
  return delta_base * std::pow(3.0, -n);
}

double IterationSchedule::rho_after(int n) const {
  if (n <= 0) return rho0;
  return rho0 - 0.5 * delta_base * (1.0 - std::pow(3.0, -n));
}

double IterationSchedule::strip_after(int n) const {
  if (n <= 0) return delta0_strip;
  return delta0_strip - 0.5 * delta_base * (1.0 - std::pow(3.0, -n));
}

AnalyticityDomain IterationSchedule::verification_domain() const {
  return AnalyticityDomain{3.0 * rho0 / 8.0, 3.0 * delta0_strip / 8.0};
}

IterationSchedule IterationSchedule::create(const KolmogorovForm& initial,
                                            const TwistData& twist, double C,
                                            int max_steps, double stop_tol,
                                            double eta0) {
  if (!(C > 0.0) || !std::isfinite(C)) {
    throw ValidationError(
        "iteration schedule: the step constant C must be positive and finite");
  }
  if (max_steps < 0) {
    throw ValidationError("iteration schedule: max_steps must be >= 0");
  }
  IterationSchedule s;
  s.rho0 = initial.domain().rho;
  s.delta0_strip = initial.domain().delta_strip;
  s.delta_base = std::min({s.rho0, s.delta0_strip, 1.0});
  // The form guarantees a certified frequency, which carries tau.
  const auto& cert = initial.omega().certificate();
  s.nu = 2.0 * (static_cast<double>(initial.dim()) + cert->tau + 2.0);
  s.C = C;
  s.max_steps = max_steps;
  s.gamma0 = twist.gamma;
  s.beta = twist.beta;
  s.eta0 = eta0 > 0.0 ? eta0 : kEtaZeroBetaFactor * twist.beta;
  if (!(s.eta0 < twist.beta)) {
    throw ValidationError(
        "iteration schedule: eta0 must stay below the invertibility radius "
        "beta");
  }
  s.stop_tol = stop_tol > 0.0 ? stop_tol : kStopTolGammaFactor * s.gamma0;

  // Admissibility threshold for eps_0.  Unrolling the per-step bounds
  // eps-hat_{n+1} <= C eps_n / delta_{n+1}^nu and eps_{n+1} <= C eps_n^2 /
  // delta_{n+1}^nu along delta_n = delta_base / 3^n gives the
  // double-exponential majorants
  //
  //   eps_n     <= x^{2^n} (C delta_base^{-2 nu})^n     3^{nu (n+1)^2} / 3^nu
  //   eps-hat_n <= x^{2^n} (C delta_base^{-2 nu})^{n+1} 3^{nu (n+1)^2} ...
  //
  // so with C1 = C delta_base^{-2 nu} 3^{2 nu} and C2 = 3^nu the two bounding
  //-lemma branches keep eps_n below C^{-1} delta_{n+1}^nu (hypothesis H2
  // forever) and the deviation sum below min(eta0, gamma0) (hypothesis H1
  // forever).
  const double p3nu = std::pow(3.0, s.nu);
  const double big_c1 = C * std::pow(s.delta_base, -2.0 * s.nu) * p3nu * p3nu;
  const double big_c2 = p3nu;
  const double small_c1 = std::pow(s.delta_base, s.nu) / (C * p3nu);
  const double small_c2 =
      std::min(s.eta0, s.gamma0) * std::pow(s.delta_base, s.nu) / (C * p3nu);
  s.kappa = kappa_threshold(big_c1, big_c2, big_c1, big_c2, small_c1, small_c2);
  return s;
}

// --- hypothesis checks --------------------------------------------------------

HypothesisReport check_hypotheses(const KolmogorovForm& form,
                                  const TwistData& twist,
                                  const IterationSchedule& schedule,
                                  int completed_steps) {
  HypothesisReport rep;
  const double rho = form.domain().rho;
  const double strip = form.domain().delta_strip;

  rep.gamma_ok = twist.gamma <= 2.0 * schedule.gamma0;
  rep.eta_ok = twist.eta <= schedule.eta0 && schedule.eta0 < twist.beta;
  rep.radius_ok = rho <= schedule.rho0 * (1.0 + kScheduleBoundaryTol) &&
                  rho >= schedule.rho0 / 2.0;
  rep.strip_ok =
      strip <= schedule.delta0_strip * (1.0 + kScheduleBoundaryTol) &&
      strip > schedule.delta0_strip / 2.0;
  rep.h1_ok = rep.gamma_ok && rep.eta_ok && rep.radius_ok && rep.strip_ok;

  // The geometric loss schedule attains the cap min(rho0/3, Delta0/3, 1)
  // exactly at the first step when both radii are >= 1, and every margin in
  // the one-step estimates stays positive there, so the cap is treated as
  // admissible (closed at the top, up to rounding slack).
  const double delta_next = schedule.delta(completed_steps + 1);
  const double cap =
      std::min({schedule.rho0 / 3.0, schedule.delta0_strip / 3.0, 1.0});
  rep.delta_range_ok =
      delta_next > 0.0 && delta_next <= cap * (1.0 + kScheduleBoundaryTol);
  rep.epsilon_threshold = std::pow(delta_next, schedule.nu) / schedule.C;
  rep.epsilon_ok =
      form.epsilon() == 0.0 || form.epsilon() < rep.epsilon_threshold;
  rep.h2_ok = rep.delta_range_ok && rep.epsilon_ok;

  std::ostringstream details;
  details << std::scientific << std::setprecision(3);
  details << "H1[" << flag(rep.h1_ok) << "]: gamma " << twist.gamma << " <= "
          << 2.0 * schedule.gamma0 << " (" << flag(rep.gamma_ok) << "), eta "
          << twist.eta << " <= " << schedule.eta0 << " < beta " << twist.beta
          << " (" << flag(rep.eta_ok) << "), rho " << rho << " in ["
          << schedule.rho0 / 2.0 << ", " << schedule.rho0 << "] ("
          << flag(rep.radius_ok) << "), strip " << strip << " in ("
          << schedule.delta0_strip / 2.0 << ", " << schedule.delta0_strip
          << "] (" << flag(rep.strip_ok) << "); H2[" << flag(rep.h2_ok)
          << "]: delta_{n+1} " << delta_next << " <= " << cap << " ("
          << flag(rep.delta_range_ok) << "), eps " << form.epsilon() << " < "
          << rep.epsilon_threshold << " (" << flag(rep.epsilon_ok) << ")";
  rep.details = details.str();
  return rep;
}

// --- composed map --------------------------------------------------------------

ComposedMap ComposedMap::identity(int dim, int fourier_cutoff,
                                  int taylor_degree,
                                  const AnalyticityDomain& domain) {
  if (dim < 1 || dim > kMaxDim) {
    throw ValidationError("composed map: dimension out of range");
  }
  if (!(domain.rho > 0.0) || !(domain.delta_strip > 0.0)) {
    throw ValidationError("composed map: domain radii must be positive");
  }
  ComposedMap map;
  map.dim_ = dim;
  map.fourier_cutoff_ = fourier_cutoff;
  map.taylor_degree_ = taylor_degree;
  map.domain_ = domain;
  map.W_.assign(static_cast<std::size_t>(dim),
                FourierTaylorSeries::zero(dim, fourier_cutoff, taylor_degree));
  map.A_ = map.W_;
  map.B_.assign(static_cast<std::size_t>(dim * dim),
                FourierTaylorSeries::zero(dim, fourier_cutoff, taylor_degree));
  for (int i = 0; i < dim; ++i) {
    map.B_[static_cast<std::size_t>(i * dim + i)] = FourierTaylorSeries::constant(
        dim, fourier_cutoff, taylor_degree, Complex(1.0));
  }
  return map;
}

ComposedMap ComposedMap::from_parts(int dim, int fourier_cutoff,
                                    int taylor_degree,
                                    const AnalyticityDomain& domain,
                                    std::vector<FourierTaylorSeries> angle_shift,
                                    std::vector<FourierTaylorSeries> action_offset,
                                    std::vector<FourierTaylorSeries> action_matrix,
                                    std::vector<double> deviations) {
  ComposedMap map = identity(dim, fourier_cutoff, taylor_degree, domain);
  const auto d = static_cast<std::size_t>(dim);
  if (angle_shift.size() != d || action_offset.size() != d ||
      action_matrix.size() != d * d) {
    throw ValidationError(
        "composed map: parts must have dim, dim, and dim*dim entries");
  }
  for (const auto* block : {&angle_shift, &action_offset, &action_matrix}) {
    for (const auto& series : *block) {
      if (series.dim() != dim) {
        throw DimensionError("composed map: series dimension mismatch");
      }
      if (series.fourier_cutoff() > fourier_cutoff ||
          series.taylor_degree() > taylor_degree) {
        throw ValidationError("composed map: series cutoffs exceed the map's");
      }
    }
  }
  map.W_ = std::move(angle_shift);
  map.A_ = std::move(action_offset);
  map.B_ = std::move(action_matrix);
  map.deviations_ = std::move(deviations);
  return map;
}

const FourierTaylorSeries& ComposedMap::angle_shift(int i) const {
  return W_.at(static_cast<std::size_t>(i));
}

const FourierTaylorSeries& ComposedMap::action_offset(int i) const {
  return A_.at(static_cast<std::size_t>(i));
}

const FourierTaylorSeries& ComposedMap::action_matrix(int i, int j) const {
  if (i < 0 || i >= dim_ || j < 0 || j >= dim_) {
    throw DimensionError("composed map: matrix index out of range");
  }
  return B_[static_cast<std::size_t>(i * dim_ + j)];
}

bool ComposedMap::is_identity() const {
  if (dim_ == 0) return false;
  for (const auto& s : W_) {
    if (!s.empty()) return false;
  }
  for (const auto& s : A_) {
    if (!s.empty()) return false;
  }
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) {
      const auto& s = B_[static_cast<std::size_t>(i * dim_ + j)];
      if (i == j) {
        if (s.size() != 1) return false;
        const Term& t = s.terms()[0];
        if (t.index != TermIndex{} || t.coeff != Complex(1.0)) return false;
      } else if (!s.empty()) {
        return false;
      }
    }
  }
  return true;
}

double ComposedMap::deviation_sum() const {
  double sum = 0.0;
  for (double d : deviations_) sum += d;
  return sum;
}

double ComposedMap::jacobian_defect() const {
  if (dim_ == 0) return 0.0;
  double worst = 0.0;
  // Angle rows of d psi - Id: theta_i = phi_i + W_i(phi) contributes
  // dW_i/dphi_j and nothing in the action columns.
  for (int i = 0; i < dim_; ++i) {
    double row = 0.0;
    for (int j = 0; j < dim_; ++j) {
      row += strip_norm_majorant(
          partial_theta(W_[static_cast<std::size_t>(i)], j), domain_);
    }
    worst = std::max(worst, row);
  }
  // Action rows: r_i = A_i + sum_k B_ik R_k contributes B_ij - delta_ij in
  // the action columns and dA_i/dphi_j + sum_k dB_ik/dphi_j R_k in the angle
  // columns.
  for (int i = 0; i < dim_; ++i) {
    double row = 0.0;
    for (int j = 0; j < dim_; ++j) {
      FourierTaylorSeries entry =
          B_[static_cast<std::size_t>(i * dim_ + j)];
      if (i == j) {
        entry = sub(entry, FourierTaylorSeries::constant(
                               dim_, fourier_cutoff_, taylor_degree_,
                               Complex(1.0)));
      }
      row += strip_norm_majorant(entry, domain_);
    }
    for (int j = 0; j < dim_; ++j) {
      FourierTaylorSeries column =
          partial_theta(A_[static_cast<std::size_t>(i)], j);
      for (int k = 0; k < dim_; ++k) {
        column = add(
            column,
            multiply(partial_theta(B_[static_cast<std::size_t>(i * dim_ + k)], j),
                     action_monomial(dim_, fourier_cutoff_, taylor_degree_, k)));
      }
      row += strip_norm_majorant(column, domain_);
    }
    worst = std::max(worst, row);
  }
  return worst;
}

std::pair<std::vector<double>, std::vector<double>> ComposedMap::evaluate(
    std::span<const double> action, std::span<const double> angle) const {
  if (dim_ == 0) {
    throw ValidationError("composed map: evaluate on an empty placeholder");
  }
  if (static_cast<int>(action.size()) != dim_ ||
      static_cast<int>(angle.size()) != dim_) {
    throw DimensionError("composed map: point dimension mismatch");
  }
  std::vector<double> r(static_cast<std::size_t>(dim_), 0.0);
  std::vector<double> theta(static_cast<std::size_t>(dim_), 0.0);
  for (int i = 0; i < dim_; ++i) {
    theta[static_cast<std::size_t>(i)] =
        angle[static_cast<std::size_t>(i)] +
        kam::evaluate(W_[static_cast<std::size_t>(i)], action, angle).real();
    double value =
        kam::evaluate(A_[static_cast<std::size_t>(i)], action, angle).real();
    for (int j = 0; j < dim_; ++j) {
      value += kam::evaluate(B_[static_cast<std::size_t>(i * dim_ + j)], action,
                             angle)
                   .real() *
               action[static_cast<std::size_t>(j)];
    }
    r[static_cast<std::size_t>(i)] = value;
  }
  return {std::move(r), std::move(theta)};
}

ComposedMap compose_step(const ComposedMap& map, const SymplecticMapData& step) {
  if (map.dim_ == 0) {
    throw ValidationError("compose_step: map is an empty placeholder");
  }
  if (step.dim != map.dim_) {
    throw DimensionError("compose_step: step dimension mismatch");
  }
  if (step.domain.rho + kScheduleBoundaryTol < map.domain_.rho ||
      step.domain.delta_strip + kScheduleBoundaryTol <
          map.domain_.delta_strip) {
    throw ValidationError(
        "compose_step: the step is certified on a narrower domain than the "
        "stored composition domain");
  }
  const int d = map.dim_;
  const int cutoff = map.fourier_cutoff_;
  const int degree = map.taylor_degree_;

  bool shift_is_zero = true;
  for (const auto& w : step.w) {
    if (!w.empty()) {
      shift_is_zero = false;
      break;
    }
  }
  std::optional<AngleComposition> comp;
  if (!shift_is_zero) comp.emplace(step.w, cutoff);
  auto pulled = [&](const FourierTaylorSeries& f) {
    if (shift_is_zero) return truncated(f, cutoff, degree);
    return symmetrized(truncated(comp->apply(f), cutoff, degree));
  };

  ComposedMap out;
  out.dim_ = d;
  out.fourier_cutoff_ = cutoff;
  out.taylor_degree_ = degree;
  out.domain_ = map.domain_;
  out.deviations_ = map.deviations_;

  std::vector<FourierTaylorSeries> b_pulled;
  b_pulled.reserve(static_cast<std::size_t>(d * d));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      b_pulled.push_back(pulled(map.B_[static_cast<std::size_t>(i * d + j)]));
    }
  }

  out.W_.reserve(static_cast<std::size_t>(d));
  out.A_.reserve(static_cast<std::size_t>(d));
  out.B_.resize(static_cast<std::size_t>(d * d));
  for (int i = 0; i < d; ++i) {
    out.W_.push_back(
        add(step.w[static_cast<std::size_t>(i)],
            pulled(map.W_[static_cast<std::size_t>(i)])));
    FourierTaylorSeries offset = pulled(map.A_[static_cast<std::size_t>(i)]);
    for (int l = 0; l < d; ++l) {
      offset = add(offset,
                   multiply(b_pulled[static_cast<std::size_t>(i * d + l)],
                            step.a_step[static_cast<std::size_t>(l)]));
    }
    out.A_.push_back(std::move(offset));
    for (int j = 0; j < d; ++j) {
      FourierTaylorSeries entry =
          FourierTaylorSeries::zero(d, cutoff, degree);
      for (int l = 0; l < d; ++l) {
        entry = add(entry,
                    multiply(b_pulled[static_cast<std::size_t>(i * d + l)],
                             step.b_step[static_cast<std::size_t>(l * d + j)]));
      }
      out.B_[static_cast<std::size_t>(i * d + j)] = std::move(entry);
    }
  }

  // |psi_{n} - psi_{n-1}|_V, the worst component over angle and action parts
  // with the action part measured as a function of (R, phi) on V.
  double deviation = 0.0;
  for (int i = 0; i < d; ++i) {
    deviation = std::max(
        deviation,
        strip_norm_majorant(sub(out.W_[static_cast<std::size_t>(i)],
                                map.W_[static_cast<std::size_t>(i)]),
                            map.domain_));
    FourierTaylorSeries action_change =
        sub(out.A_[static_cast<std::size_t>(i)],
            map.A_[static_cast<std::size_t>(i)]);
    for (int j = 0; j < d; ++j) {
      action_change =
          add(action_change,
              multiply(sub(out.B_[static_cast<std::size_t>(i * d + j)],
                           map.B_[static_cast<std::size_t>(i * d + j)]),
                       action_monomial(d, cutoff, degree, j)));
    }
    deviation =
        std::max(deviation, strip_norm_majorant(action_change, map.domain_));
  }
  out.deviations_.push_back(deviation);
  return out;
}

// --- the driver ------------------------------------------------------------------

RunResult run_iteration(const KolmogorovForm& initial, const TwistData& twist,
                        const IterationSchedule& schedule) {
  RunResult out;
  out.final_form = initial;
  out.map = ComposedMap::identity(initial.dim(), initial.fourier_cutoff(),
                                  initial.taylor_degree(),
                                  schedule.verification_domain());

  const Eigen::MatrixXd reference = twist.S_hat;
  const double eps0 = initial.epsilon();
  const bool enforce_hypotheses = eps0 < schedule.kappa;

  KolmogorovForm form = initial;
  TwistData current = TwistData::from_form(form, &reference);
  HypothesisReport report = check_hypotheses(form, current, schedule, 0);
  out.records.push_back({0, 0.0, form.epsilon(), 0.0, current.gamma,
                         current.eta, report.h1_ok, report.h2_ok, 0.0, 0.0});

  int n = 1;
  std::ostringstream message;
  message << std::scientific << std::setprecision(6);
  while (true) {
    if (form.epsilon() < schedule.stop_tol) {
      out.status = RunStatus::Converged;
      out.converged = true;
      message << "converged: eps = " << form.epsilon() << " below stop_tol = "
              << schedule.stop_tol << " after " << (n - 1) << " step(s)";
      break;
    }
    if (n > schedule.max_steps) {
      out.status = RunStatus::MaxStepsReached;
      message << "max_steps = " << schedule.max_steps
              << " reached with eps = " << form.epsilon();
      break;
    }
    if (enforce_hypotheses &&
        (!out.records.back().h1_ok || !out.records.back().h2_ok)) {
      out.status = RunStatus::HypothesisFailed;
      message << "hypotheses failed entering step " << n << ": "
              << report.details;
      break;
    }
    const double delta_n = schedule.delta(n);
    const double previous_eps = form.epsilon();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      GeneratorSolution gen = solve_generator(form, current);
      SymplecticMapData step = build_map(gen, form.domain().shrink(delta_n));
      PullbackResult pulled = pullback(form, gen, delta_n);
      out.map = compose_step(out.map, step);
      form = std::move(pulled.form);
      current = TwistData::from_form(form, &reference);
      const auto t1 = std::chrono::steady_clock::now();
      report = check_hypotheses(form, current, schedule, n);
      // Log-space keeps the audit ratio finite when eps^2 underflows.
      const double audit =
          previous_eps > 0.0 && form.epsilon() > 0.0
              ? std::exp(std::log(form.epsilon()) +
                         2.0 * schedule.nu * std::log(delta_n) -
                         2.0 * std::log(previous_eps))
              : 0.0;
      out.records.push_back(
          {n, delta_n, form.epsilon(), step.deviation_forward, current.gamma,
           current.eta, report.h1_ok, report.h2_ok, audit,
           std::chrono::duration<double, std::milli>(t1 - t0).count()});
      out.final_form = form;
      ++n;
    } catch (const Error& error) {
      out.status = RunStatus::StepError;
      message << "step " << n << " failed [" << error.kind()
              << "]: " << error.what();
      break;
    }
  }
  out.message = message.str();
  out.deviation_sum = out.map.deviation_sum();
  out.jacobian_defect = out.map.jacobian_defect();

  // Least-squares slope of log eps_n against log eps_{n-1}.
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 1; i < out.records.size(); ++i) {
    const double before = out.records[i - 1].epsilon_n;
    const double after = out.records[i].epsilon_n;
    if (before > 0.0 && after > 0.0) {
      xs.push_back(std::log(before));
      ys.push_back(std::log(after));
    }
  }
  if (xs.size() >= 2) {
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mean_x += xs[i];
      mean_y += ys[i];
    }
    mean_x /= static_cast<double>(xs.size());
    mean_y /= static_cast<double>(xs.size());
    double cov = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      cov += (xs[i] - mean_x) * (ys[i] - mean_y);
      var += (xs[i] - mean_x) * (xs[i] - mean_x);
    }
    if (var > 0.0) out.quadratic_slope = cov / var;
  }
  return out;
}

}  // namespace kam
