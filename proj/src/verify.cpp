#include "kamnf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "kamnf/errors.hpp"

namespace kam {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// m + omega.r + r.S(theta).r/2 + eps h + g as a single series, so the exact
// phase-space gradient is available through term-wise differentiation.
FourierTaylorSeries assembled_hamiltonian(const KolmogorovForm& H) {
  const int d = H.dim();
  const int K = H.fourier_cutoff();
  const int M = H.taylor_degree();
  FourierTaylorSeries total =
      FourierTaylorSeries::constant(d, K, M, Complex(H.energy_offset()));
  for (int i = 0; i < d; ++i) {
    total = add(total, scale(action_monomial(d, K, M, i), Complex(H.omega()[i])));
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      total = add(total,
                  scale(multiply(H.S(i, j),
                                 multiply(action_monomial(d, K, M, i),
                                          action_monomial(d, K, M, j))),
                        Complex(0.5)));
    }
  }
  total = add(total, scale(H.h(), Complex(H.epsilon())));
  return add(total, H.g());
}

}  // namespace

ConjugacyResidual conjugacy_residual(const KolmogorovForm& original,
                                     const ComposedMap& map,
                                     const FrequencyVector& omega,
                                     int grid_per_axis, double fd_step) {
  const int d = original.dim();
  if (map.dim() != d || omega.dim() != d) {
    throw DimensionError("conjugacy residual: dimension mismatch");
  }
  if (grid_per_axis < 2) {
    throw ValidationError("conjugacy residual: need at least two grid points");
  }
  const double h =
      fd_step > 0.0 ? fd_step : kFreqFdStepFactor * original.domain().rho;

  auto value = [&](std::span<const double> action,
                   std::span<const double> angle) {
    auto [r, theta] = map.evaluate(action, angle);
    return evaluate_hamiltonian(original, r, theta);
  };

  long total = 1;
  for (int a = 0; a < d; ++a) total *= grid_per_axis;

  double lowest = std::numeric_limits<double>::infinity();
  double highest = -std::numeric_limits<double>::infinity();
  double freq_err = 0.0;
  std::vector<double> angle(static_cast<std::size_t>(d), 0.0);
  std::vector<double> origin(static_cast<std::size_t>(d), 0.0);
  std::vector<double> probe(static_cast<std::size_t>(d), 0.0);
  for (long point = 0; point < total; ++point) {
    long rest = point;
    for (int a = 0; a < d; ++a) {
      angle[static_cast<std::size_t>(a)] =
          kTwoPi * static_cast<double>(rest % grid_per_axis) /
          static_cast<double>(grid_per_axis);
      rest /= grid_per_axis;
    }
    const double at_zero = value(origin, angle);
    lowest = std::min(lowest, at_zero);
    highest = std::max(highest, at_zero);
    for (int a = 0; a < d; ++a) {
      auto central = [&](double step) {
        std::fill(probe.begin(), probe.end(), 0.0);
        probe[static_cast<std::size_t>(a)] = step;
        const double plus = value(probe, angle);
        probe[static_cast<std::size_t>(a)] = -step;
        const double minus = value(probe, angle);
        return (plus - minus) / (2.0 * step);
      };
      const double coarse = central(h);
      const double fine = central(h / 2.0);
      const double refined = (4.0 * fine - coarse) / 3.0;
      freq_err = std::max(freq_err, std::abs(refined - omega[a]));
    }
  }

  ConjugacyResidual out;
  out.freq_err = freq_err;
  out.angle_dep_err = highest - lowest;
  out.grid_points = static_cast<int>(total);
  out.fd_step = h;
  return out;
}

FlowInvariance flow_invariance(const KolmogorovForm& original,
                               const ComposedMap& map,
                               std::span<const double> theta0, double T,
                               double dt) {
  const int d = original.dim();
  if (map.dim() != d || static_cast<int>(theta0.size()) != d) {
    throw DimensionError("flow invariance: dimension mismatch");
  }
  if (!(T > 0.0) || !(dt > 0.0)) {
    throw ValidationError("flow invariance: T and dt must be positive");
  }
  const double raw_steps = T / dt;
  if (!(raw_steps <= 100'000'000.0)) {
    throw ValidationError("flow invariance: step count above 1e8");
  }
  const long steps = std::lround(raw_steps);

  const FourierTaylorSeries hamiltonian = assembled_hamiltonian(original);
  std::vector<FourierTaylorSeries> d_dr;
  std::vector<FourierTaylorSeries> d_dtheta;
  for (int i = 0; i < d; ++i) {
    d_dr.push_back(partial_r(hamiltonian, i));
    d_dtheta.push_back(partial_theta(hamiltonian, i));
  }

  using State = std::vector<double>;
  auto rhs = [&](const State& r, const State& theta, State& dr, State& dtheta) {
    for (int i = 0; i < d; ++i) {
      dtheta[static_cast<std::size_t>(i)] =
          evaluate(d_dr[static_cast<std::size_t>(i)], r, theta).real();
      dr[static_cast<std::size_t>(i)] =
          -evaluate(d_dtheta[static_cast<std::size_t>(i)], r, theta).real();
    }
  };

  const State zero(static_cast<std::size_t>(d), 0.0);
  const State start_angle(theta0.begin(), theta0.end());
  auto [r, theta] = map.evaluate(zero, start_angle);

  // Nearest point of the torus {psi(0, angle)}: Gauss-Newton on the wrapped
  // phase-space residual, seeded by the linear flow.
  Eigen::VectorXd residual_vec(2 * d);
  auto residual = [&](const State& angle_par, const State& r_point,
                      const State& theta_point, Eigen::VectorXd& out) {
    auto [torus_r, torus_theta] = map.evaluate(zero, angle_par);
    for (int i = 0; i < d; ++i) {
      out(i) = torus_r[static_cast<std::size_t>(i)] -
               r_point[static_cast<std::size_t>(i)];
      out(d + i) = std::remainder(torus_theta[static_cast<std::size_t>(i)] -
                                      theta_point[static_cast<std::size_t>(i)],
                                  kTwoPi);
    }
  };
  auto torus_distance = [&](const State& r_point, const State& theta_point,
                            State angle_par) {
    const double fd = 1e-6;
    Eigen::MatrixXd jac(2 * d, d);
    Eigen::VectorXd plus(2 * d);
    Eigen::VectorXd minus(2 * d);
    double best = std::numeric_limits<double>::infinity();
    for (int pass = 0; pass < kTorusProjectionIterations; ++pass) {
      residual(angle_par, r_point, theta_point, residual_vec);
      best = std::min(best, residual_vec.norm());
      for (int a = 0; a < d; ++a) {
        angle_par[static_cast<std::size_t>(a)] += fd;
        residual(angle_par, r_point, theta_point, plus);
        angle_par[static_cast<std::size_t>(a)] -= 2.0 * fd;
        residual(angle_par, r_point, theta_point, minus);
        angle_par[static_cast<std::size_t>(a)] += fd;
        jac.col(a) = (plus - minus) / (2.0 * fd);
      }
      Eigen::VectorXd delta =
          (jac.transpose() * jac).ldlt().solve(jac.transpose() * residual_vec);
      if (!delta.allFinite()) break;
      for (int a = 0; a < d; ++a) {
        angle_par[static_cast<std::size_t>(a)] -= delta(a);
      }
    }
    residual(angle_par, r_point, theta_point, residual_vec);
    return std::min(best, residual_vec.norm());
  };

  FlowInvariance out;
  out.steps = steps;

  // Least-squares accumulators of theta_i(t) against t, per component.
  std::vector<double> sum_y(static_cast<std::size_t>(d), 0.0);
  std::vector<double> sum_ty(static_cast<std::size_t>(d), 0.0);
  double sum_t = 0.0;
  double sum_tt = 0.0;
  const double rho = original.domain().rho;

  State k1r(zero), k1t(zero), k2r(zero), k2t(zero), k3r(zero), k3t(zero),
      k4r(zero), k4t(zero), mid_r(zero), mid_t(zero), seed(start_angle);
  for (long step = 0; step <= steps; ++step) {
    const double t = dt * static_cast<double>(step);
    for (int i = 0; i < d; ++i) {
      if (!std::isfinite(r[static_cast<std::size_t>(i)]) ||
          !std::isfinite(theta[static_cast<std::size_t>(i)]) ||
          std::abs(r[static_cast<std::size_t>(i)]) > rho) {
        std::ostringstream msg;
        msg << "flow invariance: trajectory left the action polydisc at t = "
            << t;
        throw IntegratorError(msg.str());
      }
    }

    for (int i = 0; i < d; ++i) {
      seed[static_cast<std::size_t>(i)] =
          start_angle[static_cast<std::size_t>(i)] + original.omega()[i] * t;
    }
    out.max_distance = std::max(out.max_distance, torus_distance(r, theta, seed));

    sum_t += t;
    sum_tt += t * t;
    for (int i = 0; i < d; ++i) {
      sum_y[static_cast<std::size_t>(i)] += theta[static_cast<std::size_t>(i)];
      sum_ty[static_cast<std::size_t>(i)] +=
          t * theta[static_cast<std::size_t>(i)];
    }
    if (step == steps) break;

    rhs(r, theta, k1r, k1t);
    for (int i = 0; i < d; ++i) {
      mid_r[static_cast<std::size_t>(i)] =
          r[static_cast<std::size_t>(i)] +
          0.5 * dt * k1r[static_cast<std::size_t>(i)];
      mid_t[static_cast<std::size_t>(i)] =
          theta[static_cast<std::size_t>(i)] +
          0.5 * dt * k1t[static_cast<std::size_t>(i)];
    }
    rhs(mid_r, mid_t, k2r, k2t);
    for (int i = 0; i < d; ++i) {
      mid_r[static_cast<std::size_t>(i)] =
          r[static_cast<std::size_t>(i)] +
          0.5 * dt * k2r[static_cast<std::size_t>(i)];
      mid_t[static_cast<std::size_t>(i)] =
          theta[static_cast<std::size_t>(i)] +
          0.5 * dt * k2t[static_cast<std::size_t>(i)];
    }
    rhs(mid_r, mid_t, k3r, k3t);
    for (int i = 0; i < d; ++i) {
      mid_r[static_cast<std::size_t>(i)] =
          r[static_cast<std::size_t>(i)] + dt * k3r[static_cast<std::size_t>(i)];
      mid_t[static_cast<std::size_t>(i)] =
          theta[static_cast<std::size_t>(i)] +
          dt * k3t[static_cast<std::size_t>(i)];
    }
    rhs(mid_r, mid_t, k4r, k4t);
    for (int i = 0; i < d; ++i) {
      r[static_cast<std::size_t>(i)] +=
          dt / 6.0 *
          (k1r[static_cast<std::size_t>(i)] +
           2.0 * k2r[static_cast<std::size_t>(i)] +
           2.0 * k3r[static_cast<std::size_t>(i)] +
           k4r[static_cast<std::size_t>(i)]);
      theta[static_cast<std::size_t>(i)] +=
          dt / 6.0 *
          (k1t[static_cast<std::size_t>(i)] +
           2.0 * k2t[static_cast<std::size_t>(i)] +
           2.0 * k3t[static_cast<std::size_t>(i)] +
           k4t[static_cast<std::size_t>(i)]);
    }
  }

  const double count = static_cast<double>(steps + 1);
  const double denom = count * sum_tt - sum_t * sum_t;
  out.fitted_frequency.assign(static_cast<std::size_t>(d), 0.0);
  out.frequency_rel_err = 0.0;
  if (denom > 0.0) {
    for (int i = 0; i < d; ++i) {
      const double slope =
          (count * sum_ty[static_cast<std::size_t>(i)] -
           sum_t * sum_y[static_cast<std::size_t>(i)]) /
          denom;
      out.fitted_frequency[static_cast<std::size_t>(i)] = slope;
      const double scale = std::max(std::abs(original.omega()[i]),
                                    std::numeric_limits<double>::min());
      out.frequency_rel_err =
          std::max(out.frequency_rel_err,
                   std::abs(slope - original.omega()[i]) / scale);
    }
  }
  return out;
}

double symplectic_check(const ComposedMap& map, int samples,
                        std::uint64_t seed, double fd_step) {
  const int d = map.dim();
  if (d == 0) {
    throw ValidationError("symplectic check: map is an empty placeholder");
  }
  if (samples < 1) {
    throw ValidationError("symplectic check: need at least one sample");
  }
  if (!(fd_step > 0.0)) {
    throw ValidationError("symplectic check: fd_step must be positive");
  }
  const int n = 2 * d;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> random_action(
      -0.8 * map.domain().rho, 0.8 * map.domain().rho);
  std::uniform_real_distribution<double> random_angle(0.0, kTwoPi);

  Eigen::MatrixXd canonical = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < d; ++i) {
    canonical(i, d + i) = 1.0;
    canonical(d + i, i) = -1.0;
  }

  auto image = [&](const Eigen::VectorXd& z) {
    std::vector<double> action(static_cast<std::size_t>(d));
    std::vector<double> angle(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      action[static_cast<std::size_t>(i)] = z(i);
      angle[static_cast<std::size_t>(i)] = z(d + i);
    }
    auto [r, theta] = map.evaluate(action, angle);
    Eigen::VectorXd out(n);
    for (int i = 0; i < d; ++i) {
      out(i) = r[static_cast<std::size_t>(i)];
      out(d + i) = theta[static_cast<std::size_t>(i)];
    }
    return out;
  };

  double worst = 0.0;
  Eigen::MatrixXd jac(n, n);
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < d; ++i) {
      z(i) = random_action(rng);
      z(d + i) = random_angle(rng);
    }
    for (int col = 0; col < n; ++col) {
      Eigen::VectorXd forward = z;
      Eigen::VectorXd backward = z;
      forward(col) += fd_step;
      backward(col) -= fd_step;
      jac.col(col) = (image(forward) - image(backward)) / (2.0 * fd_step);
    }
    worst = std::max(
        worst,
        (jac.transpose() * canonical * jac - canonical).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace kam
