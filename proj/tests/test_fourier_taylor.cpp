#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "kamnf/fourier_taylor.hpp"

using namespace kam;

namespace {

const Complex kI(0.0, 1.0);

// cos(theta_j) = (e^{i theta_j} + e^{-i theta_j}) / 2 in dimension dim.
FourierTaylorSeries cosine(int dim, int axis, int K, int M) {
  std::vector<int> kp(dim, 0), km(dim, 0), m0(dim, 0);
  kp[axis] = 1;
  km[axis] = -1;
  return FourierTaylorSeries(dim, K, M,
                             {{make_index(kp, m0), 0.5}, {make_index(km, m0), 0.5}});
}

// sin(theta_j) = (e^{i theta_j} - e^{-i theta_j}) / (2i).
FourierTaylorSeries sine(int dim, int axis, int K, int M) {
  std::vector<int> kp(dim, 0), km(dim, 0), m0(dim, 0);
  kp[axis] = 1;
  km[axis] = -1;
  return FourierTaylorSeries(
      dim, K, M,
      {{make_index(kp, m0), -0.5 * kI}, {make_index(km, m0), 0.5 * kI}});
}

FourierTaylorSeries monomial(int dim, std::vector<int> m, int K, int M,
                             Complex c = 1.0) {
  std::vector<int> k0(dim, 0);
  return FourierTaylorSeries(dim, K, M, {{make_index(k0, m), c}});
}

// Random real-valued series supported on |k|_inf <= k_extent, |m|_1 <= m_extent
// but declared with the (larger) cutoffs K, M so products stay untruncated.
FourierTaylorSeries random_series(std::mt19937& rng, int dim, int k_extent,
                                  int m_extent, int K, int M) {
  std::uniform_int_distribution<int> kd(-k_extent, k_extent);
  std::uniform_int_distribution<int> md(0, m_extent);
  std::uniform_real_distribution<double> cd(-1.0, 1.0);
  std::vector<Term> terms;
  for (int t = 0; t < 12; ++t) {
    std::vector<int> k(dim), m(dim, 0);
    for (int i = 0; i < dim; ++i) k[i] = kd(rng);
    int budget = m_extent;
    for (int i = 0; i < dim; ++i) {
      const int mi = std::min(md(rng), budget);
      m[i] = mi;
      budget -= mi;
    }
    terms.push_back({make_index(k, m), Complex(cd(rng), cd(rng))});
  }
  return symmetrized(FourierTaylorSeries(dim, K, M, std::move(terms)));
}

double coeff_distance(const FourierTaylorSeries& f, const FourierTaylorSeries& g) {
  double out = 0.0;
  for (const Term& t : f.terms()) out = std::max(out, std::abs(t.coeff - g.coeff(t.index)));
  for (const Term& t : g.terms()) out = std::max(out, std::abs(t.coeff - f.coeff(t.index)));
  return out;
}

}  // namespace

TEST_CASE("term index ordering and guards") {
  TermIndex a = make_index({0, 1}, {2, 0});
  TermIndex b = make_index({0, 1}, {2, 0});
  CHECK(a == b);
  CHECK(a.k_sup() == 1);
  CHECK(a.k_abs_sum() == 1);
  CHECK(a.degree() == 2);
  CHECK(make_index({-3, 2}, {0, 0}).k_abs_sum() == 5);

  CHECK_THROWS_AS(make_index({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}), DimensionError);
  CHECK_THROWS_AS(make_index({1}, {0, 0}), DimensionError);
  CHECK_THROWS_AS(make_index({0}, {-1}), DimensionError);
}

TEST_CASE("constructor normalizes terms") {
  SUBCASE("duplicates are summed before thresholding") {
    FourierTaylorSeries f(1, 2, 2,
                          {{make_index({1}, {0}), 0.75},
                           {make_index({1}, {0}), 0.25},
                           {make_index({0}, {1}), 1.0},
                           {make_index({0}, {1}), -1.0}});
    CHECK(f.size() == 1);
    CHECK(f.coeff(make_index({1}, {0})) == Complex(1.0));
    CHECK(f.coeff(make_index({0}, {1})) == Complex(0.0));
  }
  SUBCASE("out-of-cutoff terms are cut and reported") {
    TruncationStats stats;
    FourierTaylorSeries f(1, 1, 1,
                          {{make_index({2}, {0}), 3.0}, {make_index({0}, {0}), 1.0}},
                          &stats);
    CHECK(f.size() == 1);
    CHECK(stats.discarded_mass == doctest::Approx(3.0));
  }
  SUBCASE("relative drop threshold") {
    FourierTaylorSeries f(1, 1, 0,
                          {{make_index({0}, {0}), 1.0},
                           {make_index({1}, {0}), 1e-18},
                           {make_index({-1}, {0}), 1e-12}});
    CHECK(f.size() == 2);  // the 1e-18 term sits below 1e-16 * max
  }
  SUBCASE("guards") {
    CHECK_THROWS_AS(FourierTaylorSeries(0, 1, 1, {}), DimensionError);
    CHECK_THROWS_AS(FourierTaylorSeries(5, 1, 1, {}), DimensionError);
    CHECK_THROWS_AS(FourierTaylorSeries(1, -1, 1, {}), ValidationError);
    // Term with an entry beyond the declared dimension.
    CHECK_THROWS_AS(FourierTaylorSeries(1, 2, 2, {{make_index({0, 1}, {0, 0}), 1.0}}),
                    DimensionError);
    const double nan = std::nan("");
    CHECK_THROWS_AS(FourierTaylorSeries(1, 1, 1, {{make_index({0}, {0}), nan}}),
                    ValidationError);
    FourierTaylorSeries placeholder;  // dimension-zero default
    CHECK_THROWS_AS(scale(placeholder, 2.0), DimensionError);
  }
}

TEST_CASE("multiply: identity, cancellation, hand expansion") {
  FourierTaylorSeries one = FourierTaylorSeries::constant(1, 2, 2, 1.0);
  FourierTaylorSeries g(1, 2, 2,
                        {{make_index({1}, {1}), Complex(0.3, -0.2)},
                         {make_index({0}, {0}), 2.0}});
  CHECK(coeff_distance(multiply(one, g), g) == 0.0);

  FourierTaylorSeries ep(1, 1, 0, {{make_index({1}, {0}), 1.0}});
  FourierTaylorSeries em(1, 1, 0, {{make_index({-1}, {0}), 1.0}});
  FourierTaylorSeries prod = multiply(ep, em);
  CHECK(prod.size() == 1);
  CHECK(prod.coeff(make_index({0}, {0})) == Complex(1.0));

  // r * (r + cos t) = r^2 + r cos t.
  FourierTaylorSeries r = monomial(1, {1}, 1, 2);
  FourierTaylorSeries rc = add(monomial(1, {1}, 1, 2), cosine(1, 0, 1, 2));
  FourierTaylorSeries out = multiply(r, rc);
  CHECK(out.size() == 3);
  CHECK(out.coeff(make_index({0}, {2})) == Complex(1.0));
  CHECK(out.coeff(make_index({1}, {1})) == Complex(0.5));
  CHECK(out.coeff(make_index({-1}, {1})) == Complex(0.5));

  // Truncation mass is reported when the product leaves the cutoffs.
  TruncationStats stats;
  FourierTaylorSeries cut = multiply(ep, ep, &stats);
  CHECK(cut.empty());
  CHECK(stats.discarded_mass == doctest::Approx(1.0));

  CHECK_THROWS_AS(multiply(ep, FourierTaylorSeries::constant(2, 1, 1, 1.0)),
                  DimensionError);
}

TEST_CASE("ring axioms on random series") {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 20; ++trial) {
    FourierTaylorSeries f = random_series(rng, 2, 2, 2, 8, 6);
    FourierTaylorSeries g = random_series(rng, 2, 2, 2, 8, 6);
    FourierTaylorSeries h = random_series(rng, 2, 2, 2, 8, 6);
    const double scale3 = f.max_abs_coeff() * g.max_abs_coeff() * h.max_abs_coeff();

    CHECK(coeff_distance(multiply(f, g), multiply(g, f)) <= 1e-12 * scale3);
    CHECK(coeff_distance(multiply(multiply(f, g), h), multiply(f, multiply(g, h))) <=
          1e-12 * std::max(scale3, 1.0));
    CHECK(coeff_distance(multiply(add(f, g), h), add(multiply(f, h), multiply(g, h))) <=
          1e-12 * std::max(scale3, 1.0));
  }
}

TEST_CASE("derivatives") {
  const int K = 2, M = 2;
  SUBCASE("elementary examples") {
    CHECK(coeff_distance(partial_theta(cosine(1, 0, K, M), 0),
                         scale(sine(1, 0, K, M), -1.0)) < 1e-15);
    CHECK(partial_theta(FourierTaylorSeries::constant(1, K, M, 3.0), 0).empty());

    // d/dt [r sin(2t)] = 2 r cos(2t).
    FourierTaylorSeries rsin2(1, K, M,
                              {{make_index({2}, {1}), -0.5 * kI},
                               {make_index({-2}, {1}), 0.5 * kI}});
    FourierTaylorSeries rcos2(1, K, M,
                              {{make_index({2}, {1}), 0.5},
                               {make_index({-2}, {1}), 0.5}});
    CHECK(coeff_distance(partial_theta(rsin2, 0), scale(rcos2, 2.0)) < 1e-15);

    CHECK(coeff_distance(partial_r(monomial(1, {2}, K, M), 0),
                         monomial(1, {1}, K, M, 2.0)) < 1e-15);
    CHECK(partial_r(FourierTaylorSeries::constant(1, K, M, 5.0), 0).empty());

    // d/dr2 [r1 r2 cos t1] = r1 cos t1.
    FourierTaylorSeries f = multiply(monomial(2, {1, 1}, 2, 2), cosine(2, 0, 2, 2));
    FourierTaylorSeries expect = multiply(monomial(2, {1, 0}, 2, 2), cosine(2, 0, 2, 2));
    CHECK(coeff_distance(partial_r(f, 1), expect) < 1e-15);

    CHECK_THROWS_AS(partial_theta(f, 2), DimensionError);
    CHECK_THROWS_AS(partial_r(f, -1), DimensionError);
  }
  SUBCASE("Leibniz rule on random series") {
    std::mt19937 rng(777);
    for (int trial = 0; trial < 10; ++trial) {
      FourierTaylorSeries f = random_series(rng, 2, 2, 2, 8, 6);
      FourierTaylorSeries g = random_series(rng, 2, 2, 2, 8, 6);
      for (int axis = 0; axis < 2; ++axis) {
        FourierTaylorSeries lhs = partial_theta(multiply(f, g), axis);
        FourierTaylorSeries rhs = add(multiply(partial_theta(f, axis), g),
                                      multiply(f, partial_theta(g, axis)));
        CHECK(coeff_distance(lhs, rhs) <= 1e-12 * std::max(1.0, lhs.max_abs_coeff()));
        lhs = partial_r(multiply(f, g), axis);
        rhs = add(multiply(partial_r(f, axis), g), multiply(f, partial_r(g, axis)));
        CHECK(coeff_distance(lhs, rhs) <= 1e-12 * std::max(1.0, lhs.max_abs_coeff()));
      }
    }
  }
}

TEST_CASE("average extracts the angular mean") {
  CHECK(average(cosine(1, 0, 2, 2)).empty());
  FourierTaylorSeries f = add(FourierTaylorSeries::constant(1, 2, 2, 3.0),
                              cosine(1, 0, 2, 2));
  CHECK(average(f).size() == 1);
  CHECK(average(f).coeff(make_index({0}, {0})) == Complex(3.0));

  // r1^2 + r1 sin t2 -> r1^2.
  FourierTaylorSeries g = add(monomial(2, {2, 0}, 2, 2),
                              multiply(monomial(2, {1, 0}, 2, 2), sine(2, 1, 2, 2)));
  CHECK(coeff_distance(average(g), monomial(2, {2, 0}, 2, 2)) < 1e-15);
  // f - average(f) has zero angular mean.
  CHECK(average(sub(g, average(g))).empty());
}

TEST_CASE("strip norm majorant") {
  SUBCASE("examples") {
    CHECK(strip_norm_majorant(FourierTaylorSeries::zero(1, 2, 2), {1.0, 1.0}) == 0.0);
    CHECK(strip_norm_majorant(cosine(1, 0, 2, 2), {1.0, 0.0}) == doctest::Approx(1.0));
    CHECK(strip_norm_majorant(cosine(1, 0, 2, 2), {1.0, std::log(2.0)}) ==
          doctest::Approx(2.0));
  }
  SUBCASE("monotone, subadditive, submultiplicative") {
    std::mt19937 rng(999);
    for (int trial = 0; trial < 10; ++trial) {
      FourierTaylorSeries f = random_series(rng, 2, 2, 2, 8, 6);
      FourierTaylorSeries g = random_series(rng, 2, 2, 2, 8, 6);
      const AnalyticityDomain big{0.8, 0.4}, small{0.5, 0.1};
      CHECK(strip_norm_majorant(f, small) <= strip_norm_majorant(f, big) * (1 + 1e-12));
      CHECK(strip_norm_majorant(add(f, g), big) <=
            (strip_norm_majorant(f, big) + strip_norm_majorant(g, big)) * (1 + 1e-12));
      CHECK(strip_norm_majorant(multiply(f, g), big) <=
            strip_norm_majorant(f, big) * strip_norm_majorant(g, big) * (1 + 1e-12));
    }
  }
  SUBCASE("overflow reported") {
    FourierTaylorSeries spike(1, 500, 0, {{make_index({400}, {0}), 1.0}});
    CHECK_THROWS_AS(strip_norm_majorant(spike, {1.0, 2.0}), MajorantOverflowError);
  }
  SUBCASE("domain shrink guards") {
    AnalyticityDomain dom{1.0, 0.5};
    AnalyticityDomain s = dom.shrink(0.25);
    CHECK(s.rho == doctest::Approx(0.75));
    CHECK(s.delta_strip == doctest::Approx(0.25));
    CHECK_THROWS_AS(dom.shrink(0.75), ValidationError);
    CHECK_THROWS_AS(dom.shrink(-0.1), ValidationError);
  }
}

TEST_CASE("evaluate") {
  SUBCASE("examples") {
    std::vector<double> r{0.37}, th{2.1};
    CHECK(evaluate(FourierTaylorSeries::constant(1, 2, 2, 1.0), r, th) ==
          Complex(1.0));
    std::vector<double> r2{2.0};
    CHECK(evaluate(monomial(1, {1}, 2, 2), r2, th).real() == doctest::Approx(2.0));

    // cos at a purely imaginary angle is cosh.
    const double d = 0.7;
    std::vector<Complex> rc{Complex(0.0, 0.0)}, tc{Complex(0.0, d)};
    CHECK(evaluate(cosine(1, 0, 2, 2), rc, tc).real() ==
          doctest::Approx(std::cosh(d)).epsilon(1e-14));
    CHECK(evaluate(cosine(1, 0, 2, 2), rc, tc).imag() == doctest::Approx(0.0));
  }
  SUBCASE("majorant dominates on the domain") {
    std::mt19937 rng(4242);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const AnalyticityDomain dom{0.6, 0.3};
    FourierTaylorSeries f = random_series(rng, 2, 2, 2, 8, 6);
    const double bound = strip_norm_majorant(f, dom);
    for (int s = 0; s < 200; ++s) {
      std::vector<Complex> r(2), th(2);
      for (int i = 0; i < 2; ++i) {
        r[i] = std::polar(dom.rho * unit(rng), 2 * std::numbers::pi * unit(rng));
        th[i] = Complex(2 * std::numbers::pi * unit(rng),
                        dom.delta_strip * (2 * unit(rng) - 1));
      }
      CHECK(std::abs(evaluate(f, r, th)) <= bound * (1 + 1e-12));
    }
  }
  SUBCASE("dimension guard") {
    std::vector<double> r{1.0}, th{0.0, 0.0};
    CHECK_THROWS_AS(evaluate(monomial(1, {1}, 2, 2), r, th), DimensionError);
  }
}

TEST_CASE("conjugate symmetry") {
  FourierTaylorSeries asym(1, 2, 0, {{make_index({1}, {0}), Complex(0.0, 1.0)}});
  CHECK_FALSE(asym.is_conjugate_symmetric());
  FourierTaylorSeries sym = symmetrized(asym);
  CHECK(sym.is_conjugate_symmetric());
  // A symmetrized series takes real values at real points.
  std::vector<double> r{0.0}, th{1.234};
  CHECK(std::abs(evaluate(sym, r, th).imag()) < 1e-15);
  CHECK(cosine(2, 1, 2, 2).is_conjugate_symmetric());
}

TEST_CASE("compose_angle") {
  SUBCASE("identity shift returns the series unchanged") {
    FourierTaylorSeries f = add(cosine(1, 0, 4, 2), monomial(1, {2}, 4, 2));
    std::vector<FourierTaylorSeries> v{FourierTaylorSeries::zero(1, 4, 0)};
    AngleComposition comp(v, 4);
    CHECK(comp.is_identity());
    CHECK(coeff_distance(comp.apply(f), f) == 0.0);
  }
  SUBCASE("constant shift multiplies modes by phases") {
    const double c = 0.3;
    FourierTaylorSeries f(1, 2, 0, {{make_index({1}, {0}), 1.0}});
    std::vector<FourierTaylorSeries> v{FourierTaylorSeries::constant(1, 2, 0, c)};
    FourierTaylorSeries out = compose_angle(f, v);
    CHECK(std::abs(out.coeff(make_index({1}, {0})) - std::exp(kI * c)) < 1e-13);
  }
  SUBCASE("grid oracle: cos(t + 0.1 sin t)") {
    const int K = 16;
    FourierTaylorSeries f = cosine(1, 0, K, 0);
    std::vector<FourierTaylorSeries> v{scale(sine(1, 0, K, 0), 0.1)};
    TruncationStats stats;
    FourierTaylorSeries out = compose_angle(f, v, &stats);
    CHECK(out.is_conjugate_symmetric(1e-12));
    CHECK_FALSE(stats.aliasing_warning);
    for (int j = 0; j < 64; ++j) {
      const double t = 2 * std::numbers::pi * j / 64.0;
      std::vector<double> r{0.0}, th{t};
      const double expect = std::cos(t + 0.1 * std::sin(t));
      CHECK(std::abs(evaluate(out, r, th).real() - expect) < 1e-12);
      CHECK(std::abs(evaluate(out, r, th).imag()) < 1e-12);
    }
  }
  SUBCASE("round trip with the numerically inverted shift") {
    const int K = 16;
    FourierTaylorSeries v1 = scale(sine(1, 0, K, 0), 0.1);
    std::vector<FourierTaylorSeries> v{v1};
    // w = (Id+v)^{-1} - Id by fixed-point iteration w = -v(Id + w).
    std::vector<FourierTaylorSeries> w{scale(v1, -1.0)};
    for (int it = 0; it < 60; ++it) w[0] = scale(compose_angle(v1, w), -1.0);

    FourierTaylorSeries f = add(cosine(1, 0, K, 2), monomial(1, {1}, K, 2));
    FourierTaylorSeries back = compose_angle(compose_angle(f, v), w);
    CHECK(coeff_distance(back, truncated(f, K, 2)) < 1e-10);
  }
  SUBCASE("multi-axis composition against pointwise evaluation") {
    const int K = 12;
    FourierTaylorSeries f(2, K, 0,
                          {{make_index({1, 1}, {0, 0}), 0.5},
                           {make_index({-1, -1}, {0, 0}), 0.5}});
    std::vector<FourierTaylorSeries> v{scale(sine(2, 1, K, 0), 0.08),
                                       scale(cosine(2, 0, K, 0), 0.05)};
    FourierTaylorSeries out = compose_angle(f, v);
    for (int j = 0; j < 16; ++j) {
      const double t1 = 2 * std::numbers::pi * j / 16.0;
      const double t2 = 1.1 * t1 + 0.3;
      const double s1 = t1 + 0.08 * std::sin(t2);
      const double s2 = t2 + 0.05 * std::cos(t1);
      std::vector<double> r{0.0, 0.0}, th{t1, t2};
      CHECK(std::abs(evaluate(out, r, th).real() - std::cos(s1 + s2)) < 1e-11);
    }
  }
  SUBCASE("aliasing mass is reported for a too-small cutoff") {
    FourierTaylorSeries f = cosine(1, 0, 2, 0);
    std::vector<FourierTaylorSeries> v{scale(sine(1, 0, 2, 0), 0.5)};
    TruncationStats stats;
    compose_angle(f, v, &stats);
    CHECK(stats.aliasing_mass > 1e-4);
    CHECK(stats.aliasing_warning);
  }
  SUBCASE("shift with action dependence is rejected") {
    std::vector<FourierTaylorSeries> v{monomial(1, {1}, 2, 2)};
    CHECK_THROWS_AS(AngleComposition(v, 2), ValidationError);
  }
}

TEST_CASE("shift_actions") {
  SUBCASE("constant shift binomial: (r + 1/2)^2") {
    FourierTaylorSeries f = monomial(1, {2}, 2, 2);
    std::vector<FourierTaylorSeries> dr{FourierTaylorSeries::constant(1, 2, 2, 0.5)};
    FourierTaylorSeries full = shift_actions(f, dr);
    CHECK(full.coeff(make_index({0}, {2})) == Complex(1.0));
    CHECK(full.coeff(make_index({0}, {1})) == Complex(1.0));
    CHECK(full.coeff(make_index({0}, {0})) == Complex(0.25));

    FourierTaylorSeries tail1 = shift_actions(f, dr, 1);
    CHECK(tail1.coeff(make_index({0}, {2})) == Complex(0.0));
    CHECK(tail1.coeff(make_index({0}, {1})) == Complex(1.0));
    CHECK(tail1.coeff(make_index({0}, {0})) == Complex(0.25));

    FourierTaylorSeries tail2 = shift_actions(f, dr, 2);
    CHECK(tail2.size() == 1);
    CHECK(tail2.coeff(make_index({0}, {0})) == Complex(0.25));

    CHECK(shift_actions(f, dr, 3).empty());
  }
  SUBCASE("zero shift") {
    FourierTaylorSeries f = add(monomial(1, {2}, 2, 3), cosine(1, 0, 2, 3));
    std::vector<FourierTaylorSeries> dr{FourierTaylorSeries::zero(1, 2, 3)};
    CHECK(coeff_distance(shift_actions(f, dr), f) == 0.0);
    CHECK(shift_actions(f, dr, 1).empty());
  }
  SUBCASE("substitution agrees with pointwise evaluation") {
    // f(r,t) = r^3 + r cos t, dr(r,t) = 0.1 + 0.05 cos t + 0.03 r.
    FourierTaylorSeries f = add(monomial(1, {3}, 4, 3),
                                multiply(monomial(1, {1}, 4, 3), cosine(1, 0, 4, 3)));
    FourierTaylorSeries dr1 = add(
        add(FourierTaylorSeries::constant(1, 4, 3, 0.1),
            scale(cosine(1, 0, 4, 3), 0.05)),
        monomial(1, {1}, 4, 3, 0.03));
    std::vector<FourierTaylorSeries> dr{dr1};
    FourierTaylorSeries shifted = shift_actions(f, dr);
    for (int j = 0; j < 12; ++j) {
      const double t = 0.5 * j, r0 = 0.08 * j - 0.4;
      std::vector<double> rv{r0}, tv{t};
      const double z = 0.1 + 0.05 * std::cos(t) + 0.03 * r0;
      std::vector<double> rs{r0 + z};
      const Complex direct = evaluate(f, rs, tv);
      CHECK(std::abs(evaluate(shifted, rv, tv) - direct) < 1e-13);
    }
    // Order split: min_order 1 equals f(r+dr) - f(r); min_order 2 removes the
    // linear term dr * df/dr as well -- checked pointwise.
    FourierTaylorSeries t1 = shift_actions(f, dr, 1);
    FourierTaylorSeries t2 = shift_actions(f, dr, 2);
    FourierTaylorSeries dfdr = partial_r(f, 0);
    for (int j = 0; j < 12; ++j) {
      const double t = 0.7 * j + 0.1, r0 = 0.05 * j - 0.3;
      std::vector<double> rv{r0}, tv{t};
      const double z = 0.1 + 0.05 * std::cos(t) + 0.03 * r0;
      std::vector<double> rs{r0 + z};
      const Complex want1 = evaluate(f, rs, tv) - evaluate(f, rv, tv);
      CHECK(std::abs(evaluate(t1, rv, tv) - want1) < 1e-13);
      const Complex want2 = want1 - z * evaluate(dfdr, rv, tv);
      CHECK(std::abs(evaluate(t2, rv, tv) - want2) < 1e-13);
    }
  }
  SUBCASE("two actions, cross powers") {
    // f = r1 r2, shifts (a, b) constants: (r1+a)(r2+b).
    FourierTaylorSeries f = monomial(2, {1, 1}, 1, 2);
    std::vector<FourierTaylorSeries> dr{FourierTaylorSeries::constant(2, 1, 2, 0.2),
                                        FourierTaylorSeries::constant(2, 1, 2, -0.4)};
    FourierTaylorSeries out = shift_actions(f, dr);
    CHECK(out.coeff(make_index({0, 0}, {1, 1})) == Complex(1.0));
    CHECK(out.coeff(make_index({0, 0}, {1, 0})) == Complex(-0.4));
    CHECK(out.coeff(make_index({0, 0}, {0, 1})) == Complex(0.2));
    CHECK(out.coeff(make_index({0, 0}, {0, 0})).real() == doctest::Approx(-0.08));
    // Exactly the mixed second-order part.
    FourierTaylorSeries t2 = shift_actions(f, dr, 2);
    CHECK(t2.size() == 1);
    CHECK(t2.coeff(make_index({0, 0}, {0, 0})).real() == doctest::Approx(-0.08));
  }
  SUBCASE("dimension guard") {
    FourierTaylorSeries f = monomial(2, {1, 1}, 1, 2);
    std::vector<FourierTaylorSeries> dr{FourierTaylorSeries::constant(2, 1, 2, 0.2)};
    CHECK_THROWS_AS(shift_actions(f, dr), DimensionError);
  }
}

TEST_CASE("deterministic canonical order") {
  std::vector<Term> terms{{make_index({1}, {0}), 0.5},
                          {make_index({-1}, {0}), 0.5},
                          {make_index({0}, {2}), 1.5},
                          {make_index({2}, {1}), Complex(0.1, 0.2)}};
  FourierTaylorSeries a(1, 2, 2, terms);
  std::reverse(terms.begin(), terms.end());
  FourierTaylorSeries b(1, 2, 2, terms);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.terms()[i].index == b.terms()[i].index);
    CHECK(a.terms()[i].coeff == b.terms()[i].coeff);
  }
}
