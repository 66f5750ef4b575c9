#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "kamnf/diophantine.hpp"

using kam::DiophantineCertificate;
using kam::FrequencyVector;
using kam::ResonanceScan;
using kam::worst_resonance;

namespace {
const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;
// Reference constant for omega = (1, golden), tau = 1, depth 200, computed
// once by the exhaustive scan and frozen: the minimum sits at k = (1,-1)
// where |omega.k| = golden - 1.
const double kGoldenCHat = 0.6180339887498948482;
}  // namespace

TEST_CASE("golden-mean frequency: frozen reference constant") {
  ResonanceScan scan = worst_resonance(std::vector<double>{1.0, kGolden}, 1.0, 200);
  CHECK(scan.c_hat == doctest::Approx(kGoldenCHat).epsilon(1e-15));
  CHECK(scan.c_hat == std::abs(1.0 - kGolden));  // exact in double arithmetic
  REQUIRE(scan.k_star.size() == 2);
  CHECK(scan.k_star[0] == 1);
  CHECK(scan.k_star[1] == -1);
  CHECK(scan.divisor == doctest::Approx(kGolden - 1.0).epsilon(1e-15));
  CHECK(scan.scan_depth == 200);
  CHECK(scan.tau == 1.0);
}

TEST_CASE("exact resonance reported as c_hat = 0 with the smallest mode") {
  for (double tau : {1.0, 2.5}) {
    ResonanceScan scan = worst_resonance(std::vector<double>{1.0, 1.0}, tau, 10);
    CHECK(scan.c_hat == 0.0);
    REQUIRE(scan.k_star.size() == 2);
    // (1,-1) and (2,-2) are both exact; the lexicographically smallest wins.
    CHECK(scan.k_star[0] == 1);
    CHECK(scan.k_star[1] == -1);
  }
  ResonanceScan axis = worst_resonance(std::vector<double>{0.0, 1.0}, 1.0, 7);
  CHECK(axis.c_hat == 0.0);
  CHECK(axis.k_star == std::vector<int>{1, 0});
}

TEST_CASE("one-dimensional scans have their minimum at k = 1") {
  ResonanceScan unit = worst_resonance(std::vector<double>{1.0}, 0.5, 100);
  CHECK(unit.c_hat == 1.0);  // |k|^{1.5} is minimized at k = 1
  CHECK(unit.k_star == std::vector<int>{1});

  ResonanceScan two = worst_resonance(std::vector<double>{2.0}, 0.5, 100);
  CHECK(two.c_hat == 2.0);
  CHECK(two.k_star == std::vector<int>{1});
}

TEST_CASE("scaling the frequency scales c_hat and keeps the argmin") {
  const double lambda = 2.5;
  ResonanceScan base = worst_resonance(std::vector<double>{1.0, kGolden}, 1.0, 60);
  ResonanceScan scaled = worst_resonance(
      std::vector<double>{lambda, lambda * kGolden}, 1.0, 60);
  CHECK(scaled.c_hat == doctest::Approx(lambda * base.c_hat).epsilon(1e-14));
  CHECK(scaled.k_star == base.k_star);
}

TEST_CASE("c_hat is non-increasing in the scan depth") {
  double prev = std::numeric_limits<double>::infinity();
  for (int kmax : {1, 3, 10, 50, 200}) {
    ResonanceScan scan =
        worst_resonance(std::vector<double>{1.0, kGolden}, 1.2, kmax);
    CHECK(scan.c_hat <= prev);
    prev = scan.c_hat;
  }
}

TEST_CASE("scan argmin lies on the canonical half lattice") {
  for (double w2 : {kGolden, std::sqrt(2.0), 0.4142135623730951}) {
    ResonanceScan scan = worst_resonance(std::vector<double>{1.0, w2}, 1.0, 40);
    int first_nonzero = 0;
    for (int x : scan.k_star) {
      if (x != 0) {
        first_nonzero = x;
        break;
      }
    }
    CHECK(first_nonzero > 0);
  }
}

TEST_CASE("certify attaches the scan result as a certificate") {
  FrequencyVector fv =
      FrequencyVector::certify({1.0, kGolden}, 1.0, 200);
  REQUIRE(fv.certificate().has_value());
  const DiophantineCertificate& cert = *fv.certificate();
  CHECK(cert.c == doctest::Approx(kGoldenCHat).epsilon(1e-15));
  CHECK(cert.tau == 1.0);
  CHECK(cert.scan_depth == 200);
  CHECK(fv.dim() == 2);
  CHECK(fv[1] == kGolden);
  CHECK(fv.norm2() == doctest::Approx(std::sqrt(1.0 + kGolden * kGolden)));

  FrequencyVector one = FrequencyVector::certify({2.0}, 0.5, 100);
  CHECK(one.certificate()->c == 2.0);

  FrequencyVector raw(std::vector<double>{1.0, 1.0});  // resonant but uncertified
  CHECK(!raw.certificate().has_value());
}

TEST_CASE("certify rejects resonant frequencies naming the mode") {
  try {
    FrequencyVector::certify({1.0, 1.0}, 1.0, 10);
    FAIL("expected ResonantFrequencyError");
  } catch (const kam::ResonantFrequencyError& e) {
    CHECK(e.resonant_mode() == std::vector<int>{1, -1});
    CHECK(e.kind() == "resonant_frequency");
  }
}

TEST_CASE("mode_dot pairs omega with the Fourier index of a term") {
  FrequencyVector fv = FrequencyVector::certify({1.0, kGolden}, 1.0, 50);
  kam::TermIndex idx = kam::make_index({1, -1}, {0, 0});
  CHECK(fv.mode_dot(idx) == doctest::Approx(1.0 - kGolden).epsilon(1e-15));
  kam::TermIndex zero = kam::make_index({0, 0}, {2, 0});
  CHECK(fv.mode_dot(zero) == 0.0);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(worst_resonance(std::vector<double>{}, 1.0, 10),
                  kam::ValidationError);
  CHECK_THROWS_AS(worst_resonance(std::vector<double>{0.0, 0.0}, 1.0, 10),
                  kam::ValidationError);
  CHECK_THROWS_AS(worst_resonance(std::vector<double>{1.0}, 1.0, 0),
                  kam::ValidationError);
  CHECK_THROWS_AS(
      worst_resonance(std::vector<double>{std::nan("")}, 1.0, 10),
      kam::ValidationError);
  CHECK_THROWS_AS(
      worst_resonance(std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0}, 1.0, 2),
      kam::ValidationError);
  CHECK_THROWS_AS(FrequencyVector::certify({1.0, kGolden}, 0.0, 10),
                  kam::ValidationError);
  CHECK_THROWS_AS(FrequencyVector::certify({1.0, kGolden}, -1.0, 10),
                  kam::ValidationError);
  CHECK_THROWS_AS(FrequencyVector(std::vector<double>{}), kam::ValidationError);
}
