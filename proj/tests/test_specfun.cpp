#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "oracle_bessel.hpp"
#include "wavedisp/specfun.hpp"

using namespace wavedisp;
using namespace wavedisp::specfun;

TEST_CASE("J0 at the origin and its curvature") {
  CHECK(bessel_j0(0.0) == 1.0);
  for (double h : {1e-2, 1e-3}) {
    CHECK((bessel_j0(h) - 1.0) / (h * h) == doctest::Approx(-0.25).epsilon(1e-4));
  }
}

TEST_CASE("J0 and Y0 at z = 10 match the wide-precision reference") {
  CHECK(std::abs(bessel_j0(10.0) - reference::j0(10.0)) < 1e-13);
  CHECK(std::abs(bessel_y0(10.0) - reference::y0(10.0)) < 1e-13);
}

TEST_CASE("J0 and Y0 match the reference on [1e-6, 1e4]") {
  double worst_j = 0.0;
  double worst_y = 0.0;
  for (double z = 1e-6; z <= 1e4; z *= 1.037) {
    const auto [j, y] = bessel_j0_y0(z);
    worst_j = std::max(worst_j, std::abs(j - reference::j0(z)));
    worst_y = std::max(worst_y, std::abs(y - reference::y0(z)) / std::max(1.0, std::abs(reference::y0(z))));
  }
  CHECK(worst_j < 1e-13);
  CHECK(worst_y < 1e-13);
}

TEST_CASE("Y0 logarithmic behaviour near zero") {
  const double z = 1e-6;
  const double limit = 2.0 * kEulerGamma / kPi;
  CHECK(std::abs(bessel_y0(z) - (2.0 / kPi) * std::log(z / 2.0) - limit) < 1e-8);
  CHECK(bessel_y0(1e-3) < bessel_y0(1e-2));
  CHECK(bessel_y0(1e-2) < 0.0);
}

TEST_CASE("Y0 small-argument expansion") {
  for (double z : {1e-3, 1e-2, 0.05}) {
    const double lead = (2.0 / kPi) * (std::log(z / 2.0) + kEulerGamma) * bessel_j0(z) + (2.0 / kPi) * z * z / 4.0;
    CHECK(std::abs(bessel_y0(z) - lead) < std::pow(z, 4));
  }
}

TEST_CASE("Hankel function identities") {
  for (double z : {0.01, 0.7, 3.0, 9.5, 27.0, 400.0}) {
    const auto hp = hankel0(z, Sign::plus);
    const auto hm = hankel0(z, Sign::minus);
    CHECK(hp == std::conj(hm));
    const auto diff = hp - hm;
    CHECK(diff.real() == 0.0);
    CHECK(diff.imag() == 2.0 * bessel_y0(z));
    const auto prod = hp * hm;
    CHECK(std::abs(prod.imag()) <= 1e-15 * std::abs(prod.real()));
    CHECK(prod.real() > 0.0);
  }
  CHECK(std::abs(hankel0(100.0, Sign::plus)) <= 1.0 / std::sqrt(100.0));
}

TEST_CASE("Hankel envelope constant") {
  double worst = 0.0;
  for (double z = 1.0; z <= 1e4; z *= 1.01) {
    for (Sign s : {Sign::plus, Sign::minus}) {
      const auto env = hankel0_envelope(z, s);
      worst = std::max(worst, std::abs(env) * std::sqrt(1.0 + z));
      const auto direct = hankel0(z, s) * std::polar(1.0, -sign_value(s) * z);
      CHECK(std::abs(env - direct) < 1e-12);
    }
  }
  CHECK(worst < 1.2);
}

TEST_CASE("Wronskian") {
  for (double z : {0.5, 1.0, 5.0, 20.0}) {
    const double d = 1e-5 * z;
    const double dj = (bessel_j0(z + d) - bessel_j0(z - d)) / (2 * d);
    const double dy = (bessel_y0(z + d) - bessel_y0(z - d)) / (2 * d);
    const double w = bessel_j0(z) * dy - dj * bessel_y0(z);
    const double expected = 2.0 / (kPi * z);
    CHECK(std::abs(w - expected) <= 1e-6 * expected);
  }
}

TEST_CASE("J0 is bounded by one") {
  for (double z = 0.0; z < 200.0; z += 0.173) CHECK(std::abs(bessel_j0(z)) <= 1.0);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(bessel_j0(NAN), Error);
  CHECK_THROWS_AS(bessel_j0(-1.0), Error);
  CHECK_THROWS_AS(bessel_y0(0.0), Error);
  CHECK_THROWS_AS(bessel_y0(-2.0), Error);
  CHECK_THROWS_AS(hankel0(0.0, Sign::plus), Error);
  CHECK_THROWS_AS(log_minus(0.0), Error);
  CHECK_THROWS_AS(log_plus(-1.0), Error);
  try {
    bessel_y0(0.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::domain);
  }
}

TEST_CASE("log plus and log minus") {
  const double e = std::numbers::e;
  CHECK(log_minus(1.0 / e) == doctest::Approx(1.0));
  CHECK(log_plus(1.0 / e) == 0.0);
  CHECK(log_minus(e) == 0.0);
  CHECK(log_plus(e) == doctest::Approx(1.0));
  for (double z : {0.1, 1.0, 10.0}) CHECK(std::log(z) == doctest::Approx(log_plus(z) - log_minus(z)));
}

TEST_CASE("smooth cutoff") {
  CHECK(smooth_cutoff(0.0) == 1.0);
  CHECK(smooth_cutoff(0.5) == 1.0);
  CHECK(smooth_cutoff(1.0) == 0.0);
  CHECK(smooth_cutoff(3.0) == 0.0);
  double prev = 1.0;
  for (double x = 0.5; x <= 1.0; x += 0.01) {
    const double c = smooth_cutoff(x);
    CHECK(c <= prev);
    CHECK(c + smooth_cutoff(1.5 - x) == doctest::Approx(1.0).epsilon(1e-14));
    prev = c;
  }
}

TEST_CASE("Bessel splits") {
  const BesselKind kinds[] = {BesselKind::j0, BesselKind::y0, BesselKind::h0_plus, BesselKind::h0_minus};
  CHECK(std::abs(bessel_split(BesselKind::j0).recombine(0.3) - bessel_j0(0.3)) < 1e-12);
  for (BesselKind kind : kinds) {
    const BesselSplit split = bessel_split(kind);
    CHECK(split.small_part(0.6) == 0.0);
    CHECK(split.large_plus(0.2) == 0.0);
    CHECK(split.large_minus(0.2) == 0.0);
    double worst_recombination = 0.0;
    double worst_envelope = 0.0;
    double worst_small = 0.0;
    for (double z = 1e-4; z <= 1e3; z *= 1.02) {
      const auto exact = split.value(z);
      worst_recombination = std::max(worst_recombination, std::abs(split.recombine(z) - exact) / std::abs(exact));
      if (z >= 0.25) {
        const double env = std::max(std::abs(split.large_plus(z)), std::abs(split.large_minus(z)));
        worst_envelope = std::max(worst_envelope, env * std::sqrt(1.0 + z));
      }
      if (z <= 0.5) worst_small = std::max(worst_small, std::abs(split.small_part(z)) / (1.0 + std::abs(std::log(z))));
    }
    CHECK(worst_recombination <= 1e-12);
    CHECK(worst_envelope < 1.5);
    CHECK(worst_small < 1.0);
  }
}
