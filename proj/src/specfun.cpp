#include "wavedisp/specfun.hpp"

#include <array>
#include <cmath>
#include <string>

namespace wavedisp::specfun {
namespace {

constexpr double kSeriesLimit = 8.0;
constexpr double kAsymptoticLimit = 20.0;

void require_finite(double z, const char* who) {
  if (!std::isfinite(z)) fail(ErrorCode::domain, std::string(who) + ": non-finite argument");
}

void require_positive(double z, const char* who) {
  require_finite(z, who);
  if (z <= 0.0) fail(ErrorCode::domain, std::string(who) + ": argument must be positive");
}

// Power series; also returns the Y0 series part without the log term.
BesselPair series(double z) {
  const double q = 0.25 * z * z;
  double term = 1.0;
  double j = 1.0;
  double harmonic = 0.0;
  double ysum = 0.0;
  for (int k = 1; k < 60; ++k) {
    term *= -q / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    j += term;
    ysum -= harmonic * term;
    if (std::abs(term) * (1.0 + harmonic) < 1e-18 * std::abs(j)) break;
  }
  if (z == 0.0) return {1.0, -HUGE_VAL};
  const double y = (2.0 / kPi) * ((std::log(0.5 * z) + kEulerGamma) * j + ysum);
  return {j, y};
}

// Miller backward recurrence for J_n, normalised by J0 + 2 sum J_2k = 1,
// and the Neumann series for Y0.
BesselPair recurrence(double z) {
  int top = static_cast<int>(z + 16.0 * std::cbrt(z) + 30.0);
  top += top % 2;
  double next = 0.0;
  double cur = 1e-300;
  double even_sum = 0.0;
  double neumann = 0.0;
  double j0 = 0.0;
  for (int n = top; n >= 1; --n) {
    const double prev = (2.0 * n / z) * cur - next;
    next = cur;
    cur = prev;
    const int m = n - 1;
    if (m > 0 && m % 2 == 0) {
      even_sum += cur;
      const int k = m / 2;
      neumann += ((k % 2 == 0) ? 1.0 : -1.0) * cur / k;
    }
    if (std::abs(cur) > 1e250) {
      cur *= 1e-250;
      next *= 1e-250;
      even_sum *= 1e-250;
      neumann *= 1e-250;
    }
  }
  j0 = cur;
  const double norm = j0 + 2.0 * even_sum;
  j0 /= norm;
  neumann /= norm;
  const double y0 = (2.0 / kPi) * (std::log(0.5 * z) + kEulerGamma) * j0 - (4.0 / kPi) * neumann;
  return {j0, y0};
}

// Hankel asymptotic amplitudes P and Q, truncated at the smallest term.
struct Amplitudes {
  double p;
  double q;
};

Amplitudes asymptotic_amplitudes(double z) {
  double p = 1.0;
  double q = 0.0;
  double term = 1.0;
  double last = HUGE_VAL;
  const double inv8z = 1.0 / (8.0 * z);
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -odd * odd * inv8z / k;
    const double mag = std::abs(term);
    if (mag >= last) break;
    last = mag;
    // a_k carries the sign (-1)^k; P and Q alternate over even and odd k.
    if (k % 2 == 0) {
      p += ((k / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    } else {
      q += (((k - 1) / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    }
    if (mag < 1e-17) break;
  }
  return {p, q};
}

BesselPair asymptotic(double z) {
  const auto [p, q] = asymptotic_amplitudes(z);
  const double s = std::sin(z);
  const double c = std::cos(z);
  const double cos_phase = (c + s) * M_SQRT1_2;
  const double sin_phase = (s - c) * M_SQRT1_2;
  const double scale = std::sqrt(2.0 / (kPi * z));
  return {scale * (p * cos_phase - q * sin_phase), scale * (p * sin_phase + q * cos_phase)};
}

BesselPair evaluate(double z) {
  if (z <= kSeriesLimit) return series(z);
  if (z < kAsymptoticLimit) return recurrence(z);
  return asymptotic(z);
}

}  // namespace

BesselPair bessel_j0_y0(double z) {
  require_positive(z, "bessel_j0_y0");
  return evaluate(z);
}

double bessel_j0(double z) {
  require_finite(z, "bessel_j0");
  if (z < 0.0) fail(ErrorCode::domain, "bessel_j0: negative argument");
  if (z == 0.0) return 1.0;
  return evaluate(z).j0;
}

double bessel_y0(double z) {
  require_positive(z, "bessel_y0");
  return evaluate(z).y0;
}

std::complex<double> hankel0(double z, Sign sign) {
  require_positive(z, "hankel0");
  const auto [j, y] = evaluate(z);
  return {j, sign_value(sign) * y};
}

std::complex<double> hankel0_envelope(double z, Sign sign) {
  require_positive(z, "hankel0_envelope");
  const double sg = sign_value(sign);
  if (z >= kAsymptoticLimit) {
    // H0(z) = sqrt(2/(pi z)) (P + sign i Q) exp(sign i (z - pi/4)).
    const auto [p, q] = asymptotic_amplitudes(z);
    const std::complex<double> amp(p, sg * q);
    const std::complex<double> quarter(M_SQRT1_2, -sg * M_SQRT1_2);
    return std::sqrt(2.0 / (kPi * z)) * amp * quarter;
  }
  const auto [j, y] = evaluate(z);
  return std::complex<double>(j, sg * y) * std::polar(1.0, -sg * z);
}

double log_minus(double z) {
  require_positive(z, "log_minus");
  return z < 1.0 ? -std::log(z) : 0.0;
}

double log_plus(double z) {
  require_positive(z, "log_plus");
  return z > 1.0 ? std::log(z) : 0.0;
}

double smooth_cutoff(double x) {
  if (x <= 0.5) return 1.0;
  if (x >= 1.0) return 0.0;
  // Ratio of exp(-1/u) bumps; C-infinity at both ends of [1/2, 1].
  const double s = 2.0 * x - 1.0;
  const double a = std::exp(-1.0 / (1.0 - s));
  const double b = std::exp(-1.0 / s);
  return a / (a + b);
}

BesselSplit bessel_split(BesselKind kind) { return BesselSplit(kind); }

std::complex<double> BesselSplit::value(double z) const {
  switch (kind_) {
    case BesselKind::j0:
      return bessel_j0(z);
    case BesselKind::y0:
      return bessel_y0(z);
    case BesselKind::h0_plus:
      return hankel0(z, Sign::plus);
    case BesselKind::h0_minus:
      return hankel0(z, Sign::minus);
  }
  return 0.0;
}

std::complex<double> BesselSplit::small_part(double z) const {
  const double weight = smooth_cutoff(2.0 * z);
  if (weight == 0.0) return 0.0;
  return weight * value(z);
}

std::complex<double> BesselSplit::large_plus(double z) const {
  const double weight = 1.0 - smooth_cutoff(2.0 * z);
  if (weight == 0.0) return 0.0;
  const std::complex<double> env = hankel0_envelope(z, Sign::plus);
  switch (kind_) {
    case BesselKind::j0:
      return weight * 0.5 * env;
    case BesselKind::y0:
      return weight * env / std::complex<double>(0.0, 2.0);
    case BesselKind::h0_plus:
      return weight * env;
    case BesselKind::h0_minus:
      return 0.0;
  }
  return 0.0;
}

std::complex<double> BesselSplit::large_minus(double z) const {
  const double weight = 1.0 - smooth_cutoff(2.0 * z);
  if (weight == 0.0) return 0.0;
  const std::complex<double> env = hankel0_envelope(z, Sign::minus);
  switch (kind_) {
    case BesselKind::j0:
      return weight * 0.5 * env;
    case BesselKind::y0:
      return -weight * env / std::complex<double>(0.0, 2.0);
    case BesselKind::h0_plus:
      return 0.0;
    case BesselKind::h0_minus:
      return weight * env;
  }
  return 0.0;
}

std::complex<double> BesselSplit::recombine(double z) const {
  const std::complex<double> i(0.0, 1.0);
  return small_part(z) + std::exp(i * z) * large_plus(z) + std::exp(-i * z) * large_minus(z);
}

}  // namespace wavedisp::specfun
