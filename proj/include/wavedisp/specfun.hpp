#pragma once

#include <complex>

#include "wavedisp/common.hpp"

namespace wavedisp::specfun {

inline constexpr double kEulerGamma = 0.57721566490153286060651209;
inline constexpr double kPi = 3.14159265358979323846264338;

struct BesselPair {
  double j0;
  double y0;
};

// J0 and Y0 together; z must be positive (Y0 is singular at 0).
BesselPair bessel_j0_y0(double z);

double bessel_j0(double z);
double bessel_y0(double z);

// H0(z) = J0(z) + sign*i*Y0(z).
std::complex<double> hankel0(double z, Sign sign);

// exp(-sign*i*z) * H0(z): the Hankel function with its oscillation removed.
// For large z this is computed without forming the phase, so it stays smooth.
std::complex<double> hankel0_envelope(double z, Sign sign);

// -log(z) for 0 < z < 1 and 0 otherwise.
double log_minus(double z);
// log(z) for z > 1 and 0 otherwise. Both are nonnegative and log z = log_plus - log_minus.
double log_plus(double z);

// Smooth cutoff: 1 on x <= 1/2, 0 on x >= 1, C-infinity in between.
double smooth_cutoff(double x);

enum class BesselKind { j0, y0, h0_plus, h0_minus };

// Splits C(z) into a part supported on z <= 1/2 and oscillatory pieces
//   C(z) = small_part(z) + exp(i z) large_plus(z) + exp(-i z) large_minus(z)
// with large_plus/large_minus vanishing for z <= 1/4 and bounded by a multiple of (1+z)^(-1/2).
class BesselSplit {
 public:
  explicit BesselSplit(BesselKind kind) : kind_(kind) {}

  BesselKind kind() const { return kind_; }
  std::complex<double> value(double z) const;
  std::complex<double> small_part(double z) const;
  std::complex<double> large_plus(double z) const;
  std::complex<double> large_minus(double z) const;
  std::complex<double> recombine(double z) const;

 private:
  BesselKind kind_;
};

BesselSplit bessel_split(BesselKind kind);

}  // namespace wavedisp::specfun
