#pragma once

// Threshold depth of the Gaussian well A exp(-r^2) in angular momentum l, from
// the zero-energy radial equation.

#include <cmath>
#include <stdexcept>

namespace reference {

// R'' + R'/r - l^2 R / r^2 + A exp(-r^2) R = 0, started from R = r^l. Outside
// the well R = a r^l + b r^-l; returns a multiple of a, which vanishes at a
// threshold depth.
inline double growing_coefficient(double depth, int l) {
  const double h = 1e-3;
  double r = 1e-3;
  double R = std::pow(r, l);
  double dR = l * std::pow(r, l - 1);
  const auto rhs = [&](double s, double y, double dy) {
    return -dy / s + l * l / (s * s) * y - depth * std::exp(-s * s) * y;
  };
  while (r < 10.0) {
    const double k1 = dR, m1 = rhs(r, R, dR);
    const double k2 = dR + 0.5 * h * m1, m2 = rhs(r + 0.5 * h, R + 0.5 * h * k1, dR + 0.5 * h * m1);
    const double k3 = dR + 0.5 * h * m2, m3 = rhs(r + 0.5 * h, R + 0.5 * h * k2, dR + 0.5 * h * m2);
    const double k4 = dR + h * m3, m4 = rhs(r + h, R + h * k3, dR + h * m3);
    R += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    dR += h / 6.0 * (m1 + 2 * m2 + 2 * m3 + m4);
    r += h;
    const double scale = std::abs(R) + std::abs(dR);
    R /= scale;
    dR /= scale;
  }
  return r * dR + l * R;
}

// Bisection for the threshold depth in [lo, hi].
inline double ode_threshold(int l, double lo, double hi) {
  const bool lo_sign = growing_coefficient(lo, l) > 0;
  if ((growing_coefficient(hi, l) > 0) == lo_sign) throw std::invalid_argument("threshold not bracketed");
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((growing_coefficient(mid, l) > 0) == lo_sign ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace reference
