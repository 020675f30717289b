#pragma once

#include <Eigen/Dense>
#include <complex>

#include "wavedisp/grid.hpp"

namespace wavedisp {

// Integral operator sampled on a grid: (K f)(x_i) = sum_j K(x_i, y_j) w_j f(y_j).
class KernelOperator {
 public:
  KernelOperator(GridPtr grid, Eigen::MatrixXcd matrix) : grid_(std::move(grid)), matrix_(std::move(matrix)) {}

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }
  Eigen::MatrixXcd& matrix() { return matrix_; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& f) const;
  // W^(1/2) K W^(1/2): the form whose matrix algebra matches operator algebra.
  Eigen::MatrixXcd symmetric_form() const;
  // Largest |K - K^T| entry.
  double asymmetry() const;

 private:
  GridPtr grid_;
  Eigen::MatrixXcd matrix_;
};

KernelOperator free_resolvent(double lambda, Sign sign, GridPtr grid);
KernelOperator g0_kernel(GridPtr grid);
KernelOperator g1_kernel(GridPtr grid);
KernelOperator g2_kernel(GridPtr grid);

// g+-(lambda) = ||V||_1 (+-i/4 - log(lambda/2)/(2 pi) - gamma/(2 pi)).
class GFunctions {
 public:
  explicit GFunctions(double l1_norm) : l1_(l1_norm) {}
  double l1_norm() const { return l1_; }
  std::complex<double> operator()(double lambda, Sign sign) const;
  std::complex<double> plus(double lambda) const { return (*this)(lambda, Sign::plus); }
  std::complex<double> minus(double lambda) const { return (*this)(lambda, Sign::minus); }

 private:
  double l1_;
};

struct GValues {
  std::complex<double> plus;
  std::complex<double> minus;
};

GValues g_functions(double lambda, const FactoredPotential& fp);

struct ExpansionResidual {
  KernelOperator E0;
  // max over off-diagonal pairs of |E0(x, y)| / (lambda^(1/2) |x - y|^(1/2))
  double envelope_ratio = 0.0;
  // max |E0| over pairs with |x - y| <= h
  double near_max = 0.0;
};

// E0 = R0(lambda^2) - g(lambda)/||V||_1 - G0, entrywise.
ExpansionResidual expansion_residual_E0(double lambda, Sign sign, const FactoredPotential& fp);

// Operator norm on weighted L^2 of <x>^-sigma R0(lambda^2) <y>^-sigma.
double weighted_resolvent_norm(double lambda, Sign sign, const Grid& grid, double sigma);

}  // namespace wavedisp
