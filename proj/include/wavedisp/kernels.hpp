#pragma once

// Building blocks for radial kernels K(|x - y|) sampled on grids and point sets.

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <vector>

#include "wavedisp/grid.hpp"

namespace wavedisp::kernels {

// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(int order);

// Mean of log|u| over a square of side h centred at 0.
double log_cell_average(double h);

// Mean of f(|u|) over a square of side h centred at 0; f may have an
// integrable logarithmic singularity at the origin.
template <class F>
auto radial_cell_average(F f, double h) -> decltype(f(1.0)) {
  using T = decltype(f(1.0));
  const double a = 0.5 * h;
  const double b = a * std::sqrt(2.0);
  const GaussRule& rule = gauss_legendre(48);
  T inner{};
  T outer{};
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double s = 0.5 * (rule.nodes[k] + 1.0);
    const double w = 0.5 * rule.weights[k];
    // r = a s^4 flattens the r log r endpoint behaviour.
    const double s3 = s * s * s;
    const double r_in = a * s3 * s;
    if (r_in > 0.0) inner += w * f(r_in) * (2.0 * M_PI * r_in) * (4.0 * a * s3);
    // r = a + (b - a) s^2 removes the square-root edge of the arc length.
    const double r_out = a + (b - a) * s * s;
    const double arc = 2.0 * M_PI * r_out - 8.0 * r_out * std::acos(std::min(1.0, a / r_out));
    outer += w * f(r_out) * arc * (2.0 * (b - a) * s);
  }
  return (inner + outer) / (h * h);
}

// Kernel values indexed by the integer offset between two grid points.
template <class T>
class OffsetTable {
 public:
  template <class F>
  OffsetTable(const Grid& grid, F value_at, T diagonal) : n_(grid.n_per_axis()) {
    values_.resize(static_cast<std::size_t>(n_) * n_);
    const double h = grid.spacing();
    for (int dy = 0; dy < n_; ++dy) {
      for (int dx = 0; dx < n_; ++dx) {
        values_[static_cast<std::size_t>(dy * n_ + dx)] =
            (dx == 0 && dy == 0) ? diagonal : static_cast<T>(value_at(h * std::hypot(dx, dy)));
      }
    }
  }

  T at(const Grid& grid, int i, int j) const {
    const int dx = std::abs(grid.column(i) - grid.column(j));
    const int dy = std::abs(grid.row(i) - grid.row(j));
    return values_[static_cast<std::size_t>(dy * n_ + dx)];
  }

  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> block(const Grid& grid, std::span<const int> rows,
                                                         std::span<const int> cols) const {
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> out(rows.size(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
      for (std::size_t r = 0; r < rows.size(); ++r) out(r, c) = at(grid, rows[r], cols[c]);
    }
    return out;
  }

 private:
  int n_;
  std::vector<T> values_;
};

std::vector<int> all_indices(const Grid& grid);

// +-(i/4) H0+-(lambda r) for r > 0.
std::complex<double> resolvent_value(double lambda, Sign sign, double r);
// Diagonal of the resolvent kernel: the log singularity is cell-averaged and
// the smooth remainder evaluated at r = 0, so R0 - g/||V||_1 - G0 vanishes on the diagonal.
std::complex<double> resolvent_diagonal(double lambda, Sign sign, double h);

double g0_value(double r);
double g0_diagonal(double h);
double g1_value(double r);
double g2_value(double r);

OffsetTable<std::complex<double>> resolvent_table(const Grid& grid, double lambda, Sign sign);
OffsetTable<double> g0_table(const Grid& grid);
OffsetTable<double> g1_table(const Grid& grid);
OffsetTable<double> g2_table(const Grid& grid);

// Resolvent kernel between arbitrary points; coincident points get the cell-average value.
Eigen::MatrixXcd resolvent_between(double lambda, Sign sign, const std::vector<Point>& rows,
                                   const std::vector<Point>& cols, double cell);

}  // namespace wavedisp::kernels
