#include "wavedisp/kernels.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "wavedisp/specfun.hpp"

namespace wavedisp::kernels {

const GaussRule& gauss_legendre(int order) {
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(order));
  rule.weights.resize(static_cast<std::size_t>(order));
  for (int i = 0; i < order; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= order; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = order * (x * p1 - p0) / (x * x - 1.0);
    rule.nodes[static_cast<std::size_t>(order - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(order - 1 - i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

double log_cell_average(double h) {
  return std::log(h) + 0.5 * (0.5 * std::numbers::pi - 3.0 - std::numbers::ln2);
}

std::vector<int> all_indices(const Grid& grid) {
  std::vector<int> out(static_cast<std::size_t>(grid.size()));
  for (int k = 0; k < grid.size(); ++k) out[static_cast<std::size_t>(k)] = k;
  return out;
}

std::complex<double> resolvent_value(double lambda, Sign sign, double r) {
  const std::complex<double> i_quarter(0.0, 0.25 * sign_value(sign));
  return i_quarter * specfun::hankel0(lambda * r, sign);
}

std::complex<double> resolvent_diagonal(double lambda, Sign sign, double h) {
  // Cell average of the logarithmic part; the smooth remainder is taken at
  // coincidence, where it equals the constant of the small-energy expansion.
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const std::complex<double> constant(-(std::log(0.5 * lambda) + specfun::kEulerGamma) / two_pi,
                                      0.25 * sign_value(sign));
  return constant + g0_diagonal(h);
}

double g0_value(double r) { return -std::log(r) / (2.0 * std::numbers::pi); }
double g0_diagonal(double h) { return -log_cell_average(h) / (2.0 * std::numbers::pi); }
double g1_value(double r) { return r * r; }
double g2_value(double r) { return r == 0.0 ? 0.0 : r * r * std::log(r) / (8.0 * std::numbers::pi); }

OffsetTable<std::complex<double>> resolvent_table(const Grid& grid, double lambda, Sign sign) {
  if (!(lambda > 0.0)) fail(ErrorCode::domain, "resolvent needs lambda > 0");
  return OffsetTable<std::complex<double>>(
      grid, [&](double r) { return resolvent_value(lambda, sign, r); },
      resolvent_diagonal(lambda, sign, grid.spacing()));
}

OffsetTable<double> g0_table(const Grid& grid) {
  return OffsetTable<double>(grid, g0_value, g0_diagonal(grid.spacing()));
}

OffsetTable<double> g1_table(const Grid& grid) { return OffsetTable<double>(grid, g1_value, 0.0); }

OffsetTable<double> g2_table(const Grid& grid) { return OffsetTable<double>(grid, g2_value, 0.0); }

Eigen::MatrixXcd resolvent_between(double lambda, Sign sign, const std::vector<Point>& rows,
                                   const std::vector<Point>& cols, double cell) {
  if (!(lambda > 0.0)) fail(ErrorCode::domain, "resolvent needs lambda > 0");
  Eigen::MatrixXcd out(rows.size(), cols.size());
  const std::complex<double> diag = resolvent_diagonal(lambda, sign, cell);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double d = distance(rows[r], cols[c]);
      out(r, c) = d < 1e-12 * cell ? diag : resolvent_value(lambda, sign, d);
    }
  }
  return out;
}

}  // namespace wavedisp::kernels
