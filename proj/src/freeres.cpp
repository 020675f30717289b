#include "wavedisp/freeres.hpp"

#include <numbers>

#include "wavedisp/kernels.hpp"
#include "wavedisp/specfun.hpp"

namespace wavedisp {

Eigen::VectorXcd KernelOperator::apply(const Eigen::VectorXcd& f) const {
  if (f.size() != matrix_.cols()) fail(ErrorCode::configuration, "KernelOperator::apply: size mismatch");
  return matrix_ * (grid_->weights().cast<std::complex<double>>().cwiseProduct(f));
}

Eigen::MatrixXcd KernelOperator::symmetric_form() const {
  const Eigen::VectorXcd s = grid_->weights().cwiseSqrt().cast<std::complex<double>>();
  return s.asDiagonal() * matrix_ * s.asDiagonal();
}

double KernelOperator::asymmetry() const { return (matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff(); }

namespace {

template <class T>
KernelOperator full_operator(GridPtr grid, const kernels::OffsetTable<T>& table) {
  const auto idx = kernels::all_indices(*grid);
  Eigen::MatrixXcd m = table.block(*grid, idx, idx).template cast<std::complex<double>>();
  return KernelOperator(std::move(grid), std::move(m));
}

}  // namespace

KernelOperator free_resolvent(double lambda, Sign sign, GridPtr grid) {
  return full_operator(grid, kernels::resolvent_table(*grid, lambda, sign));
}

KernelOperator g0_kernel(GridPtr grid) { return full_operator(grid, kernels::g0_table(*grid)); }
KernelOperator g1_kernel(GridPtr grid) { return full_operator(grid, kernels::g1_table(*grid)); }
KernelOperator g2_kernel(GridPtr grid) { return full_operator(grid, kernels::g2_table(*grid)); }

std::complex<double> GFunctions::operator()(double lambda, Sign sign) const {
  if (!(lambda > 0.0)) fail(ErrorCode::domain, "g functions need lambda > 0");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double re = -std::log(0.5 * lambda) / two_pi - specfun::kEulerGamma / two_pi;
  return l1_ * std::complex<double>(re, 0.25 * sign_value(sign));
}

GValues g_functions(double lambda, const FactoredPotential& fp) {
  if (!(fp.l1_norm > 0.0)) fail(ErrorCode::precondition, "g functions need a nonzero potential");
  const GFunctions g(fp.l1_norm);
  return {g.plus(lambda), g.minus(lambda)};
}

ExpansionResidual expansion_residual_E0(double lambda, Sign sign, const FactoredPotential& fp) {
  const GridPtr& grid = fp.grid;
  // g(lambda)/||V||_1 does not depend on V.
  const std::complex<double> scalar = GFunctions(1.0)(lambda, sign);
  KernelOperator R0 = free_resolvent(lambda, sign, grid);
  const KernelOperator G0 = g0_kernel(grid);
  Eigen::MatrixXcd e = R0.matrix() - G0.matrix();
  e.array() -= scalar;
  ExpansionResidual out{KernelOperator(grid, std::move(e))};
  const auto& pts = grid->points();
  const double h = grid->spacing();
  for (int j = 0; j < grid->size(); ++j) {
    for (int i = 0; i < grid->size(); ++i) {
      const double r = distance(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]);
      const double mag = std::abs(out.E0.matrix()(i, j));
      if (r <= h * (1.0 + 1e-12)) out.near_max = std::max(out.near_max, mag);
      if (i != j) out.envelope_ratio = std::max(out.envelope_ratio, mag / std::sqrt(lambda * r));
    }
  }
  return out;
}

double weighted_resolvent_norm(double lambda, Sign sign, const Grid& grid, double sigma) {
  const auto idx = kernels::all_indices(grid);
  const Eigen::MatrixXcd K = kernels::resolvent_table(grid, lambda, sign).block(grid, idx, idx);
  Eigen::VectorXd scale(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    scale[k] = std::sqrt(grid.weights()[k]) * std::pow(bracket(grid.point(k)), -sigma);
  }
  const Eigen::MatrixXcd A = scale.asDiagonal() * K * scale.asDiagonal();
  // Power iteration on A^* A.
  Eigen::VectorXcd x = Eigen::VectorXcd::Ones(A.cols()).normalized();
  double estimate = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::VectorXcd y = A.adjoint() * (A * x);
    const double next = std::sqrt(y.norm());
    x = y / y.norm();
    if (std::abs(next - estimate) <= 1e-12 * next) return next;
    estimate = next;
  }
  return estimate;
}

}  // namespace wavedisp
