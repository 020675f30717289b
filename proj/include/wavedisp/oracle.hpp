#pragma once

// Reference solutions: functional calculus of the finite-difference
// Hamiltonian on a box with Dirichlet walls, the closed-form free 2D wave
// kernel, and residual checks of continuum resolvent kernels.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <optional>

#include "wavedisp/evolution.hpp"
#include "wavedisp/symmetry.hpp"

namespace wavedisp {

struct BoxSettings {
  double half_width = 12.0;  // walls at +-half_width
  double spacing = 0.25;
  std::optional<Parity> sector = Parity{1, 1, 1};  // empty: no symmetry reduction
  double data_radius = 6.0;
};

// H = -Delta_h + V on the interior lattice points -L + k h, k = 1..n, with zero
// values on the walls. With a sector the operator is restricted to the
// functions of that symmetry. Eigenvectors are Euclidean-orthonormal in sector
// coordinates; since the lattice weights are the constant h^2, the weighted
// orthonormal eigenfunctions are these divided by h.
class DiscreteHamiltonian {
 public:
  DiscreteHamiltonian(const PotentialSpec& potential, const BoxSettings& box);

  const Grid& lattice() const { return *lattice_; }
  GridPtr lattice_ptr() const { return lattice_; }
  const BoxSettings& box() const { return box_; }
  const Eigen::SparseMatrix<double>& full_matrix() const { return full_; }
  const Eigen::SparseMatrix<double>& basis() const { return basis_; }
  const Eigen::MatrixXd& matrix() const { return reduced_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  double validity_horizon() const { return box_.half_width - box_.data_radius; }
  int negative_count() const;
  // Largest ||H q - mu q|| over eigenpairs.
  double eigen_residual() const;

  Eigen::VectorXd to_sector(const Eigen::VectorXd& f) const;
  Eigen::VectorXd from_sector(const Eigen::VectorXd& c) const;

 private:
  BoxSettings box_;
  GridPtr lattice_;
  Eigen::SparseMatrix<double> full_;
  Eigen::SparseMatrix<double> basis_;
  Eigen::MatrixXd reduced_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
};

inline constexpr double kPointSpectrumThreshold = 1e-6;

struct PropagatorOptions {
  double alpha = 0.0;         // (1 + mu)^-alpha
  double Lambda_max = 0.0;    // chi_L(sqrt(mu)) when positive
  bool apply_pac = true;      // drop modes with mu < delta_pp
  double delta_pp = kPointSpectrumThreshold;
};

struct PropagatorResult {
  Eigen::VectorXd u;   // on the lattice
  int excluded = 0;    // modes dropped by P_ac, including |mu| < delta_pp
  int near_zero = 0;   // modes with |mu| < delta_pp
};

PropagatorResult discrete_propagator(OperatorKind kind, double t, const DiscreteHamiltonian& H,
                                     const Eigen::VectorXd& f, const PropagatorOptions& options = {});

// ||d/dt u||^2 + <H u, u> for u = cos(t sqrt(H)) f, from the spectral form of
// u and d/dt u and the sparse matrix.
double discrete_energy(double t, const DiscreteHamiltonian& H, const Eigen::VectorXd& f);

// 1 - sum of q q^T over modes with mu < delta_pp, in sector coordinates.
struct AcProjection {
  Eigen::MatrixXd matrix;
  int removed = 0;
};
AcProjection projection_ac(const DiscreteHamiltonian& H, double delta_pp = kPointSpectrumThreshold);

// (1/2 pi) (t^2 - |x - y|^2)^(-1/2) inside the light cone, 0 outside.
double free_propagator_closed_form(double t, const Point& x, const Point& y);

// int free_propagator_closed_form(t, x, y) f(y) dy for data f supported in |y| <= radius.
double smeared_free_sine(double t, const Point& x, const std::function<double(const Point&)>& f, double radius);

// ||(H_h - lambda^2 -+ i eta) R W f - f|| / ||f|| over Gaussian probes f of
// width 1.5, on rows at least two points from the boundary; eta = 1e-3 lambda^2.
// H_h is the 5-point Laplacian plus V on the kernel's grid.
double resolvent_residual(const KernelOperator& R, double lambda, Sign sign, const FactoredPotential& fp,
                          double eta_scale = 1e-3);

// Depth A at which -Delta_h - A profile on the box first has a nonpositive
// eigenvalue in the sector, by bisection on Cholesky definiteness.
double fd_threshold_depth(const PotentialSpec& profile, const BoxSettings& box, double lo, double hi,
                          double tolerance = 1e-6);

}  // namespace wavedisp
