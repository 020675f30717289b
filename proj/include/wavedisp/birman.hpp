#pragma once

// Birman-Schwinger operators M(lambda) = U + v R0(lambda^2) v on the support of V.
//
// Matrices act on the support indices in symmetric coordinates: an operator
// with kernel a(x, y) is stored as W^(1/2) a W^(1/2), a multiplication operator
// by its diagonal, and a function f as W^(1/2) f. Matrix products and
// transposes then coincide with operator composition and L^2 adjoints, and the
// Frobenius norm is the Hilbert-Schmidt norm.

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "wavedisp/freeres.hpp"

namespace wavedisp {

struct BirmanSpace {
  PotentialPtr potential;
  std::vector<int> indices;   // grid indices the matrices act on
  Eigen::VectorXd sqrt_w;     // sqrt of quadrature weights on indices
  Eigen::VectorXd U;
  Eigen::VectorXd v_tilde;    // sqrt(w) v; |v_tilde|^2 = ||V||_1

  explicit BirmanSpace(PotentialPtr fp);
  int size() const { return static_cast<int>(indices.size()); }
  bool free_case() const { return potential->is_zero(); }
  double l1_norm() const { return potential->l1_norm; }
  const Grid& grid() const { return *potential->grid; }
};

Eigen::MatrixXd assemble_T(const BirmanSpace& space);
Eigen::MatrixXcd assemble_M(double lambda, Sign sign, const BirmanSpace& space);
// diag(v) G diag(v) for the model kernels G1 and G2.
Eigen::MatrixXd assemble_vG1v(const BirmanSpace& space);
Eigen::MatrixXd assemble_vG2v(const BirmanSpace& space);
// g(lambda) P.
Eigen::MatrixXcd scaled_P(double lambda, Sign sign, const BirmanSpace& space);

enum class Resonance { regular, first_kind, second_kind, third_kind };
const char* resonance_name(Resonance r);

struct ProjectionChain {
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
  // Orthonormal bases of the successive numerical null spaces; S_k = B_k B_k^T.
  Eigen::MatrixXd basis1;
  Eigen::MatrixXd basis2;
  Eigen::MatrixXd basis3;
  Eigen::MatrixXd S1;
  Eigen::MatrixXd S2;
  Eigen::MatrixXd S3;
  int rank1 = 0;
  int rank2 = 0;
  int rank3 = 0;
  // Smallest |eigenvalue| at each stage, on Q L^2, S1 L^2 and S2 L^2 (NaN if the stage is empty).
  double sigma_min[3] = {0.0, 0.0, 0.0};
  // Reference scale of each stage; the cut is threshold * scale.
  double scale[3] = {0.0, 0.0, 0.0};
  double threshold = 1e-6;
  bool low_confidence = false;
  // Orthonormal basis of Q L^2.
  Eigen::MatrixXd q_basis;
};

inline constexpr double kDefaultNullThreshold = 1e-6;

ProjectionChain build_projection_chain(const Eigen::MatrixXd& T, const BirmanSpace& space,
                                       double threshold = kDefaultNullThreshold);

struct ResonanceFunction {
  Eigen::VectorXd phi;   // symmetric coordinates on the support
  Eigen::VectorXd psi;   // sampled on every grid point
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  // max over grid points with |x| >= L/2 of |psi - c0 - (c1 x1 + c2 x2)/<x>^2|
  double remainder = 0.0;
};

struct ResonanceReport {
  Resonance classification = Resonance::regular;
  int ranks[3] = {0, 0, 0};
  double sigma_min[3] = {0.0, 0.0, 0.0};
  double scale[3] = {0.0, 0.0, 0.0};
  double threshold = kDefaultNullThreshold;
  bool low_confidence = false;
  bool free_case = false;
  std::vector<ResonanceFunction> resonance_functions;
};

ResonanceReport classify_resonance(const ProjectionChain& chain, const Eigen::MatrixXd& T,
                                   const BirmanSpace& space);
// Builds T and the chain, then classifies; V = 0 short-circuits to FirstKind with psi = 1.
ResonanceReport classify(const BirmanSpace& space, double threshold = kDefaultNullThreshold);

struct MInverse {
  Eigen::MatrixXcd matrix;
  double residual = 0.0;  // max-abs entry of M M^-1 - I
  double condition = 0.0; // reciprocal of the LU condition estimate
};

inline constexpr double kMaxCondition = 1e12;
inline constexpr double kInverseResidual = 1e-8;

MInverse invert_M(double lambda, Sign sign, const BirmanSpace& space);
MInverse invert_matrix(const Eigen::MatrixXcd& M);

// L^2 norm of the operator whose kernel is the entrywise absolute value.
double absolute_norm(const Eigen::MatrixXd& A);

struct SweepPoint {
  double lambda = 0.0;
  double residual_plus = 0.0;   // Hilbert-Schmidt norm of the expansion remainder
  double residual_minus = 0.0;
  double inverse_norm = 0.0;    // Hilbert-Schmidt norm of M^-1
};

struct SweepFit {
  double slope = 0.0;     // of log(remainder) against log(lambda)
  double constant = 0.0;  // max remainder / lambda^(1/2)
};

SweepFit fit_sweep(const std::vector<SweepPoint>& sweep);

std::vector<double> log_spaced(double lo, double hi, int count);

struct MInverseExpansion {
  Eigen::MatrixXd D0;        // Q D0 Q
  Eigen::MatrixXd S_op;
  double c_fit = 0.0;
  double c_analytic = 0.0;
  double S_op_imag_max = 0.0;
  double D0_absolute_norm = 0.0;
  std::vector<SweepPoint> sweep;
  SweepFit fit;
};

// The blocks D0 = (QTQ + S1)^-1 on Q L^2 (returned as Q D0 Q) and the rank-one S.
Eigen::MatrixXd build_D0(const Eigen::MatrixXd& T, const ProjectionChain& chain);
Eigen::MatrixXd build_S_op(const Eigen::MatrixXd& T, const Eigen::MatrixXd& D0, const BirmanSpace& space);
double analytic_c(const Eigen::MatrixXd& T, const Eigen::MatrixXd& D0, const BirmanSpace& space);

MInverseExpansion validate_Minverse_expansion(const BirmanSpace& space, const ProjectionChain& chain,
                                              const Eigen::MatrixXd& T, const std::vector<double>& lambdas);

struct SwaveExpansion {
  Eigen::MatrixXd D0;
  Eigen::MatrixXd D1;
  Eigen::MatrixXd S_op;
  double c = 0.0;
  double S1v_max = 0.0;
  double D1_asymmetry = 0.0;
  double D1_absolute_norm = 0.0;
  std::vector<SweepPoint> sweep;
  SweepFit fit;

  // Sum of the six expansion terms at lambda.
  Eigen::MatrixXcd terms(double lambda, Sign sign, const BirmanSpace& space) const;
};

SwaveExpansion swave_expansion_terms(const ProjectionChain& chain, const Eigen::MatrixXd& T,
                                     const BirmanSpace& space, const std::vector<double>& lambdas);

struct G1Fit {
  double alpha = 0.0;
  std::complex<double> beta_plus;
  std::complex<double> beta_minus;
  double alpha_analytic = 0.0;
  std::complex<double> beta_plus_analytic;

  std::complex<double> operator()(double lambda, Sign sign) const {
    return lambda * lambda * (alpha * std::log(lambda) + (sign == Sign::plus ? beta_plus : beta_minus));
  }
};

// Fits g1(lambda) = lambda^2 (alpha log lambda + beta) from M - gP - T - lambda^2 vG2v.
G1Fit fit_g1(const BirmanSpace& space, const Eigen::MatrixXd& T, const std::vector<double>& lambdas);

struct LeadingTerms {
  Resonance kind = Resonance::second_kind;
  Eigen::MatrixXd D2;     // S2 D2 S2
  Eigen::MatrixXd D3;     // S3 D3 S3 (empty for the second kind)
  Eigen::MatrixXd D_cal;  // the combined operator multiplying 1/g1 (third kind)
  G1Fit g1;
  double D2_absolute_norm = 0.0;
  double D3_absolute_norm = 0.0;
  double D3_norm = 0.0;   // Hilbert-Schmidt norm of S3 D3 S3

  struct Point {
    double lambda = 0.0;
    double scaled_inverse = 0.0;  // ||M^-1|| lambda^2 (third kind) or ||M^-1|| lambda^2 |log lambda|
    double relative_remainder = 0.0;  // ||M^-1 - leading|| / ||M^-1||
  };
  std::vector<Point> sweep;

  Eigen::MatrixXcd leading(double lambda, Sign sign) const;
};

// (S3 vG2v S3)^-1 on S3 L^2; needs rank(S3) > 0.
Eigen::MatrixXd build_D3(const ProjectionChain& chain, const BirmanSpace& space);

LeadingTerms singular_leading_terms(const ProjectionChain& chain, const Eigen::MatrixXd& T,
                                    const BirmanSpace& space, const std::vector<double>& lambdas);

}  // namespace wavedisp
