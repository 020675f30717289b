#pragma once

// Perturbed resolvents and wave-kernel synthesis from the Stone formula
//   K(t; x, y) = (1/(pi i)) int trig(t lambda) rho(lambda) [R_V^+ - R_V^-](lambda^2)(x, y) d lambda
// with trig = cos, rho = lambda <lambda>^(-2 alpha) for the cosine operator and
// trig = sin, rho = <lambda>^(-2 alpha) for the sine operator.

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "wavedisp/birman.hpp"

namespace wavedisp {

inline constexpr double kDefaultLambda1 = 0.2;
inline constexpr double kDefaultEpsilon = 0.01;

KernelOperator perturbed_resolvent(double lambda, Sign sign, const BirmanSpace& space);
// R0 - R0 V R0 + R0 V R_V V R0; defined for lambda >= lambda_1.
KernelOperator born_series_resolvent(double lambda, Sign sign, const BirmanSpace& space,
                                     double lambda_1 = kDefaultLambda1);
// R_V^+ - R_V^-.
KernelOperator spectral_density(double lambda, const BirmanSpace& space);

enum class OperatorKind { cosine, sine };
const char* operator_kind_name(OperatorKind kind);
OperatorKind parse_operator_kind(const std::string& name);

// 3/4 + epsilon for the cosine operator, 1/4 + epsilon for the sine operator.
double default_regularizer(OperatorKind kind, double epsilon);
double spectral_weight(OperatorKind kind, double lambda, double alpha);

namespace quadrature {

// int_a^b l_j(lambda) exp(i omega lambda) d lambda for the Lagrange basis l_j
// on the Gauss-Legendre nodes of [a, b]; exact for any omega.
Eigen::VectorXcd filon_weights(double a, double b, int order, double omega);
// The part of filon_weights carried by the two highest Legendre modes; applied
// to samples it is the change from dropping those modes, an error estimate.
Eigen::VectorXcd filon_error_weights(double a, double b, int order, double omega);

}  // namespace quadrature

struct PlanSettings {
  double lambda_min = 1e-4;
  double lambda_1 = kDefaultLambda1;
  double Lambda_max = 6.0;
  double epsilon = kDefaultEpsilon;
  int order = 12;              // Gauss-Legendre nodes per panel
  double low_ratio = 2.0;      // geometric ratio of consecutive low panels
  double high_width = 0.0;     // high panel width; 0 picks the widest width that resolves the density
  int refinement = 1;          // every panel is split into this many equal pieces
  double nodes_per_period = 10.0;
  double tail_tolerance = 1e-4;
};

struct Panel {
  enum class Part { tail, low, high };
  Part part = Part::low;
  double a = 0.0;
  double b = 0.0;
};

// Node layout for the lambda integral. Low panels are geometric on
// [lambda_min, lambda_1] and carry chi_1; high panels are uniform on
// [lambda_1/2, Lambda_max] and carry (1 - chi_1) chi_L. The tail panel
// [0, lambda_min] uses one density value at lambda_min.
struct SpectralPlan {
  PlanSettings settings;
  double oscillation_length = 0.0;  // largest distance the density can oscillate over
  std::vector<Panel> panels;
  std::vector<double> lambda_low;
  std::vector<double> lambda_high;
  std::vector<double> cutoff_low;   // chi_1 on lambda_low
  std::vector<double> cutoff_high;  // 1 - chi_1 on lambda_high
  std::vector<double> cutoff_L;     // chi_L on lambda_high

  int node_count() const { return static_cast<int>(lambda_low.size() + lambda_high.size()) + 1; }
  // Largest mean node spacing over the high panels.
  double max_spacing() const;
  // Spacing the density needs: 2 pi / (nodes_per_period * oscillation_length).
  double required_spacing() const;
};

double cutoff_chi1(double lambda, double lambda_1);
double cutoff_chiL(double lambda, double Lambda_max);

SpectralPlan build_spectral_plan(const PlanSettings& settings, double oscillation_length);
// Throws a plan error when the panels under-resolve the density.
void check_plan(const SpectralPlan& plan);

// Where the kernel is sampled. Near points are grid indices; far samples sit
// on rays from a source point, y = x + (t + offset) direction, so that the
// light cone is tracked for every t.
struct ObservationSet {
  std::vector<int> near;
  std::vector<int> far_sources;
  std::vector<double> far_offsets;
  Point direction{1.0, 0.0};
  // Optional initial data on the grid; when set, K(t) f is also produced on the near points.
  Eigen::VectorXd data;

  std::vector<Point> far_points(const Grid& grid, int source, double t) const;
};

// Grid points with <x> <= L/2, and far rays from the origin and (-3, 0) when requested.
ObservationSet default_observation(const Grid& grid, bool far_field = true);

// Longest distance the phase-reduced density oscillates over for this observation set.
double oscillation_length(const BirmanSpace& space, const ObservationSet& obs);

struct FarSample {
  int source = 0;      // grid index
  double offset = 0.0;
  Point y;
  std::complex<double> value;
};

struct EvolutionKernel {
  OperatorKind kind = OperatorKind::sine;
  std::vector<double> times;
  double regularizer_alpha = 0.0;
  std::vector<int> near;
  std::vector<Point> points;
  std::vector<Eigen::MatrixXcd> kernels;            // near x near, per t
  std::vector<std::vector<FarSample>> far;           // per t
  std::vector<Eigen::VectorXcd> applied;             // K(t) f on near points, per t
  // Contribution of the leading singular terms of M^-1, when requested.
  std::vector<Eigen::MatrixXcd> leading_kernels;
  std::vector<std::vector<FarSample>> leading_far;

  int nodes = 0;
  double max_imag = 0.0;       // largest |Im K| relative to max |K|
  double max_asymmetry = 0.0;  // largest |K - K^T| relative to max |K|
  double tail_estimate = 0.0;  // embedded error estimate of the lambda quadrature, relative to max |K|
  double low_tail_bound = 0.0; // bound on the [0, lambda_min] contribution
  double envelope_at_cutoff = 0.0;  // rho(L) L^(-1/2)

  // sup |K| over near pairs and far samples.
  std::vector<double> sup_norms() const;
  // sup |K| <x>^-sigma <y>^-sigma over near pairs.
  std::vector<double> weighted_sup_norms(double sigma) const;
  // sup of the kernel minus its leading singular part, over near pairs and far samples.
  std::vector<double> remainder_sup_norms() const;
};

struct SynthesisOptions {
  std::optional<double> alpha;   // overrides the default regularizer exponent
  const LeadingTerms* leading = nullptr;
  int threads = 1;
};

std::vector<EvolutionKernel> synthesize_kernels(const std::vector<OperatorKind>& kinds,
                                                const std::vector<double>& times, const SpectralPlan& plan,
                                                const BirmanSpace& space, const ObservationSet& obs,
                                                const SynthesisOptions& options = {});

EvolutionKernel synthesize_kernel(OperatorKind kind, const std::vector<double>& times, const SpectralPlan& plan,
                                  const BirmanSpace& space, const ObservationSet& obs,
                                  const SynthesisOptions& options = {});

}  // namespace wavedisp
