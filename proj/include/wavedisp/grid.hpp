#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "wavedisp/common.hpp"

namespace wavedisp {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }
// Japanese bracket <p> = sqrt(1 + |p|^2).
inline double bracket(const Point& p) { return std::sqrt(1.0 + p.x * p.x + p.y * p.y); }

// Regular tensor grid on [-L, L]^2 with trapezoid weights. Point k sits at
// column k % n and row k / n.
class Grid {
 public:
  Grid(int n_per_axis, double half_width);

  int n_per_axis() const { return n_; }
  int size() const { return n_ * n_; }
  double half_width() const { return half_width_; }
  double spacing() const { return spacing_; }
  const std::vector<Point>& points() const { return points_; }
  const Point& point(int k) const { return points_[static_cast<std::size_t>(k)]; }
  const Eigen::VectorXd& weights() const { return weights_; }
  int column(int k) const { return k % n_; }
  int row(int k) const { return k / n_; }
  int index(int column, int row) const { return row * n_ + column; }

 private:
  int n_;
  double half_width_;
  double spacing_;
  std::vector<Point> points_;
  Eigen::VectorXd weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr build_grid(int n_per_axis, double half_width);

enum class PotentialFamily { zero, gaussian_well, polynomial_decay, compact_bump };

const char* family_name(PotentialFamily family);
PotentialFamily parse_family(const std::string& name);

// V(x) = amplitude * profile((x - center) / width). The amplitude is signed,
// so a negative value gives an attractive well.
struct PotentialSpec {
  std::string name;
  PotentialFamily family = PotentialFamily::zero;
  double amplitude = 0.0;
  double width = 1.0;
  Point center;
  // Claimed decay exponent: |V(x)| <~ <x>^-beta.
  double beta = 8.0;

  double value(const Point& p) const;
  double profile(const Point& p) const;
};

// Shipped example potentials.
std::vector<PotentialSpec> potential_presets();
PotentialSpec find_preset(const std::string& name);

struct DecayCertificate {
  double beta = 0.0;
  double constant = 0.0;  // max over grid of |V| <x>^beta
  bool main_hypothesis = false;       // beta > 3
  bool swave_hypothesis = false;      // beta > 4
  bool singular_hypothesis = false;   // beta > 6
};

// Sampled potential split as V = U v^2 with v = |V|^(1/2) and U = sign(V) (U = 1 where V >= 0).
// Values with |V| <= support_tolerance * max|V| are treated as zero; the
// remaining indices form the support on which Birman-Schwinger operators act.
struct FactoredPotential {
  GridPtr grid;
  PotentialSpec spec;
  Eigen::VectorXd V;
  Eigen::VectorXd v;
  Eigen::VectorXd U;
  double l1_norm = 0.0;
  std::vector<int> support;
  DecayCertificate certificate;

  bool is_zero() const { return support.empty(); }
};

using PotentialPtr = std::shared_ptr<const FactoredPotential>;

inline constexpr double kSupportTolerance = 1e-14;

PotentialPtr sample_potential(const PotentialSpec& spec, GridPtr grid,
                              double support_tolerance = kSupportTolerance);

// Dense kernel sampled on pairs (x_i, y_j) of two point sets.
double weighted_sup_norm(const Eigen::MatrixXcd& values, const std::vector<Point>& rows,
                         const std::vector<Point>& cols, double sigma_x, double sigma_y);

}  // namespace wavedisp
