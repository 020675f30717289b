#pragma once

// Symmetry sectors of the square: functions with prescribed parity under
// x -> -x, y -> -y and (when swap != 0) x <-> y.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <span>
#include <string>

#include "wavedisp/grid.hpp"

namespace wavedisp {

struct Parity {
  int x = 1;
  int y = 1;
  int swap = 0;  // 0 leaves the diagonal reflection unconstrained

  std::string name() const;
};

Parity parse_parity(const std::string& name);

// Orthonormal basis (columns) of the sector restricted to an index set that is
// invariant under the symmetries of the centred grid.
Eigen::SparseMatrix<double> symmetry_basis(const Grid& grid, std::span<const int> indices, Parity parity);

// Amplitude A at which V = -A * profile first makes Q T Q singular on the
// given sector of Q L^2 (T = -1 + A vG0v is affine in A). Only the profile of
// spec is used; throws if no crossing exists.
struct ThresholdCrossing {
  double amplitude = 0.0;
  double next_amplitude = 0.0;  // next crossing in the same sector, or infinity
};

ThresholdCrossing classifier_threshold(const PotentialSpec& spec, GridPtr grid, Parity parity);

// Copy of spec with its amplitude set to -classifier_threshold(...).amplitude.
PotentialSpec tune_to_threshold(const PotentialSpec& spec, GridPtr grid, Parity parity);

}  // namespace wavedisp
