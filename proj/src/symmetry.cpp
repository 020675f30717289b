#include "wavedisp/symmetry.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "wavedisp/birman.hpp"

namespace wavedisp {

std::string Parity::name() const {
  auto sign = [](int s) { return s > 0 ? '+' : '-'; };
  std::string out{sign(x), sign(y)};
  if (swap != 0) out.push_back(sign(swap));
  return out;
}

Parity parse_parity(const std::string& name) {
  if (name == "A1") return {1, 1, 1};
  if (name == "A2") return {-1, -1, -1};
  if (name == "B1") return {1, 1, -1};
  if (name == "B2") return {-1, -1, 1};
  if (name == "E") return {-1, 1, 0};
  if (name.size() == 2 || name.size() == 3) {
    auto sign = [&](char c) {
      if (c == '+') return 1;
      if (c == '-') return -1;
      fail(ErrorCode::configuration, "bad parity '" + name + "'");
    };
    Parity p{sign(name[0]), sign(name[1]), name.size() == 3 ? sign(name[2]) : 0};
    if (p.swap != 0 && p.x != p.y) fail(ErrorCode::configuration, "diagonal parity needs equal axis parities");
    return p;
  }
  fail(ErrorCode::configuration, "bad parity '" + name + "'");
}

Eigen::SparseMatrix<double> symmetry_basis(const Grid& grid, std::span<const int> indices, Parity parity) {
  if (parity.swap != 0 && parity.x != parity.y) {
    fail(ErrorCode::configuration, "diagonal parity needs equal axis parities");
  }
  const int n = grid.n_per_axis();
  std::map<int, int> position;
  for (std::size_t k = 0; k < indices.size(); ++k) position[indices[k]] = static_cast<int>(k);

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<char> seen(indices.size(), 0);
  int column = 0;
  const int swaps = parity.swap == 0 ? 1 : 2;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (seen[k]) continue;
    const int c0 = grid.column(indices[k]);
    const int r0 = grid.row(indices[k]);
    std::map<int, double> coeffs;
    for (int t = 0; t < swaps; ++t) {
      for (int fx = 0; fx < 2; ++fx) {
        for (int fy = 0; fy < 2; ++fy) {
          int c = fx ? n - 1 - c0 : c0;
          int r = fy ? n - 1 - r0 : r0;
          if (t) std::swap(c, r);
          const int idx = grid.index(c, r);
          const auto it = position.find(idx);
          if (it == position.end()) fail(ErrorCode::configuration, "index set is not symmetric");
          double chi = (fx ? parity.x : 1) * (fy ? parity.y : 1);
          if (t) chi *= parity.swap;
          coeffs[it->second] += chi;
          seen[static_cast<std::size_t>(it->second)] = 1;
        }
      }
    }
    double norm2 = 0.0;
    for (const auto& [pos, c] : coeffs) norm2 += c * c;
    if (norm2 < 0.5) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (const auto& [pos, c] : coeffs) {
      if (c != 0.0) triplets.emplace_back(pos, column, c * inv);
    }
    ++column;
  }
  Eigen::SparseMatrix<double> basis(static_cast<Eigen::Index>(indices.size()), column);
  basis.setFromTriplets(triplets.begin(), triplets.end());
  return basis;
}

ThresholdCrossing classifier_threshold(const PotentialSpec& spec, GridPtr grid, Parity parity) {
  PotentialSpec unit = spec;
  unit.amplitude = -1.0;
  const BirmanSpace space(sample_potential(unit, grid));
  if (space.free_case()) fail(ErrorCode::configuration, "threshold search needs a nonzero profile");
  Eigen::MatrixXd K = assemble_T(space);
  K.diagonal() += Eigen::VectorXd::Ones(space.size());  // T + 1 = vG0v at unit amplitude
  Eigen::MatrixXd B = Eigen::MatrixXd(symmetry_basis(space.grid(), space.indices, parity));
  // Remove the direction of v (it lies in the fully symmetric sector).
  const Eigen::VectorXd vt = space.v_tilde.normalized();
  const Eigen::VectorXd overlap = B.transpose() * vt;
  if (overlap.norm() > 1e-10) {
    Eigen::MatrixXd projected = B - vt * overlap.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(projected, Eigen::ComputeThinU);
    const Eigen::Index keep = B.cols() - 1;
    B = svd.matrixU().leftCols(keep);
  }
  const Eigen::MatrixXd reduced = B.transpose() * K * B;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (reduced + reduced.transpose()), Eigen::EigenvaluesOnly);
  std::vector<double> kappa;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    if (es.eigenvalues()[k] > 0.0) kappa.push_back(es.eigenvalues()[k]);
  }
  if (kappa.empty()) fail(ErrorCode::configuration, "no threshold crossing in sector " + parity.name());
  std::sort(kappa.rbegin(), kappa.rend());
  ThresholdCrossing out;
  out.amplitude = 1.0 / kappa[0];
  out.next_amplitude = kappa.size() > 1 ? 1.0 / kappa[1] : std::numeric_limits<double>::infinity();
  return out;
}

PotentialSpec tune_to_threshold(const PotentialSpec& spec, GridPtr grid, Parity parity) {
  PotentialSpec out = spec;
  out.amplitude = -classifier_threshold(spec, std::move(grid), parity).amplitude;
  return out;
}

}  // namespace wavedisp
