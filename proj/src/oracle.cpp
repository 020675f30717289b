#include "wavedisp/oracle.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <numbers>

#include "wavedisp/kernels.hpp"
#include "wavedisp/specfun.hpp"

namespace wavedisp {
namespace {

constexpr double kSupportFraction = 1e-3;

GridPtr box_lattice(const BoxSettings& box) {
  if (!(box.half_width > 0.0) || !(box.spacing > 0.0)) fail(ErrorCode::configuration, "box needs positive size");
  const double cells = 2.0 * box.half_width / box.spacing;
  const int n = static_cast<int>(std::lround(cells)) - 1;
  if (std::abs(cells - std::round(cells)) > 1e-9 || n < 3) {
    fail(ErrorCode::configuration, "box width must be a multiple of the spacing");
  }
  return build_grid(n, box.half_width - box.spacing);
}

// -Delta_h with Dirichlet walls, plus diag(V).
Eigen::SparseMatrix<double> lattice_operator(const Grid& g, const Eigen::VectorXd& V) {
  const int n = g.n_per_axis();
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(g.size()) * 5);
  for (int k = 0; k < g.size(); ++k) {
    const int c = g.column(k);
    const int r = g.row(k);
    t.emplace_back(k, k, 4.0 * inv_h2 + V[k]);
    if (c > 0) t.emplace_back(k, g.index(c - 1, r), -inv_h2);
    if (c + 1 < n) t.emplace_back(k, g.index(c + 1, r), -inv_h2);
    if (r > 0) t.emplace_back(k, g.index(c, r - 1), -inv_h2);
    if (r + 1 < n) t.emplace_back(k, g.index(c, r + 1), -inv_h2);
  }
  Eigen::SparseMatrix<double> H(g.size(), g.size());
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

Eigen::VectorXd sample(const PotentialSpec& spec, const Grid& g) {
  Eigen::VectorXd V(g.size());
  for (int k = 0; k < g.size(); ++k) V[k] = spec.value(g.point(k));
  return V;
}

Eigen::SparseMatrix<double> sector_basis(const Grid& g, const std::optional<Parity>& sector) {
  if (sector) return symmetry_basis(g, kernels::all_indices(g), *sector);
  Eigen::SparseMatrix<double> I(g.size(), g.size());
  I.setIdentity();
  return I;
}

}  // namespace

DiscreteHamiltonian::DiscreteHamiltonian(const PotentialSpec& potential, const BoxSettings& box)
    : box_(box), lattice_(box_lattice(box)) {
  full_ = lattice_operator(*lattice_, sample(potential, *lattice_));
  basis_ = sector_basis(*lattice_, box.sector);
  const Eigen::SparseMatrix<double> reduced = basis_.transpose() * full_ * basis_;
  reduced_ = Eigen::MatrixXd(reduced);
  reduced_ = 0.5 * (reduced_ + reduced_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced_);
  if (es.info() != Eigen::Success) fail(ErrorCode::internal, "lattice eigensolver failed");
  eigenvalues_ = es.eigenvalues();
  eigenvectors_ = es.eigenvectors();
}

int DiscreteHamiltonian::negative_count() const {
  int count = 0;
  for (double mu : eigenvalues_) count += mu < -kPointSpectrumThreshold ? 1 : 0;
  return count;
}

double DiscreteHamiltonian::eigen_residual() const {
  const Eigen::MatrixXd R = reduced_ * eigenvectors_ - eigenvectors_ * eigenvalues_.asDiagonal();
  return R.colwise().norm().maxCoeff();
}

Eigen::VectorXd DiscreteHamiltonian::to_sector(const Eigen::VectorXd& f) const { return basis_.transpose() * f; }
Eigen::VectorXd DiscreteHamiltonian::from_sector(const Eigen::VectorXd& c) const { return basis_ * c; }

PropagatorResult discrete_propagator(OperatorKind kind, double t, const DiscreteHamiltonian& H,
                                     const Eigen::VectorXd& f, const PropagatorOptions& options) {
  if (f.size() != H.lattice().size()) fail(ErrorCode::configuration, "data does not match the lattice");
  if (std::abs(t) > H.validity_horizon() + 1e-12) {
    fail(ErrorCode::horizon, "t = " + std::to_string(t) + " is beyond the validity horizon " +
                                 std::to_string(H.validity_horizon()));
  }
  const double fmax = f.cwiseAbs().maxCoeff();
  for (int k = 0; k < f.size(); ++k) {
    const Point& p = H.lattice().point(k);
    if (std::hypot(p.x, p.y) > H.box().data_radius && std::abs(f[k]) > kSupportFraction * fmax) {
      fail(ErrorCode::precondition, "data is not supported within the data radius");
    }
  }
  const Eigen::VectorXd c = H.eigenvectors().transpose() * H.to_sector(f);
  Eigen::VectorXd g(c.size());
  PropagatorResult out;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double mu = H.eigenvalues()[k];
    const bool tiny = std::abs(mu) < options.delta_pp;
    out.near_zero += tiny ? 1 : 0;
    if (options.apply_pac && mu < options.delta_pp) {
      ++out.excluded;
      g[k] = 0.0;
      continue;
    }
    double value;
    if (tiny) {
      value = kind == OperatorKind::cosine ? 1.0 : t;
    } else if (mu > 0.0) {
      const double s = std::sqrt(mu);
      value = kind == OperatorKind::cosine ? std::cos(t * s) : std::sin(t * s) / s;
    } else {
      const double s = std::sqrt(-mu);
      value = kind == OperatorKind::cosine ? std::cosh(t * s) : std::sinh(t * s) / s;
    }
    if (options.alpha != 0.0) {
      if (!(1.0 + mu > 0.0)) fail(ErrorCode::domain, "regularizer undefined for eigenvalue below -1");
      value *= std::pow(1.0 + mu, -options.alpha);
    }
    if (options.Lambda_max > 0.0 && mu > 0.0) value *= specfun::smooth_cutoff(std::sqrt(mu) / options.Lambda_max);
    g[k] = value * c[k];
  }
  out.u = H.from_sector(H.eigenvectors() * g);
  return out;
}

double discrete_energy(double t, const DiscreteHamiltonian& H, const Eigen::VectorXd& f) {
  const Eigen::VectorXd c = H.eigenvectors().transpose() * H.to_sector(f);
  Eigen::VectorXd a(c.size());
  Eigen::VectorXd b(c.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double mu = H.eigenvalues()[k];
    if (mu < 0.0) fail(ErrorCode::domain, "energy form needs a nonnegative operator");
    const double s = std::sqrt(mu);
    a[k] = std::cos(t * s) * c[k];
    b[k] = -s * std::sin(t * s) * c[k];
  }
  const Eigen::VectorXd u = H.from_sector(H.eigenvectors() * a);
  const Eigen::VectorXd ut = H.from_sector(H.eigenvectors() * b);
  const double h2 = H.lattice().spacing() * H.lattice().spacing();
  return h2 * (ut.squaredNorm() + u.dot(H.full_matrix() * u));
}

AcProjection projection_ac(const DiscreteHamiltonian& H, double delta_pp) {
  const Eigen::Index n = H.eigenvalues().size();
  AcProjection out;
  out.matrix = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (H.eigenvalues()[k] < delta_pp) {
      const Eigen::VectorXd q = H.eigenvectors().col(k);
      out.matrix -= q * q.transpose();
      ++out.removed;
    }
  }
  return out;
}

double free_propagator_closed_form(double t, const Point& x, const Point& y) {
  if (!(t > 0.0)) fail(ErrorCode::domain, "closed-form propagator needs t > 0");
  const double r = distance(x, y);
  if (r >= t) return 0.0;
  return 1.0 / (2.0 * std::numbers::pi * std::sqrt(t * t - r * r));
}

double smeared_free_sine(double t, const Point& x, const std::function<double(const Point&)>& f, double radius) {
  if (!(t > 0.0)) fail(ErrorCode::domain, "smeared propagator needs t > 0");
  // Rings |y - x| = rho with rho = t sin(theta) remove the edge singularity;
  // only the arcs meeting the disk |y| <= radius contribute.
  const double d = std::hypot(x.x, x.y);
  const double rho_lo = std::max(0.0, d - radius);
  const double rho_hi = std::min(t, d + radius);
  if (rho_lo >= rho_hi) return 0.0;
  const double th_lo = std::asin(std::min(1.0, rho_lo / t));
  const double th_hi = std::asin(std::min(1.0, rho_hi / t));
  const kernels::GaussRule& rule = kernels::gauss_legendre(96);
  const double toward = d > 0.0 ? std::atan2(-x.y, -x.x) : 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double th = 0.5 * (th_lo + th_hi) + 0.5 * (th_hi - th_lo) * rule.nodes[i];
    const double rho = t * std::sin(th);
    double half = std::numbers::pi;
    if (d > 0.0 && rho > 0.0) {
      const double c = (d * d + rho * rho - radius * radius) / (2.0 * d * rho);
      if (c >= 1.0) continue;
      if (c > -1.0) half = std::acos(c);
    }
    double ring = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double phi = toward + half * rule.nodes[j];
      ring += half * rule.weights[j] * f({x.x + rho * std::cos(phi), x.y + rho * std::sin(phi)});
    }
    total += 0.5 * (th_hi - th_lo) * rule.weights[i] * t * std::sin(th) * ring;
  }
  return total / (2.0 * std::numbers::pi);
}

double resolvent_residual(const KernelOperator& R, double lambda, Sign sign, const FactoredPotential& fp,
                          double eta_scale) {
  if (!(lambda > 0.0)) fail(ErrorCode::domain, "resolvent_residual needs lambda > 0");
  const Grid& g = R.grid();
  if (fp.grid->size() != g.size()) fail(ErrorCode::configuration, "potential and kernel grids differ");
  const int n = g.n_per_axis();
  const double eta = eta_scale * lambda * lambda;
  const std::complex<double> z(lambda * lambda, sign_value(sign) * eta);
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  const Point probes[] = {{0.0, 0.0}, {1.0, -0.5}, {-1.5, 1.0}};
  double worst = 0.0;
  for (const Point& c : probes) {
    Eigen::VectorXcd f(g.size());
    for (int k = 0; k < g.size(); ++k) {
      const Point& p = g.point(k);
      f[k] = std::exp(-((p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y)) / (2.0 * 1.5 * 1.5));
    }
    const Eigen::VectorXcd u = R.apply(f);
    double num = 0.0;
    double den = 0.0;
    for (int k = 0; k < g.size(); ++k) {
      const int col = g.column(k);
      const int row = g.row(k);
      if (col < 2 || row < 2 || col > n - 3 || row > n - 3) continue;
      const std::complex<double> lap =
          (4.0 * u[k] - u[g.index(col - 1, row)] - u[g.index(col + 1, row)] - u[g.index(col, row - 1)] -
           u[g.index(col, row + 1)]) * inv_h2;
      const std::complex<double> res = lap + (fp.V[k] - z) * u[k] - f[k];
      num += std::norm(res);
      den += std::norm(f[k]);
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  return worst;
}

double fd_threshold_depth(const PotentialSpec& profile, const BoxSettings& box, double lo, double hi,
                          double tolerance) {
  const GridPtr lattice = box_lattice(box);
  PotentialSpec unit = profile;
  unit.amplitude = 1.0;
  const Eigen::VectorXd shape = sample(unit, *lattice);
  const Eigen::SparseMatrix<double> B = sector_basis(*lattice, box.sector);
  const Eigen::SparseMatrix<double> L = B.transpose() * lattice_operator(*lattice, Eigen::VectorXd::Zero(lattice->size())) * B;
  Eigen::SparseMatrix<double> D(lattice->size(), lattice->size());
  std::vector<Eigen::Triplet<double>> diag;
  for (int k = 0; k < lattice->size(); ++k) diag.emplace_back(k, k, shape[k]);
  D.setFromTriplets(diag.begin(), diag.end());
  const Eigen::SparseMatrix<double> P = B.transpose() * D * B;
  auto definite = [&](double depth) {
    const Eigen::SparseMatrix<double> H = L - depth * P;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(H);
    return llt.info() == Eigen::Success;
  };
  if (!definite(lo) || definite(hi)) fail(ErrorCode::configuration, "threshold depth is not bracketed");
  while (hi - lo > tolerance * hi) {
    const double mid = 0.5 * (lo + hi);
    (definite(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace wavedisp
