#include "wavedisp/birman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wavedisp/kernels.hpp"

namespace wavedisp {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& K, const Eigen::VectorXd& d) {
  return d.asDiagonal() * K * d.asDiagonal();
}

// Largest |eigenvalue| of a symmetric matrix, by power iteration on A^2.
double spectral_norm_symmetric(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(A.rows(), 1.0, 2.0).normalized();
  double estimate = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    const Eigen::VectorXd y = A * (A * x);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    const double next = std::sqrt(norm);
    if (std::abs(next - estimate) <= 1e-10 * next) return next;
    estimate = next;
  }
  return estimate;
}

// Null space of a symmetric matrix given in an orthonormal basis B as reduced = B^T A B.
struct NullSpace {
  Eigen::MatrixXd coords;  // columns in the coordinates of B
  double sigma_min = kNaN;
  bool borderline = false;
};

NullSpace reduced_null_space(const Eigen::MatrixXd& reduced, double cut) {
  NullSpace out;
  out.coords.resize(reduced.rows(), 0);
  if (reduced.rows() == 0) return out;
  const Eigen::MatrixXd sym = 0.5 * (reduced + reduced.transpose());
  // Eigenvectors only when a kernel is present; the eigenvalue pass dominates otherwise.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  Eigen::VectorXd mags = es.eigenvalues().cwiseAbs();
  out.sigma_min = mags.minCoeff();
  if (out.sigma_min >= cut) {
    for (double m : mags) out.borderline |= m > 0.1 * cut && m < 10.0 * cut;
    return out;
  }
  es.compute(sym, Eigen::ComputeEigenvectors);
  mags = es.eigenvalues().cwiseAbs();
  std::vector<int> keep;
  for (int k = 0; k < mags.size(); ++k) {
    if (mags[k] < cut) keep.push_back(k);
    out.borderline |= mags[k] > 0.1 * cut && mags[k] < 10.0 * cut;
  }
  out.coords.resize(reduced.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out.coords.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]);
  return out;
}

NullSpace null_space(const Eigen::MatrixXd& B, const Eigen::MatrixXd& A, double cut) {
  if (B.cols() == 0) return reduced_null_space(Eigen::MatrixXd(0, 0), cut);
  NullSpace ns = reduced_null_space(B.transpose() * A * B, cut);
  ns.coords = B * ns.coords;
  return ns;
}

// (B^T A B + B^T E B)^-1 carried back to the full space.
Eigen::MatrixXd restricted_inverse(const Eigen::MatrixXd& B, const Eigen::MatrixXd& A, const Eigen::MatrixXd& extra) {
  if (B.cols() == 0) return Eigen::MatrixXd::Zero(B.rows(), B.rows());
  Eigen::MatrixXd reduced = B.transpose() * A * B;
  if (extra.size() != 0) reduced += B.transpose() * extra * B;
  reduced = 0.5 * (reduced + reduced.transpose());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(reduced);
  if (!lu.isInvertible()) fail(ErrorCode::near_singular, "restricted block is not invertible");
  return B * lu.inverse() * B.transpose();
}

double slope_of(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0;
  double my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    num += dx * (std::log(y[i]) - my);
    den += dx * dx;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

BirmanSpace::BirmanSpace(PotentialPtr fp) : potential(std::move(fp)) {
  if (!potential) fail(ErrorCode::configuration, "BirmanSpace: missing potential");
  const Grid& g = *potential->grid;
  indices = potential->is_zero() ? kernels::all_indices(g) : potential->support;
  const int m = size();
  sqrt_w.resize(m);
  U.resize(m);
  v_tilde.resize(m);
  for (int k = 0; k < m; ++k) {
    const int i = indices[static_cast<std::size_t>(k)];
    sqrt_w[k] = std::sqrt(g.weights()[i]);
    U[k] = potential->U[i];
    v_tilde[k] = sqrt_w[k] * potential->v[i];
  }
}

Eigen::MatrixXd assemble_T(const BirmanSpace& space) {
  const Eigen::MatrixXd G0 = kernels::g0_table(space.grid()).block(space.grid(), space.indices, space.indices);
  Eigen::MatrixXd T = sandwich(G0, space.v_tilde);
  T.diagonal() += space.U;
  return T;
}

Eigen::MatrixXcd assemble_M(double lambda, Sign sign, const BirmanSpace& space) {
  if (!(lambda > 0.0)) fail(ErrorCode::domain, "assemble_M needs lambda > 0");
  const Eigen::MatrixXcd R0 =
      kernels::resolvent_table(space.grid(), lambda, sign).block(space.grid(), space.indices, space.indices);
  const Eigen::VectorXcd vt = space.v_tilde.cast<std::complex<double>>();
  Eigen::MatrixXcd M = vt.asDiagonal() * R0 * vt.asDiagonal();
  M.diagonal() += space.U.cast<std::complex<double>>();
  return M;
}

Eigen::MatrixXd assemble_vG1v(const BirmanSpace& space) {
  return sandwich(kernels::g1_table(space.grid()).block(space.grid(), space.indices, space.indices), space.v_tilde);
}

Eigen::MatrixXd assemble_vG2v(const BirmanSpace& space) {
  return sandwich(kernels::g2_table(space.grid()).block(space.grid(), space.indices, space.indices), space.v_tilde);
}

Eigen::MatrixXcd scaled_P(double lambda, Sign sign, const BirmanSpace& space) {
  const std::complex<double> g = GFunctions(space.l1_norm())(lambda, sign);
  return (g / space.l1_norm()) * (space.v_tilde * space.v_tilde.transpose()).cast<std::complex<double>>();
}

const char* resonance_name(Resonance r) {
  switch (r) {
    case Resonance::regular:
      return "Regular";
    case Resonance::first_kind:
      return "FirstKind";
    case Resonance::second_kind:
      return "SecondKind";
    case Resonance::third_kind:
      return "ThirdKind";
  }
  return "Unknown";
}

ProjectionChain build_projection_chain(const Eigen::MatrixXd& T, const BirmanSpace& space, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::configuration, "null-space threshold must lie in (0, 1)");
  if (space.free_case()) fail(ErrorCode::precondition, "projection chain needs a nonzero potential");
  const int m = space.size();
  ProjectionChain c;
  c.threshold = threshold;
  const Eigen::VectorXd& vt = space.v_tilde;
  c.P = vt * vt.transpose() / space.l1_norm();
  c.Q = Eigen::MatrixXd::Identity(m, m) - c.P;
  // A single Householder reflector H maps e_0 to a multiple of v; its other columns span Q L^2.
  Eigen::VectorXd essential;
  double tau = 0.0;
  double beta = 0.0;
  Eigen::VectorXd head = vt;
  head.makeHouseholder(essential, tau, beta);
  Eigen::VectorXd h(m);
  h[0] = 1.0;
  h.tail(m - 1) = essential;
  const auto reflect = [&](Eigen::MatrixXd A) {
    A -= (tau * h) * (h.transpose() * A);
    A -= (A * h) * (tau * h).transpose();
    return A;
  };
  {
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(m, m);
    H -= (tau * h) * h.transpose();
    c.q_basis = H.rightCols(m - 1);
  }

  // Stage 1: QTQ on Q L^2.
  {
    const Eigen::MatrixXd reduced = reflect(T).bottomRightCorner(m - 1, m - 1);
    c.scale[0] = spectral_norm_symmetric(reduced);
    const NullSpace ns = reduced_null_space(reduced, threshold * c.scale[0]);
    c.basis1 = c.q_basis * ns.coords;
    c.sigma_min[0] = ns.sigma_min;
    c.low_confidence |= ns.borderline;
  }
  // Stage 2: S1 T P T S1 on S1 L^2.
  const double t_norm = spectral_norm_symmetric(T);
  c.scale[1] = t_norm * t_norm;
  {
    const Eigen::VectorXd Tv = T * vt;
    const Eigen::MatrixXd TPT = Tv * Tv.transpose() / space.l1_norm();
    const NullSpace ns = null_space(c.basis1, TPT, threshold * c.scale[1]);
    c.basis2 = ns.coords;
    c.sigma_min[1] = ns.sigma_min;
    if (c.basis1.cols() > 0) c.low_confidence |= ns.borderline;
  }
  // Stage 3: S2 vG1v S2 on S2 L^2.
  {
    const Eigen::MatrixXd vG1v = assemble_vG1v(space);
    c.scale[2] = spectral_norm_symmetric(vG1v);
    const NullSpace ns = null_space(c.basis2, vG1v, threshold * c.scale[2]);
    c.basis3 = ns.coords;
    c.sigma_min[2] = ns.sigma_min;
    if (c.basis2.cols() > 0) c.low_confidence |= ns.borderline;
  }
  c.rank1 = static_cast<int>(c.basis1.cols());
  c.rank2 = static_cast<int>(c.basis2.cols());
  c.rank3 = static_cast<int>(c.basis3.cols());
  c.S1 = c.basis1 * c.basis1.transpose();
  c.S2 = c.basis2 * c.basis2.transpose();
  c.S3 = c.basis3 * c.basis3.transpose();
  return c;
}

namespace {

ResonanceFunction reconstruct(const Eigen::VectorXd& phi, const Eigen::MatrixXd& T, const BirmanSpace& space) {
  const Grid& g = space.grid();
  ResonanceFunction rf;
  rf.phi = phi;
  rf.c0 = (T * phi).dot(space.v_tilde) / space.l1_norm();
  const Eigen::VectorXd density = space.v_tilde.cwiseProduct(phi);
  for (int k = 0; k < space.size(); ++k) {
    const Point p = g.point(space.indices[static_cast<std::size_t>(k)]);
    rf.c1 -= p.x * density[k] / (2.0 * std::numbers::pi);
    rf.c2 -= p.y * density[k] / (2.0 * std::numbers::pi);
  }
  const auto all = kernels::all_indices(g);
  const Eigen::MatrixXd G0 = kernels::g0_table(g).block(g, all, space.indices);
  rf.psi = Eigen::VectorXd::Constant(g.size(), rf.c0) - G0 * density;
  for (int k = 0; k < g.size(); ++k) {
    const Point p = g.point(k);
    if (std::hypot(p.x, p.y) < 0.5 * g.half_width()) continue;
    const double b2 = 1.0 + p.x * p.x + p.y * p.y;
    rf.remainder = std::max(rf.remainder, std::abs(rf.psi[k] - rf.c0 - (rf.c1 * p.x + rf.c2 * p.y) / b2));
  }
  return rf;
}

}  // namespace

ResonanceReport classify_resonance(const ProjectionChain& chain, const Eigen::MatrixXd& T, const BirmanSpace& space) {
  ResonanceReport r;
  r.ranks[0] = chain.rank1;
  r.ranks[1] = chain.rank2;
  r.ranks[2] = chain.rank3;
  for (int k = 0; k < 3; ++k) {
    r.sigma_min[k] = chain.sigma_min[k];
    r.scale[k] = chain.scale[k];
  }
  r.threshold = chain.threshold;
  r.low_confidence = chain.low_confidence;
  if (chain.rank1 == 0) {
    r.classification = Resonance::regular;
  } else if (chain.rank2 == 0) {
    r.classification = Resonance::first_kind;
  } else if (chain.rank3 == 0) {
    r.classification = Resonance::second_kind;
  } else {
    r.classification = Resonance::third_kind;
  }
  for (Eigen::Index k = 0; k < chain.basis1.cols(); ++k) {
    r.resonance_functions.push_back(reconstruct(chain.basis1.col(k), T, space));
  }
  return r;
}

ResonanceReport classify(const BirmanSpace& space, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::configuration, "null-space threshold must lie in (0, 1)");
  if (space.free_case()) {
    ResonanceReport r;
    r.classification = Resonance::first_kind;
    r.free_case = true;
    r.threshold = threshold;
    r.ranks[0] = 1;
    for (double& s : r.sigma_min) s = kNaN;
    ResonanceFunction rf;
    rf.psi = Eigen::VectorXd::Ones(space.grid().size());
    rf.c0 = 1.0;
    r.resonance_functions.push_back(std::move(rf));
    return r;
  }
  const Eigen::MatrixXd T = assemble_T(space);
  const ProjectionChain chain = build_projection_chain(T, space, threshold);
  return classify_resonance(chain, T, space);
}

MInverse invert_matrix(const Eigen::MatrixXcd& M) {
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
  MInverse out;
  const double rc = lu.rcond();
  out.condition = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
  out.matrix = lu.inverse();
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(M.rows(), M.cols());
  out.residual = M.rows() == 0 ? 0.0 : (M * out.matrix - I).cwiseAbs().maxCoeff();
  return out;
}

MInverse invert_M(double lambda, Sign sign, const BirmanSpace& space) {
  MInverse out = invert_matrix(assemble_M(lambda, sign, space));
  if (!(out.condition <= kMaxCondition)) {
    fail(ErrorCode::near_singular, "M(lambda) is near-singular at lambda = " + to_scientific(lambda) +
                                       " (condition " + to_scientific(out.condition) + ")");
  }
  if (!(out.residual <= kInverseResidual)) {
    fail(ErrorCode::near_singular, "M(lambda) inverse residual " + to_scientific(out.residual) +
                                       " exceeds tolerance at lambda = " + to_scientific(lambda));
  }
  return out;
}

double absolute_norm(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  const Eigen::MatrixXd B = A.cwiseAbs();
  Eigen::VectorXd x = Eigen::VectorXd::Ones(B.cols()).normalized();
  double estimate = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    const Eigen::VectorXd y = B.transpose() * (B * x);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    const double next = std::sqrt(norm);
    x = y / norm;
    if (std::abs(next - estimate) <= 1e-12 * next) return next;
    estimate = next;
  }
  return estimate;
}

SweepFit fit_sweep(const std::vector<SweepPoint>& sweep) {
  std::vector<double> x;
  std::vector<double> y;
  SweepFit fit;
  for (const auto& p : sweep) {
    const double r = std::max(p.residual_plus, p.residual_minus);
    x.push_back(p.lambda);
    y.push_back(r);
    fit.constant = std::max(fit.constant, r / std::sqrt(p.lambda));
  }
  fit.slope = slope_of(x, y);
  return fit;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  std::vector<double> out;
  if (count == 1) return {hi};
  for (int k = 0; k < count; ++k) out.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1)));
  return out;
}

Eigen::MatrixXd build_D0(const Eigen::MatrixXd& T, const ProjectionChain& chain) {
  return restricted_inverse(chain.q_basis, T, chain.S1);
}

Eigen::MatrixXd build_S_op(const Eigen::MatrixXd& T, const Eigen::MatrixXd& D0, const BirmanSpace& space) {
  const Eigen::VectorXd& vt = space.v_tilde;
  const Eigen::VectorXd a = vt - D0 * (T * vt);
  return a * a.transpose() / space.l1_norm();
}

double analytic_c(const Eigen::MatrixXd& T, const Eigen::MatrixXd& D0, const BirmanSpace& space) {
  const Eigen::VectorXd Tv = T * space.v_tilde;
  return (space.v_tilde.dot(Tv) - Tv.dot(D0 * Tv)) / space.l1_norm();
}

MInverseExpansion validate_Minverse_expansion(const BirmanSpace& space, const ProjectionChain& chain,
                                              const Eigen::MatrixXd& T, const std::vector<double>& lambdas) {
  if (chain.rank1 != 0) fail(ErrorCode::precondition, "M^-1 expansion check needs a regular zero energy");
  if (lambdas.empty()) fail(ErrorCode::configuration, "empty lambda sweep");
  MInverseExpansion out;
  out.D0 = build_D0(T, chain);
  out.S_op = build_S_op(T, out.D0, space);
  out.c_analytic = analytic_c(T, out.D0, space);
  out.D0_absolute_norm = absolute_norm(out.D0);
  const GFunctions g(space.l1_norm());
  const Eigen::VectorXcd vt = space.v_tilde.cast<std::complex<double>>();

  std::vector<std::pair<MInverse, MInverse>> inverses;
  std::vector<double> sorted = lambdas;
  std::sort(sorted.begin(), sorted.end());
  // c from <v, M^-1 v> = ||V||_1 / (g + c) on the lowest third of the sweep.
  const std::size_t fit_count = std::max<std::size_t>(1, sorted.size() / 3);
  double c_sum = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    auto plus = invert_M(sorted[k], Sign::plus, space);
    auto minus = invert_M(sorted[k], Sign::minus, space);
    if (k < fit_count) {
      for (Sign s : {Sign::plus, Sign::minus}) {
        const MInverse& inv = s == Sign::plus ? plus : minus;
        const std::complex<double> q = vt.dot(inv.matrix * vt);
        c_sum += (space.l1_norm() / q - g(sorted[k], s)).real();
      }
    }
    inverses.emplace_back(std::move(plus), std::move(minus));
  }
  out.c_fit = c_sum / (2.0 * fit_count);
  const Eigen::MatrixXcd S = out.S_op.cast<std::complex<double>>();
  const Eigen::MatrixXcd D0 = out.D0.cast<std::complex<double>>();
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    SweepPoint p;
    p.lambda = sorted[k];
    for (Sign s : {Sign::plus, Sign::minus}) {
      const MInverse& inv = s == Sign::plus ? inverses[k].first : inverses[k].second;
      const std::complex<double> h = g(p.lambda, s) + out.c_fit;
      const double r = (inv.matrix - S / h - D0).norm();
      (s == Sign::plus ? p.residual_plus : p.residual_minus) = r;
      p.inverse_norm = std::max(p.inverse_norm, inv.matrix.norm());
    }
    out.sweep.push_back(p);
  }
  out.fit = fit_sweep(out.sweep);
  return out;
}

Eigen::MatrixXcd SwaveExpansion::terms(double lambda, Sign sign, const BirmanSpace& space) const {
  const std::complex<double> h = GFunctions(space.l1_norm())(lambda, sign) + c;
  const Eigen::MatrixXcd S = S_op.cast<std::complex<double>>();
  const Eigen::MatrixXcd D = D1.cast<std::complex<double>>();
  return -h * D - S * D - D * S - (S * D * S) / h + S / h + D0.cast<std::complex<double>>();
}

SwaveExpansion swave_expansion_terms(const ProjectionChain& chain, const Eigen::MatrixXd& T, const BirmanSpace& space,
                                     const std::vector<double>& lambdas) {
  if (chain.rank1 == 0 || chain.rank2 != 0) {
    fail(ErrorCode::precondition, "s-wave expansion needs a resonance of the first kind");
  }
  SwaveExpansion out;
  out.D0 = build_D0(T, chain);
  out.S_op = build_S_op(T, out.D0, space);
  out.c = analytic_c(T, out.D0, space);
  out.D1 = restricted_inverse(chain.basis1, T * chain.P * T, chain.S2);
  out.S1v_max = (chain.S1 * space.v_tilde).cwiseAbs().maxCoeff();
  out.D1_asymmetry = (out.D1 - out.D1.transpose()).cwiseAbs().maxCoeff();
  out.D1_absolute_norm = absolute_norm(out.D1);
  for (double lambda : lambdas) {
    SweepPoint p;
    p.lambda = lambda;
    for (Sign s : {Sign::plus, Sign::minus}) {
      const MInverse inv = invert_matrix(assemble_M(lambda, s, space));
      const double r = (inv.matrix - out.terms(lambda, s, space)).norm();
      (s == Sign::plus ? p.residual_plus : p.residual_minus) = r;
      p.inverse_norm = std::max(p.inverse_norm, inv.matrix.norm());
    }
    out.sweep.push_back(p);
  }
  out.fit = fit_sweep(out.sweep);
  return out;
}

G1Fit fit_g1(const BirmanSpace& space, const Eigen::MatrixXd& T, const std::vector<double>& lambdas) {
  if (lambdas.size() < 2) fail(ErrorCode::configuration, "g1 fit needs at least two lambda values");
  const Eigen::MatrixXd vG1v = assemble_vG1v(space);
  const Eigen::MatrixXd vG2v = assemble_vG2v(space);
  const double denom = vG1v.squaredNorm();
  G1Fit fit;
  for (Sign s : {Sign::plus, Sign::minus}) {
    std::vector<double> logs;
    std::vector<double> re;
    double im = 0.0;
    for (double lambda : lambdas) {
      Eigen::MatrixXcd X = assemble_M(lambda, s, space) - scaled_P(lambda, s, space);
      X -= T.cast<std::complex<double>>();
      X -= (lambda * lambda) * vG2v.cast<std::complex<double>>();
      const std::complex<double> g1 = (vG1v.cast<std::complex<double>>().cwiseProduct(X)).sum() / denom;
      const std::complex<double> q = g1 / (lambda * lambda);
      logs.push_back(std::log(lambda));
      re.push_back(q.real());
      im += q.imag() / static_cast<double>(lambdas.size());
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 0; k < logs.size(); ++k) {
      mx += logs[k] / logs.size();
      my += re[k] / re.size();
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < logs.size(); ++k) {
      num += (logs[k] - mx) * (re[k] - my);
      den += (logs[k] - mx) * (logs[k] - mx);
    }
    const double alpha = num / den;
    const std::complex<double> beta(my - alpha * mx, im);
    if (s == Sign::plus) {
      fit.beta_plus = beta;
      fit.alpha = alpha;
    } else {
      fit.beta_minus = beta;
      fit.alpha = 0.5 * (fit.alpha + alpha);
    }
  }
  constexpr double eight_pi = 8.0 * std::numbers::pi;
  fit.alpha_analytic = 1.0 / eight_pi;
  fit.beta_plus_analytic = {(0.57721566490153286061 - std::numbers::ln2 - 1.0) / eight_pi, -1.0 / 16.0};
  return fit;
}

Eigen::MatrixXcd LeadingTerms::leading(double lambda, Sign sign) const {
  const std::complex<double> g1v = g1(lambda, sign);
  if (kind == Resonance::second_kind) return D2.cast<std::complex<double>>() / g1v;
  return D3.cast<std::complex<double>>() / (lambda * lambda) + D_cal.cast<std::complex<double>>() / g1v;
}

Eigen::MatrixXd build_D3(const ProjectionChain& chain, const BirmanSpace& space) {
  if (chain.rank3 == 0) fail(ErrorCode::precondition, "D3 needs a nontrivial S3");
  const Eigen::MatrixXd vG2v = assemble_vG2v(space);
  const Eigen::MatrixXd reduced = chain.basis3.transpose() * vG2v * chain.basis3;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (reduced + reduced.transpose()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().cwiseAbs().minCoeff() < chain.threshold * spectral_norm_symmetric(vG2v)) {
    fail(ErrorCode::near_singular, "S3 vG2v S3 is numerically singular");
  }
  return restricted_inverse(chain.basis3, vG2v, Eigen::MatrixXd());
}

LeadingTerms singular_leading_terms(const ProjectionChain& chain, const Eigen::MatrixXd& T, const BirmanSpace& space,
                                    const std::vector<double>& lambdas) {
  if (chain.rank2 == 0) fail(ErrorCode::precondition, "leading singular terms need a resonance of the second or third kind");
  LeadingTerms out;
  out.kind = chain.rank3 > 0 ? Resonance::third_kind : Resonance::second_kind;
  const Eigen::MatrixXd vG1v = assemble_vG1v(space);
  const Eigen::MatrixXd vG2v = assemble_vG2v(space);
  out.D2 = restricted_inverse(chain.basis2, vG1v, chain.S3);
  out.D2_absolute_norm = absolute_norm(out.D2);
  if (out.kind == Resonance::third_kind) {
    out.D3 = build_D3(chain, space);
    out.D3_absolute_norm = absolute_norm(out.D3);
    out.D3_norm = out.D3.norm();
    const Eigen::MatrixXd& D2 = out.D2;
    const Eigen::MatrixXd& D3 = out.D3;
    out.D_cal = D2 + D3 * vG2v * D2 * vG2v * D3 - D3 * vG2v * D2 - D2 * vG2v * D3;
  }
  out.g1 = fit_g1(space, T, log_spaced(1e-3, 3e-2, 6));
  for (double lambda : lambdas) {
    LeadingTerms::Point p;
    p.lambda = lambda;
    for (Sign s : {Sign::plus, Sign::minus}) {
      const MInverse inv = invert_matrix(assemble_M(lambda, s, space));
      const double norm = inv.matrix.norm();
      const double scaled = out.kind == Resonance::third_kind ? norm * lambda * lambda
                                                              : norm * lambda * lambda * std::abs(std::log(lambda));
      p.scaled_inverse = std::max(p.scaled_inverse, scaled);
      const double rel = (inv.matrix - out.leading(lambda, s)).norm() / norm;
      p.relative_remainder = std::max(p.relative_remainder, rel);
    }
    out.sweep.push_back(p);
  }
  return out;
}

}  // namespace wavedisp
