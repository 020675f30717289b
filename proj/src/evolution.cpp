#include "wavedisp/evolution.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <span>
#include <numbers>
#include <thread>

#include "wavedisp/kernels.hpp"
#include "wavedisp/specfun.hpp"

namespace wavedisp {
namespace {

using cd = std::complex<double>;
constexpr cd kI(0.0, 1.0);
constexpr double kPi = std::numbers::pi;

// B(s, y) = v_tilde(s) R0(s, y) for s in the support and y in cols.
Eigen::MatrixXcd support_block(const kernels::OffsetTable<cd>& table, const BirmanSpace& space,
                               std::span<const int> cols) {
  Eigen::MatrixXcd B = table.block(space.grid(), space.indices, cols);
  return space.v_tilde.cast<cd>().asDiagonal() * B;
}

Eigen::PartialPivLU<Eigen::MatrixXcd> factor_M(const Eigen::MatrixXcd& M, double lambda) {
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
  const double rc = lu.rcond();
  if (!(rc * kMaxCondition >= 1.0)) {
    fail(ErrorCode::near_singular, "M(lambda) is near-singular at lambda = " + to_scientific(lambda));
  }
  return lu;
}

Eigen::MatrixXcd checked_solve(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu, const Eigen::MatrixXcd& M,
                               const Eigen::MatrixXcd& rhs, double lambda) {
  Eigen::MatrixXcd X = lu.solve(rhs);
  if (rhs.size() > 0) {
    const double scale = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
    const double res = (M * X - rhs).cwiseAbs().maxCoeff() / scale;
    if (!(res <= kInverseResidual)) {
      fail(ErrorCode::near_singular, "M(lambda) solve residual " + to_scientific(res) + " at lambda = " +
                                         to_scientific(lambda));
    }
  }
  return X;
}

// Applies the middle factor of the perturbation term B^T K B. The low-energy
// path uses K = M^-1; the Born path uses K = U - UAU + UA M^-1 AU with A = M - U.
Eigen::MatrixXcd apply_middle(bool born, const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu,
                              const Eigen::MatrixXcd& M, const Eigen::VectorXd& U, const Eigen::MatrixXcd& rhs,
                              double lambda) {
  if (!born) return checked_solve(lu, M, rhs, lambda);
  Eigen::MatrixXcd A = M;
  A.diagonal() -= U.cast<cd>();
  const Eigen::MatrixXcd UR = U.cast<cd>().asDiagonal() * rhs;
  const Eigen::MatrixXcd Y = A * UR;
  const Eigen::MatrixXcd Z = checked_solve(lu, M, Y, lambda);
  return U.cast<cd>().asDiagonal() * (rhs - Y + A * Z);
}

}  // namespace

KernelOperator perturbed_resolvent(double lambda, Sign sign, const BirmanSpace& space) {
  if (!(lambda > 0.0)) fail(ErrorCode::domain, "perturbed_resolvent needs lambda > 0");
  const GridPtr& grid = space.potential->grid;
  KernelOperator R0 = free_resolvent(lambda, sign, grid);
  if (space.free_case()) return R0;
  const auto table = kernels::resolvent_table(*grid, lambda, sign);
  const std::vector<int> all = kernels::all_indices(*grid);
  const Eigen::MatrixXcd B = support_block(table, space, all);
  const MInverse inv = invert_M(lambda, sign, space);
  Eigen::MatrixXcd R = R0.matrix() - B.transpose() * (inv.matrix * B);
  return KernelOperator(grid, std::move(R));
}

KernelOperator born_series_resolvent(double lambda, Sign sign, const BirmanSpace& space, double lambda_1) {
  if (!(lambda > 0.0)) fail(ErrorCode::domain, "born_series_resolvent needs lambda > 0");
  if (lambda < lambda_1) {
    fail(ErrorCode::precondition, "born_series_resolvent is the high-energy path (lambda >= lambda_1)");
  }
  const GridPtr& grid = space.potential->grid;
  KernelOperator R0 = free_resolvent(lambda, sign, grid);
  if (space.free_case()) return R0;
  const auto table = kernels::resolvent_table(*grid, lambda, sign);
  const std::vector<int> all = kernels::all_indices(*grid);
  const Eigen::MatrixXcd B = support_block(table, space, all);
  const Eigen::MatrixXcd M = assemble_M(lambda, sign, space);
  const auto lu = factor_M(M, lambda);
  const Eigen::MatrixXcd KB = apply_middle(true, lu, M, space.U, B, lambda);
  Eigen::MatrixXcd R = R0.matrix() - B.transpose() * KB;
  return KernelOperator(grid, std::move(R));
}

KernelOperator spectral_density(double lambda, const BirmanSpace& space) {
  KernelOperator plus = perturbed_resolvent(lambda, Sign::plus, space);
  const KernelOperator minus = perturbed_resolvent(lambda, Sign::minus, space);
  plus.matrix() -= minus.matrix();
  return plus;
}

const char* operator_kind_name(OperatorKind kind) { return kind == OperatorKind::cosine ? "cosine" : "sine"; }

OperatorKind parse_operator_kind(const std::string& name) {
  if (name == "cosine" || name == "cos") return OperatorKind::cosine;
  if (name == "sine" || name == "sin") return OperatorKind::sine;
  fail(ErrorCode::configuration, "unknown operator kind '" + name + "'");
}

double default_regularizer(OperatorKind kind, double epsilon) {
  return (kind == OperatorKind::cosine ? 0.75 : 0.25) + epsilon;
}

double spectral_weight(OperatorKind kind, double lambda, double alpha) {
  const double reg = std::pow(1.0 + lambda * lambda, -alpha);
  return kind == OperatorKind::cosine ? lambda * reg : reg;
}

namespace quadrature {

namespace {

// int_a^b exp(i omega lambda) times the Legendre modes of degree >= first_degree
// of the Lagrange basis on the Gauss-Legendre nodes of [a, b].
Eigen::VectorXcd legendre_filon(double a, double b, int order, double omega, int first_degree) {
  const kernels::GaussRule& rule = kernels::gauss_legendre(order);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const double k = omega * half;
  // int_{-1}^{1} P_n(u) exp(i k u) du = 2 i^n j_n(k).
  std::vector<cd> moments(static_cast<std::size_t>(order));
  cd in(1.0, 0.0);
  for (int n = 0; n < order; ++n) {
    const double jn = std::sph_bessel(static_cast<unsigned>(n), std::abs(k));
    // j_n is even for even n and odd for odd n.
    const double signed_jn = (n % 2 == 1 && k < 0.0) ? -jn : jn;
    moments[static_cast<std::size_t>(n)] = 2.0 * in * signed_jn;
    in *= kI;
  }
  Eigen::VectorXcd out(order);
  for (int j = 0; j < order; ++j) {
    const double u = rule.nodes[static_cast<std::size_t>(j)];
    double p_prev = 1.0;
    double p = u;
    cd sum = first_degree == 0 ? 0.5 * moments[0] : cd(0.0);
    for (int n = 1; n < order; ++n) {
      if (n > 1) {
        const double next = ((2.0 * n - 1.0) * u * p - (n - 1.0) * p_prev) / n;
        p_prev = p;
        p = next;
      }
      if (n >= first_degree) sum += 0.5 * (2.0 * n + 1.0) * p * moments[static_cast<std::size_t>(n)];
    }
    out[j] = half * std::exp(kI * (omega * mid)) * rule.weights[static_cast<std::size_t>(j)] * sum;
  }
  return out;
}

}  // namespace

Eigen::VectorXcd filon_weights(double a, double b, int order, double omega) {
  return legendre_filon(a, b, order, omega, 0);
}

Eigen::VectorXcd filon_error_weights(double a, double b, int order, double omega) {
  return legendre_filon(a, b, order, omega, std::max(0, order - 2));
}

}  // namespace quadrature

double cutoff_chi1(double lambda, double lambda_1) { return specfun::smooth_cutoff(lambda / lambda_1); }
double cutoff_chiL(double lambda, double Lambda_max) { return specfun::smooth_cutoff(lambda / Lambda_max); }

double SpectralPlan::max_spacing() const {
  double worst = 0.0;
  for (const Panel& p : panels) {
    if (p.part == Panel::Part::tail) continue;
    worst = std::max(worst, (p.b - p.a) / settings.order);
  }
  return worst;
}

double SpectralPlan::required_spacing() const {
  if (oscillation_length <= 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * kPi / (settings.nodes_per_period * oscillation_length);
}

SpectralPlan build_spectral_plan(const PlanSettings& s, double osc) {
  if (!(s.lambda_min > 0.0) || !(s.lambda_1 > 2.0 * s.lambda_min) || !(s.Lambda_max > s.lambda_1)) {
    fail(ErrorCode::configuration, "spectral plan needs 0 < 2 lambda_min < lambda_1 < Lambda_max");
  }
  if (s.order < 2 || s.refinement < 1 || !(s.low_ratio > 1.0) || !(s.nodes_per_period > 0.0)) {
    fail(ErrorCode::configuration, "spectral plan: invalid order, refinement, ratio or density");
  }
  SpectralPlan plan;
  plan.settings = s;
  plan.oscillation_length = osc;
  plan.panels.push_back({Panel::Part::tail, 0.0, s.lambda_min});

  const int n_low = std::max(
      1, static_cast<int>(std::ceil(std::log(s.lambda_1 / s.lambda_min) / std::log(s.low_ratio) - 1e-9)));
  const double coarse = std::pow(s.lambda_1 / s.lambda_min, 1.0 / n_low);
  const double fine = std::pow(coarse, 1.0 / s.refinement);
  std::vector<Panel> low;
  for (int k = 0; k < n_low * s.refinement; ++k) {
    const double a = s.lambda_min * std::pow(fine, k);
    const double b = k + 1 == n_low * s.refinement ? s.lambda_1 : a * fine;
    low.push_back({Panel::Part::low, a, b});
  }
  plan.panels.insert(plan.panels.end(), low.begin(), low.end());
  // The high part starts on copies of the last coarse low panel, so the chi_1
  // transition is interpolated on the same nodes from both sides.
  const double first_b = s.lambda_1;
  if (coarse <= 2.0) {
    for (std::size_t k = low.size() - static_cast<std::size_t>(s.refinement); k < low.size(); ++k) {
      plan.panels.push_back({Panel::Part::high, low[k].a, low[k].b});
    }
  } else {
    for (int r = 0; r < s.refinement; ++r) {
      const double a = 0.5 * first_b * (1.0 + static_cast<double>(r) / s.refinement);
      plan.panels.push_back({Panel::Part::high, a, a + 0.5 * first_b / s.refinement});
    }
  }
  double width = s.high_width;
  if (width <= 0.0) width = s.order * plan.required_spacing();
  if (!std::isfinite(width)) width = 0.5;
  const int n_high = std::max(1, static_cast<int>(std::ceil((s.Lambda_max - first_b) / width - 1e-9)));
  const double step = (s.Lambda_max - first_b) / (n_high * s.refinement);
  for (int k = 0; k < n_high * s.refinement; ++k) {
    plan.panels.push_back({Panel::Part::high, first_b + k * step, first_b + (k + 1) * step});
  }

  const kernels::GaussRule& rule = kernels::gauss_legendre(s.order);
  for (const Panel& p : plan.panels) {
    if (p.part == Panel::Part::tail) continue;
    for (double u : rule.nodes) {
      const double lambda = 0.5 * (p.a + p.b) + 0.5 * (p.b - p.a) * u;
      if (p.part == Panel::Part::low) {
        plan.lambda_low.push_back(lambda);
        plan.cutoff_low.push_back(cutoff_chi1(lambda, s.lambda_1));
      } else {
        plan.lambda_high.push_back(lambda);
        plan.cutoff_high.push_back(1.0 - cutoff_chi1(lambda, s.lambda_1));
        plan.cutoff_L.push_back(cutoff_chiL(lambda, s.Lambda_max));
      }
    }
  }
  return plan;
}

void check_plan(const SpectralPlan& plan) {
  const double need = plan.required_spacing();
  const double have = plan.max_spacing();
  if (have > need * (1.0 + 1e-12)) {
    fail(ErrorCode::plan, "spectral plan under-resolves the density: node spacing " + to_scientific(have) +
                              " exceeds " + to_scientific(need) + " for oscillation length " +
                              to_scientific(plan.oscillation_length));
  }
}

std::vector<Point> ObservationSet::far_points(const Grid& grid, int source, double t) const {
  std::vector<Point> out;
  const Point& x = grid.point(source);
  const double norm = std::hypot(direction.x, direction.y);
  for (double offset : far_offsets) {
    const double r = t + offset;
    if (r <= 0.0) continue;
    out.push_back({x.x + r * direction.x / norm, x.y + r * direction.y / norm});
  }
  return out;
}

namespace {

int nearest_index(const Grid& grid, const Point& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.size(); ++k) {
    const double d = distance(grid.point(k), p);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

ObservationSet default_observation(const Grid& grid, bool far_field) {
  ObservationSet obs;
  const double limit = 0.5 * grid.half_width();
  for (int k = 0; k < grid.size(); ++k) {
    if (bracket(grid.point(k)) <= limit + 1e-12) obs.near.push_back(k);
  }
  if (far_field) {
    obs.far_sources = {nearest_index(grid, {0.0, 0.0}), nearest_index(grid, {-3.0, 0.0})};
    obs.far_offsets = {-1.0, -0.6, -0.4, -0.25, -0.15, -0.05, 0.05};
  }
  return obs;
}

namespace {

constexpr double kEffectiveSupport = 1e-8;
constexpr double kDataSupport = 1e-12;

double max_radius(const Grid& grid, const std::vector<int>& indices) {
  double r = 0.0;
  for (int k : indices) r = std::max(r, std::hypot(grid.point(k).x, grid.point(k).y));
  return r;
}

std::vector<int> data_support(const Eigen::VectorXd& data) {
  std::vector<int> out;
  if (data.size() == 0) return out;
  const double cut = kDataSupport * data.cwiseAbs().maxCoeff();
  for (int k = 0; k < data.size(); ++k) {
    if (std::abs(data[k]) > cut) out.push_back(k);
  }
  return out;
}

}  // namespace

double oscillation_length(const BirmanSpace& space, const ObservationSet& obs) {
  const Grid& grid = space.grid();
  std::vector<int> observed = obs.near;
  observed.insert(observed.end(), obs.far_sources.begin(), obs.far_sources.end());
  const double r_obs = max_radius(grid, observed);
  const double r_data = max_radius(grid, data_support(obs.data));
  double r_supp = 0.0;
  if (!space.free_case()) {
    const Eigen::VectorXd& V = space.potential->V;
    const double cut = kEffectiveSupport * V.cwiseAbs().maxCoeff();
    std::vector<int> eff;
    for (int k : space.indices) {
      if (std::abs(V[k]) >= cut) eff.push_back(k);
    }
    r_supp = max_radius(grid, eff);
  }
  const double r_far = std::max(r_obs, r_data);
  double len = std::max(2.0 * r_obs, r_obs + r_data);
  if (!space.free_case()) len = std::max(len, 2.0 * r_supp + r_obs + r_far);
  return len;
}

namespace {

double max_abs(const Eigen::MatrixXcd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

struct FarColumn {
  int time = 0;
  int source = 0;  // position in far_sources
  double offset = 0.0;
  Point y;
  double r = 0.0;
};

// Density data at one lambda node. near holds D = R_V^+ - R_V^- on near pairs;
// far holds F with D = exp(i lambda r) F - exp(-i lambda r) conj(F) on far pairs.
struct NodeDensity {
  Eigen::MatrixXcd near;
  Eigen::VectorXcd far;
  Eigen::VectorXcd data;
  Eigen::MatrixXcd lead_near;
  Eigen::VectorXcd lead_far;
  double max_abs = 0.0;
};

class DensityEvaluator {
 public:
  DensityEvaluator(const BirmanSpace& space, const ObservationSet& obs, const std::vector<FarColumn>& far,
                   const LeadingTerms* leading)
      : space_(space), obs_(obs), far_(far), leading_(leading) {
    const Grid& grid = space.grid();
    data_idx_ = data_support(obs.data);
    wf_.resize(static_cast<Eigen::Index>(data_idx_.size()));
    for (std::size_t k = 0; k < data_idx_.size(); ++k) {
      wf_[static_cast<Eigen::Index>(k)] = grid.weights()[data_idx_[k]] * obs.data[data_idx_[k]];
    }
  }

  NodeDensity operator()(double lambda, bool born, bool with_leading) const {
    const Grid& grid = space_.grid();
    const int n = static_cast<int>(obs_.near.size());
    const int nf = static_cast<int>(far_.size());
    const bool has_data = !data_idx_.empty();
    NodeDensity out;
    const double h = grid.spacing();

    // Free part: R0^+ - R0^- = (i/2) J0(lambda r).
    const kernels::OffsetTable<double> j0(grid, [&](double r) { return specfun::bessel_j0(lambda * r); }, 1.0);
    out.near = 0.5 * kI * j0.block(grid, obs_.near, obs_.near).cast<cd>();
    out.far.resize(nf);
    for (int c = 0; c < nf; ++c) {
      out.far[c] = 0.25 * kI * specfun::hankel0_envelope(lambda * far_[c].r, Sign::plus);
    }
    if (has_data) out.data = 0.5 * kI * (j0.block(grid, obs_.near, data_idx_) * wf_).cast<cd>();

    if (!space_.free_case()) {
      const auto table = kernels::resolvent_table(grid, lambda, Sign::plus);
      const int m = space_.size();
      const Eigen::MatrixXcd Bn = support_block(table, space_, obs_.near);
      const Eigen::MatrixXcd Bs = support_block(table, space_, obs_.far_sources);
      const cd diag = kernels::resolvent_diagonal(lambda, Sign::plus, h);
      Eigen::MatrixXcd rhs(m, n + nf + (has_data ? 1 : 0));
      rhs.leftCols(n) = Bn;
      for (int c = 0; c < nf; ++c) {
        const double r = far_[c].r;
        for (int s = 0; s < m; ++s) {
          const Point& ps = grid.point(space_.indices[static_cast<std::size_t>(s)]);
          const double d = distance(ps, far_[c].y);
          // exp(-i lambda r) R0(s, y), computed without forming the large phase.
          const cd val = d < 1e-12 * h ? diag * std::exp(-kI * (lambda * r))
                                       : 0.25 * kI * specfun::hankel0_envelope(lambda * d, Sign::plus) *
                                             std::exp(kI * (lambda * (d - r)));
          rhs(s, n + c) = space_.v_tilde[s] * val;
        }
      }
      if (has_data) rhs.col(n + nf) = support_block(table, space_, data_idx_) * wf_.cast<cd>();

      const Eigen::MatrixXcd M = assemble_M(lambda, Sign::plus, space_);
      const auto lu = factor_M(M, lambda);
      const Eigen::MatrixXcd KR = apply_middle(born, lu, M, space_.U, rhs, lambda);
      const Eigen::MatrixXcd pert = Bn.transpose() * KR.leftCols(n);
      out.near -= 2.0 * kI * pert.imag().cast<cd>();
      for (int c = 0; c < nf; ++c) out.far[c] -= Bs.col(far_[c].source).cwiseProduct(KR.col(n + c)).sum();
      if (has_data) out.data -= 2.0 * kI * (Bn.transpose() * KR.col(n + nf)).imag().cast<cd>();

      if (with_leading && leading_ != nullptr) {
        const Eigen::MatrixXcd L = leading_->leading(lambda, Sign::plus);
        const Eigen::MatrixXcd LR = L * rhs.leftCols(n + nf);
        out.lead_near = -2.0 * kI * (Bn.transpose() * LR.leftCols(n)).imag().cast<cd>();
        out.lead_far.resize(nf);
        for (int c = 0; c < nf; ++c) out.lead_far[c] = -(Bs.col(far_[c].source).transpose() * LR.col(n + c))(0);
      }
    }
    out.max_abs = std::max(max_abs(out.near), out.far.size() ? out.far.cwiseAbs().maxCoeff() : 0.0);
    return out;
  }

 private:
  const BirmanSpace& space_;
  const ObservationSet& obs_;
  const std::vector<FarColumn>& far_;
  const LeadingTerms* leading_;
  std::vector<int> data_idx_;
  Eigen::VectorXd wf_;
};

struct Node {
  double lambda = 0.0;
  int panel = 0;
  int local = 0;
  double cutoff = 1.0;
  bool born = false;
  bool low = false;
};

std::vector<Node> plan_nodes(const SpectralPlan& plan) {
  std::vector<Node> nodes;
  const kernels::GaussRule& rule = kernels::gauss_legendre(plan.settings.order);
  std::size_t low = 0;
  std::size_t high = 0;
  for (std::size_t p = 0; p < plan.panels.size(); ++p) {
    const Panel& panel = plan.panels[p];
    if (panel.part == Panel::Part::tail) {
      nodes.push_back({panel.b, static_cast<int>(p), 0, 1.0, false, true});
      continue;
    }
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      Node node;
      node.panel = static_cast<int>(p);
      node.local = static_cast<int>(j);
      if (panel.part == Panel::Part::low) {
        node.lambda = plan.lambda_low[low];
        node.cutoff = plan.cutoff_low[low];
        node.low = true;
        ++low;
      } else {
        node.lambda = plan.lambda_high[high];
        node.cutoff = plan.cutoff_high[high] * plan.cutoff_L[high];
        node.born = true;
        ++high;
      }
      nodes.push_back(node);
    }
  }
  std::stable_sort(nodes.begin(), nodes.end(), [&](const Node& x, const Node& y) {
    return plan.panels[static_cast<std::size_t>(x.panel)].a < plan.panels[static_cast<std::size_t>(y.panel)].a;
  });
  return nodes;
}

// Weights of int_0^lambda_min exp(i omega lambda) rho(lambda) / rho(lambda_min).
cd tail_weight(OperatorKind kind, double alpha, double lambda_min, double omega) {
  const kernels::GaussRule& rule = kernels::gauss_legendre(16);
  const double ref = spectral_weight(kind, lambda_min, alpha);
  cd sum = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double lambda = 0.5 * lambda_min * (rule.nodes[k] + 1.0);
    sum += 0.5 * lambda_min * rule.weights[k] * std::exp(kI * (omega * lambda)) *
           spectral_weight(kind, lambda, alpha) / ref;
  }
  return sum;
}

// Filon weights for one panel at a list of frequencies, cached per panel.
class PanelWeights {
 public:
  PanelWeights(const SpectralPlan& plan, std::vector<double> omegas) : plan_(plan), omegas_(std::move(omegas)) {}

  void load(int panel, OperatorKind kind, double alpha) {
    const Panel& p = plan_.panels[static_cast<std::size_t>(panel)];
    weights_.assign(omegas_.size(), Eigen::VectorXcd());
    errors_.assign(omegas_.size(), Eigen::VectorXcd());
    for (std::size_t k = 0; k < omegas_.size(); ++k) {
      if (p.part == Panel::Part::tail) {
        weights_[k] = Eigen::VectorXcd::Constant(1, tail_weight(kind, alpha, p.b, omegas_[k]));
      } else {
        weights_[k] = quadrature::filon_weights(p.a, p.b, plan_.settings.order, omegas_[k]);
        errors_[k] = quadrature::filon_error_weights(p.a, p.b, plan_.settings.order, omegas_[k]);
      }
    }
  }

  cd at(std::size_t omega_index, int local) const { return weights_[omega_index][local]; }
  cd error_at(std::size_t omega_index, int local) const { return errors_[omega_index][local]; }

 private:
  const SpectralPlan& plan_;
  std::vector<double> omegas_;
  std::vector<Eigen::VectorXcd> weights_;
  std::vector<Eigen::VectorXcd> errors_;
};

struct Accumulator {
  OperatorKind kind = OperatorKind::sine;
  double alpha = 0.0;
  std::vector<Eigen::MatrixXcd> near;
  std::vector<std::vector<cd>> far;
  std::vector<Eigen::VectorXcd> data;
  std::vector<Eigen::MatrixXcd> lead_near;
  std::vector<std::vector<cd>> lead_far;
  // Contribution of the two highest Legendre modes of every panel interpolant.
  std::vector<Eigen::MatrixXcd> error_near;
  std::vector<cd> error_far;
  double low_tail = 0.0;
  std::unique_ptr<PanelWeights> weights;
  int loaded_panel = -1;
};

}  // namespace

std::vector<double> EvolutionKernel::sup_norms() const {
  std::vector<double> out;
  for (std::size_t t = 0; t < times.size(); ++t) {
    double m = max_abs(kernels[t]);
    for (const FarSample& f : far[t]) m = std::max(m, std::abs(f.value));
    out.push_back(m);
  }
  return out;
}

std::vector<double> EvolutionKernel::weighted_sup_norms(double sigma) const {
  std::vector<double> out;
  for (std::size_t t = 0; t < times.size(); ++t) {
    out.push_back(weighted_sup_norm(kernels[t], points, points, sigma, sigma));
  }
  return out;
}

std::vector<double> EvolutionKernel::remainder_sup_norms() const {
  if (leading_kernels.size() != times.size()) {
    fail(ErrorCode::precondition, "kernel was synthesized without leading singular terms");
  }
  std::vector<double> out;
  for (std::size_t t = 0; t < times.size(); ++t) {
    double m = max_abs(kernels[t] - leading_kernels[t]);
    for (std::size_t k = 0; k < far[t].size(); ++k) {
      m = std::max(m, std::abs(far[t][k].value - leading_far[t][k].value));
    }
    out.push_back(m);
  }
  return out;
}

std::vector<EvolutionKernel> synthesize_kernels(const std::vector<OperatorKind>& kinds,
                                                const std::vector<double>& times, const SpectralPlan& plan,
                                                const BirmanSpace& space, const ObservationSet& obs,
                                                const SynthesisOptions& options) {
  if (kinds.empty()) fail(ErrorCode::configuration, "no operator kinds requested");
  if (times.empty()) fail(ErrorCode::configuration, "no times requested");
  if (obs.near.empty()) fail(ErrorCode::configuration, "observation set has no near points");
  for (int k : obs.far_sources) {
    if (k < 0 || k >= space.grid().size()) fail(ErrorCode::configuration, "far source outside the grid");
  }
  if (obs.data.size() != 0 && obs.data.size() != space.grid().size()) {
    fail(ErrorCode::configuration, "initial data does not match the grid");
  }
  if (options.leading != nullptr && space.free_case()) {
    fail(ErrorCode::precondition, "leading singular terms need a nonzero potential");
  }
  SpectralPlan checked = plan;
  checked.oscillation_length = std::max(plan.oscillation_length, oscillation_length(space, obs));
  check_plan(checked);

  const Grid& grid = space.grid();
  std::vector<FarColumn> far;
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    for (std::size_t s = 0; s < obs.far_sources.size(); ++s) {
      const Point& x = grid.point(obs.far_sources[s]);
      std::size_t k = 0;
      for (const Point& y : obs.far_points(grid, obs.far_sources[s], times[ti])) {
        while (times[ti] + obs.far_offsets[k] <= 0.0) ++k;
        far.push_back({static_cast<int>(ti), static_cast<int>(s), obs.far_offsets[k], y, distance(x, y)});
        ++k;
      }
    }
  }
  // Frequencies: t for near pairs, r + t and r - t for far columns.
  std::vector<double> omegas(times.begin(), times.end());
  for (const FarColumn& c : far) {
    omegas.push_back(c.r + times[static_cast<std::size_t>(c.time)]);
    omegas.push_back(c.r - times[static_cast<std::size_t>(c.time)]);
  }

  const int n = static_cast<int>(obs.near.size());
  const bool has_data = obs.data.size() != 0;
  const bool with_leading = options.leading != nullptr;
  std::vector<Accumulator> acc;
  for (OperatorKind kind : kinds) {
    Accumulator a;
    a.kind = kind;
    a.alpha = options.alpha.value_or(default_regularizer(kind, plan.settings.epsilon));
    a.near.assign(times.size(), Eigen::MatrixXcd::Zero(n, n));
    a.error_near.assign(times.size(), Eigen::MatrixXcd::Zero(n, n));
    a.error_far.assign(far.size(), 0.0);
    a.far.assign(times.size(), {});
    if (has_data) a.data.assign(times.size(), Eigen::VectorXcd::Zero(n));
    if (with_leading) {
      a.lead_near.assign(times.size(), Eigen::MatrixXcd::Zero(n, n));
      a.lead_far.assign(times.size(), {});
    }
    a.weights = std::make_unique<PanelWeights>(plan, omegas);
    acc.push_back(std::move(a));
  }

  const std::vector<Node> nodes = plan_nodes(plan);
  const DensityEvaluator evaluate(space, obs, far, options.leading);
  const int threads = std::max(1, options.threads);

  std::vector<std::vector<cd>> far_acc(acc.size(), std::vector<cd>(far.size(), 0.0));
  std::vector<std::vector<cd>> lead_far_acc(acc.size(), std::vector<cd>(far.size(), 0.0));

  auto accumulate = [&](const Node& node, const NodeDensity& d) {
    for (std::size_t ai = 0; ai < acc.size(); ++ai) {
      Accumulator& a = acc[ai];
      if (a.loaded_panel != node.panel) {
        a.weights->load(node.panel, a.kind, a.alpha);
        a.loaded_panel = node.panel;
      }
      const double rho = spectral_weight(a.kind, node.lambda, a.alpha) * node.cutoff;
      for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const cd w = a.weights->at(ti, node.local);
        const double q = a.kind == OperatorKind::cosine ? w.real() : w.imag();
        // (1/(pi i)) q rho D
        const cd coef = q * rho / (kPi * kI);
        a.near[ti] += coef * d.near;
        if (has_data) a.data[ti] += coef * d.data;
        if (with_leading && node.low && d.lead_near.size() > 0) a.lead_near[ti] += coef * d.lead_near;
      }
      for (std::size_t c = 0; c < far.size(); ++c) {
        const cd wp = a.weights->at(times.size() + 2 * c, node.local);
        const cd wm = a.weights->at(times.size() + 2 * c + 1, node.local);
        const cd trig = a.kind == OperatorKind::cosine ? 0.5 * (wp + wm) : (wp - wm) / (2.0 * kI);
        far_acc[ai][c] += trig * rho * d.far[static_cast<Eigen::Index>(c)];
        if (with_leading && node.low && d.lead_far.size() > 0) {
          lead_far_acc[ai][c] += trig * rho * d.lead_far[static_cast<Eigen::Index>(c)];
        }
      }
      const Panel& panel = plan.panels[static_cast<std::size_t>(node.panel)];
      if (panel.part != Panel::Part::tail) {
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
          const cd e = a.weights->error_at(ti, node.local);
          const double q = a.kind == OperatorKind::cosine ? e.real() : e.imag();
          a.error_near[ti] += (q * rho / (kPi * kI)) * d.near;
        }
        for (std::size_t c = 0; c < far.size(); ++c) {
          const cd ep = a.weights->error_at(times.size() + 2 * c, node.local);
          const cd em = a.weights->error_at(times.size() + 2 * c + 1, node.local);
          const cd trig = a.kind == OperatorKind::cosine ? 0.5 * (ep + em) : (ep - em) / (2.0 * kI);
          a.error_far[c] += trig * rho * d.far[static_cast<Eigen::Index>(c)];
        }
      }
      if (panel.part == Panel::Part::tail) {
        const kernels::GaussRule& rule = kernels::gauss_legendre(16);
        double mass = 0.0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
          mass += 0.5 * panel.b * rule.weights[k] * spectral_weight(a.kind, 0.5 * panel.b * (rule.nodes[k] + 1.0), a.alpha);
        }
        a.low_tail = mass * d.max_abs / kPi;
      }
    }
  };

  for (std::size_t start = 0; start < nodes.size(); start += static_cast<std::size_t>(threads)) {
    const std::size_t stop = std::min(nodes.size(), start + static_cast<std::size_t>(threads));
    std::vector<NodeDensity> batch(stop - start);
    if (threads == 1) {
      batch[0] = evaluate(nodes[start].lambda, nodes[start].born, with_leading && nodes[start].low);
    } else {
      std::vector<std::exception_ptr> errors(batch.size());
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < batch.size(); ++k) {
        pool.emplace_back([&, k] {
          try {
            const Node& node = nodes[start + k];
            batch[k] = evaluate(node.lambda, node.born, with_leading && node.low);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    for (std::size_t k = 0; k < batch.size(); ++k) accumulate(nodes[start + k], batch[k]);
  }

  std::vector<EvolutionKernel> out;
  for (std::size_t ai = 0; ai < acc.size(); ++ai) {
    Accumulator& a = acc[ai];
    EvolutionKernel ek;
    ek.kind = a.kind;
    ek.times = times;
    ek.regularizer_alpha = a.alpha;
    ek.near = obs.near;
    for (int k : obs.near) ek.points.push_back(grid.point(k));
    ek.kernels = std::move(a.near);
    ek.applied = std::move(a.data);
    ek.nodes = static_cast<int>(nodes.size());
    ek.far.assign(times.size(), {});
    if (with_leading) {
      ek.leading_kernels = std::move(a.lead_near);
      ek.leading_far.assign(times.size(), {});
    }
    for (std::size_t c = 0; c < far.size(); ++c) {
      const FarColumn& col = far[c];
      FarSample sample{obs.far_sources[static_cast<std::size_t>(col.source)], col.offset, col.y,
                       cd(2.0 / kPi * far_acc[ai][c].imag(), 0.0)};
      ek.far[static_cast<std::size_t>(col.time)].push_back(sample);
      if (with_leading) {
        sample.value = cd(2.0 / kPi * lead_far_acc[ai][c].imag(), 0.0);
        ek.leading_far[static_cast<std::size_t>(col.time)].push_back(sample);
      }
    }
    double kmax = 0.0;
    double imag = 0.0;
    double asym = 0.0;
    for (const auto& K : ek.kernels) {
      kmax = std::max(kmax, max_abs(K));
      imag = std::max(imag, K.size() ? K.imag().cwiseAbs().maxCoeff() : 0.0);
      asym = std::max(asym, max_abs(K - K.transpose()));
    }
    for (double s : ek.sup_norms()) kmax = std::max(kmax, s);
    const double scale = kmax > 0.0 ? kmax : 1.0;
    double quad_error = 0.0;
    for (const auto& E : a.error_near) quad_error = std::max(quad_error, max_abs(E));
    for (cd e : a.error_far) quad_error = std::max(quad_error, 2.0 / kPi * std::abs(e.imag()));
    ek.max_imag = imag / scale;
    ek.max_asymmetry = asym / scale;
    ek.tail_estimate = quad_error / scale;
    ek.low_tail_bound = a.low_tail;
    const double L = plan.settings.Lambda_max;
    ek.envelope_at_cutoff = spectral_weight(a.kind, L, a.alpha) / std::sqrt(L);
    if (ek.tail_estimate > plan.settings.tail_tolerance) {
      fail(ErrorCode::tail, "spectral quadrature error estimate " + to_scientific(ek.tail_estimate) +
                                " exceeds tolerance at Lambda_max = " + to_scientific(L) +
                                "; refine the panels or lower Lambda_max");
    }
    out.push_back(std::move(ek));
  }
  return out;
}

EvolutionKernel synthesize_kernel(OperatorKind kind, const std::vector<double>& times, const SpectralPlan& plan,
                                  const BirmanSpace& space, const ObservationSet& obs,
                                  const SynthesisOptions& options) {
  return std::move(synthesize_kernels({kind}, times, plan, space, obs, options).front());
}

}  // namespace wavedisp
