#include <cmath>

#include "doctest.h"
#include "wavedisp/evolution.hpp"
#include "wavedisp/kernels.hpp"
#include "wavedisp/oracle.hpp"
#include "wavedisp/specfun.hpp"

using namespace wavedisp;

namespace {

GridPtr default_grid() {
  static const GridPtr g = build_grid(33, 8.0);
  return g;
}

GridPtr small_grid() {
  static const GridPtr g = build_grid(17, 4.0);
  return g;
}

BirmanSpace space_for(const PotentialSpec& spec, GridPtr g) { return BirmanSpace(sample_potential(spec, std::move(g))); }

PotentialSpec gaussian(double amplitude) {
  PotentialSpec s;
  s.family = PotentialFamily::gaussian_well;
  s.amplitude = amplitude;
  return s;
}

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

double relative_change(const std::vector<Eigen::MatrixXcd>& a, const std::vector<Eigen::MatrixXcd>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, max_abs(a[i] - b[i]) / max_abs(b[i]));
  return worst;
}

// Lagrange basis polynomial j on the given nodes.
double lagrange(const std::vector<double>& nodes, int j, double x) {
  double value = 1.0;
  for (int m = 0; m < static_cast<int>(nodes.size()); ++m)
    if (m != j) value *= (x - nodes[m]) / (nodes[j] - nodes[m]);
  return value;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
  mx /= x.size();
  my /= y.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    den += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return num / den;
}

}  // namespace

TEST_CASE("Filon weights integrate the Lagrange basis against exp(i omega lambda)") {
  const double a = 0.7, b = 1.3;
  const int order = 8;
  const auto& rule = kernels::gauss_legendre(order);
  std::vector<double> nodes;
  for (double u : rule.nodes) nodes.push_back(0.5 * (a + b) + 0.5 * (b - a) * u);
  const auto& fine = kernels::gauss_legendre(200);
  for (double omega : {0.0, 3.0, 57.0, -140.0}) {
    const Eigen::VectorXcd w = quadrature::filon_weights(a, b, order, omega);
    for (int j = 0; j < order; ++j) {
      std::complex<double> brute = 0.0;
      for (std::size_t k = 0; k < fine.nodes.size(); ++k) {
        const double x = 0.5 * (a + b) + 0.5 * (b - a) * fine.nodes[k];
        brute += 0.5 * (b - a) * fine.weights[k] * lagrange(nodes, j, x) * std::exp(std::complex<double>(0.0, omega * x));
      }
      CHECK(std::abs(w[j] - brute) <= 1e-11);
    }
    // The error weights see only the top two Legendre modes: zero on polynomials of degree order - 3.
    const Eigen::VectorXcd e = quadrature::filon_error_weights(a, b, order, omega);
    std::complex<double> on_cubic = 0.0, on_top = 0.0;
    for (int j = 0; j < order; ++j) {
      on_cubic += e[j] * std::pow(nodes[j], 3);
      on_top += e[j] * std::pow(nodes[j], order - 1);
    }
    CHECK(std::abs(on_cubic) <= 1e-12);
    if (omega == 57.0) CHECK(std::abs(on_top) > 1e-8);
  }
}

TEST_CASE("spectral plan partition and resolution") {
  const SpectralPlan plan = build_spectral_plan(PlanSettings{}, 20.0);
  const double l1 = plan.settings.lambda_1;
  for (std::size_t k = 0; k < plan.lambda_high.size(); ++k) {
    const double lambda = plan.lambda_high[k];
    CHECK(cutoff_chi1(lambda, l1) + plan.cutoff_high[k] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(lambda >= 0.5 * l1 - 1e-14);
    CHECK(lambda <= plan.settings.Lambda_max + 1e-14);
  }
  for (std::size_t k = 0; k < plan.lambda_low.size(); ++k) {
    CHECK(plan.lambda_low[k] > plan.settings.lambda_min);
    CHECK(plan.lambda_low[k] <= l1);
  }
  for (double lambda : {1e-3, 0.05, 0.099}) CHECK(cutoff_chi1(lambda, l1) == 1.0);
  for (double lambda : {0.2, 0.3, 5.0}) CHECK(cutoff_chi1(lambda, l1) == 0.0);
  CHECK(cutoff_chiL(1.0, 6.0) == 1.0);
  CHECK(cutoff_chiL(6.5, 6.0) == 0.0);

  CHECK(plan.max_spacing() <= plan.required_spacing());
  CHECK_NOTHROW(check_plan(plan));

  PlanSettings coarse;
  coarse.high_width = 2.0;
  const SpectralPlan bad = build_spectral_plan(coarse, 20.0);
  try {
    check_plan(bad);
    FAIL("under-resolved plan accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::plan);
  }
}

TEST_CASE("perturbed resolvent identities") {
  const BirmanSpace free_space = space_for(find_preset("zero"), small_grid());
  const auto R0 = free_resolvent(0.8, Sign::plus, small_grid());
  CHECK(max_abs(perturbed_resolvent(0.8, Sign::plus, free_space).matrix() - R0.matrix()) == 0.0);
  CHECK(max_abs(born_series_resolvent(0.8, Sign::plus, free_space).matrix() - R0.matrix()) == 0.0);

  for (const char* preset : {"weak_well", "barrier"}) {
    const BirmanSpace space = space_for(find_preset(preset), small_grid());
    const auto& fp = *space.potential;
    const Eigen::VectorXd wV = fp.V.cwiseProduct(small_grid()->weights());
    for (double lambda : {0.05, 1.0, 3.0}) {
      for (Sign sign : {Sign::plus, Sign::minus}) {
        const auto RV = perturbed_resolvent(lambda, sign, space).matrix();
        const auto R0s = free_resolvent(lambda, sign, small_grid()).matrix();
        const Eigen::MatrixXcd residual = RV - R0s + R0s * wV.asDiagonal() * RV;
        CHECK(max_abs(residual) <= 1e-6 * max_abs(RV));
      }
      const auto plus = perturbed_resolvent(lambda, Sign::plus, space).matrix();
      const auto minus = perturbed_resolvent(lambda, Sign::minus, space).matrix();
      CHECK(max_abs(plus - minus.conjugate()) <= 1e-12 * max_abs(plus));
    }
    const auto direct = perturbed_resolvent(1.0, Sign::plus, space).matrix();
    const auto born = born_series_resolvent(1.0, Sign::plus, space).matrix();
    CHECK(max_abs(direct - born) <= 1e-8 * max_abs(direct));
    try {
      (void)born_series_resolvent(0.1, Sign::plus, space);
      FAIL("Born path accepted lambda below lambda_1");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::precondition);
    }
  }
}

TEST_CASE("first Born term approximates weak coupling") {
  const BirmanSpace space = space_for(gaussian(-0.01), small_grid());
  const Eigen::VectorXd wV = space.potential->V.cwiseProduct(small_grid()->weights());
  const auto R0 = free_resolvent(2.0, Sign::plus, small_grid()).matrix();
  const Eigen::MatrixXcd first = R0 - R0 * wV.asDiagonal() * R0;
  const auto RV = perturbed_resolvent(2.0, Sign::plus, space).matrix();
  CHECK(max_abs(RV - first) <= 1e-3 * max_abs(RV));
}

TEST_CASE("spectral density") {
  const auto g = small_grid();
  const BirmanSpace free_space = space_for(find_preset("zero"), g);
  const double lambda = 1.7;
  const auto D0 = spectral_density(lambda, free_space).matrix();
  double worst = 0.0;
  for (int j = 0; j < g->size(); ++j)
    for (int i = 0; i < g->size(); ++i) {
      const double r = distance(g->point(i), g->point(j));
      const std::complex<double> expected(0.0, 0.5 * (i == j ? 1.0 : specfun::bessel_j0(lambda * r)));
      worst = std::max(worst, std::abs(D0(i, j) - expected));
    }
  CHECK(worst <= 1e-12);

  const BirmanSpace space = space_for(find_preset("barrier"), g);
  std::vector<double> sizes;
  for (double l : {1e-2, 1e-3, 1e-4}) {
    const auto D = spectral_density(l, space).matrix();
    CHECK(max_abs(D + D.conjugate()) <= 1e-12 * max_abs(D));
    sizes.push_back(max_abs(D));
  }
  CHECK(sizes[2] <= 2.0 * sizes[0]);
  CHECK(sizes[1] <= 2.0 * sizes[0]);
}

TEST_CASE("synthesized kernels: parity, realness, symmetry, far samples") {
  const auto g = small_grid();
  const BirmanSpace space = space_for(find_preset("compact_bump"), g);
  ObservationSet obs = default_observation(*g, false);
  obs.far_sources = {g->index(8, 8)};
  obs.far_offsets = {0.0};
  const SpectralPlan plan = build_spectral_plan(PlanSettings{}, oscillation_length(space, obs));
  const std::vector<double> times = {0.0, 1.0, -1.0, 1.5, -1.5};
  const auto ks = synthesize_kernels({OperatorKind::cosine, OperatorKind::sine}, times, plan, space, obs);
  const auto& cosine = ks[0];
  const auto& sine = ks[1];
  CHECK(cosine.regularizer_alpha == doctest::Approx(0.76));
  CHECK(sine.regularizer_alpha == doctest::Approx(0.26));
  CHECK(max_abs(sine.kernels[0]) == 0.0);
  for (int k : {1, 3}) {
    const double scale = max_abs(sine.kernels[k]);
    CHECK(max_abs(sine.kernels[k] + sine.kernels[k + 1]) <= 1e-12 * scale);
    CHECK(max_abs(cosine.kernels[k] - cosine.kernels[k + 1]) <= 1e-12 * max_abs(cosine.kernels[k]));
  }
  for (const auto& ek : ks) {
    CHECK(ek.max_imag <= 1e-8);
    CHECK(ek.max_asymmetry <= 1e-8);
    CHECK(ek.tail_estimate <= plan.settings.tail_tolerance);
  }
  // Far samples on the ray from the origin land on grid points at t = 1 and 1.5.
  const auto near_of = [&](const Point& p) {
    for (std::size_t i = 0; i < sine.points.size(); ++i)
      if (distance(sine.points[i], p) < 1e-12) return static_cast<int>(i);
    return -1;
  };
  const int origin = near_of({0.0, 0.0});
  REQUIRE(origin >= 0);
  for (int k : {1, 3}) {
    for (const auto* ek : {&cosine, &sine}) {
      const FarSample& s = ek->far[k].front();
      const int target = near_of(s.y);
      REQUIRE(target >= 0);
      const auto expected = ek->kernels[k](origin, target);
      CHECK(std::abs(s.value - expected) <= 1e-9 * max_abs(ek->kernels[k]));
    }
  }
}

TEST_CASE("synthesis is stable under refinement and moving lambda_1") {
  const auto g = small_grid();
  const BirmanSpace space = space_for(find_preset("compact_bump"), g);
  const ObservationSet obs = default_observation(*g, false);
  const double osc = oscillation_length(space, obs);
  const std::vector<double> times = {1.0, 3.0, 10.0};
  const auto base = synthesize_kernels({OperatorKind::cosine, OperatorKind::sine}, times,
                                       build_spectral_plan(PlanSettings{}, osc), space, obs);
  PlanSettings doubled;
  doubled.refinement = 2;
  const auto fine = synthesize_kernels({OperatorKind::cosine, OperatorKind::sine}, times,
                                       build_spectral_plan(doubled, osc), space, obs);
  PlanSettings moved;
  moved.lambda_1 = 1.5 * kDefaultLambda1;
  const auto shifted = synthesize_kernels({OperatorKind::cosine, OperatorKind::sine}, times,
                                          build_spectral_plan(moved, osc), space, obs);
  for (int k = 0; k < 2; ++k) {
    const double change = relative_change(base[k].kernels, fine[k].kernels);
    CHECK(change <= 1e-4);
    CHECK(relative_change(base[k].kernels, shifted[k].kernels) <= 1e-4);
    // The embedded estimate, relative to the largest kernel entry over all t,
    // bounds the refinement change on the same scale and shrinks with it.
    double delta = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      delta = std::max(delta, max_abs(base[k].kernels[i] - fine[k].kernels[i]));
      scale = std::max(scale, max_abs(fine[k].kernels[i]));
    }
    CHECK(base[k].tail_estimate >= delta / scale);
    CHECK(fine[k].tail_estimate < 0.1 * base[k].tail_estimate);
  }
}

TEST_CASE("free sine kernel matches the smeared closed form") {
  const auto g = default_grid();
  const BirmanSpace space = space_for(find_preset("zero"), g);
  const double sigma = 1.5;
  const auto data = [&](const Point& p) { return std::exp(-(p.x * p.x + p.y * p.y) / (2 * sigma * sigma)); };
  ObservationSet obs = default_observation(*g, false);
  obs.data.resize(g->size());
  for (int k = 0; k < g->size(); ++k) obs.data[k] = data(g->point(k));
  SynthesisOptions options;
  options.alpha = 0.0;
  const auto ek = synthesize_kernel(OperatorKind::sine, {5.0}, build_spectral_plan(PlanSettings{}, oscillation_length(space, obs)),
                                    space, obs, options);
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < ek.points.size(); ++i) {
    const double exact = smeared_free_sine(5.0, ek.points[i], data, 8.0 * sigma);
    err = std::max(err, std::abs(ek.applied[0][i] - exact));
    ref = std::max(ref, std::abs(exact));
  }
  CHECK(err <= 1e-2 * ref);
}

TEST_CASE("free sine kernel decays like t^-1/2") {
  const auto g = default_grid();
  const BirmanSpace space = space_for(find_preset("zero"), g);
  const ObservationSet obs = default_observation(*g, true);
  SynthesisOptions options;
  options.alpha = 0.0;
  const auto times = log_spaced(10.0, 200.0, 10);
  const auto ek = synthesize_kernel(OperatorKind::sine, times,
                                    build_spectral_plan(PlanSettings{}, oscillation_length(space, obs)), space, obs, options);
  CHECK(log_slope(times, ek.sup_norms()) == doctest::Approx(-0.5).epsilon(0.1));
}
