#include <cmath>

#include "doctest.h"
#include "wavedisp/decayfit.hpp"

using namespace wavedisp;

namespace {

std::vector<double> sample(const std::vector<double>& t, double (*f)(double)) {
  std::vector<double> out;
  for (double s : t) out.push_back(f(s));
  return out;
}

// A synthetic kernel with 1 x 1 near blocks carrying the given norms.
EvolutionKernel scalar_kernel(OperatorKind kind, const std::vector<double>& t, const std::vector<double>& norms,
                              const std::vector<double>& leading = {}) {
  EvolutionKernel ek;
  ek.kind = kind;
  ek.times = t;
  ek.points = {Point{0.0, 0.0}};
  ek.far.assign(t.size(), {});
  for (std::size_t i = 0; i < t.size(); ++i) {
    ek.kernels.push_back(Eigen::MatrixXcd::Constant(1, 1, norms[i]));
    if (!leading.empty()) ek.leading_kernels.push_back(Eigen::MatrixXcd::Constant(1, 1, leading[i]));
  }
  if (!leading.empty()) ek.leading_far.assign(t.size(), {});
  return ek;
}

ResonanceReport report_of(Resonance r) {
  ResonanceReport report;
  report.classification = r;
  return report;
}

}  // namespace

TEST_CASE("power fits recover synthetic exponents") {
  const auto t = log_spaced(10.0, 200.0, 12);
  for (double p : {-2.0, -1.0, -0.5, 0.0}) {
    std::vector<double> norms;
    for (double s : t) norms.push_back(3.0 * std::pow(s, p));
    const DecayFit fit = fit_power(t, norms);
    CHECK(fit.exponent == doctest::Approx(p).epsilon(0.02).scale(1.0));
    CHECK(fit.constant == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(fit.residual <= 1e-10);
    CHECK_FALSE(fit.inconclusive);
    CHECK(fit.model == DecayModel::power);
  }
}

TEST_CASE("power-log model recovers the constant and flags poor fits") {
  const auto t = log_spaced(5.0, 200.0, 12);
  const auto norms = sample(t, [](double s) { return 0.7 / (s * std::log(s) * std::log(s)); });
  const DecayFit fit = fit_power_log2(t, norms);
  CHECK(fit.model == DecayModel::power_log2);
  CHECK(fit.constant == doctest::Approx(0.7).epsilon(0.05));
  CHECK(fit.ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.residual <= 1e-12);
  // Pure-power fallback over [5, 200]: slope of t^-1 (log t)^-2 lies between -1.5 and -2.3.
  CHECK(fit.exponent < -1.4);

  const auto slow = sample(t, [](double s) { return std::pow(s, -0.5); });
  const DecayFit bad = fit_power_log2(t, slow);
  CHECK(bad.inconclusive);
  CHECK(bad.ratio > 5.0);

  std::vector<double> noisy = sample(t, [](double s) { return std::pow(s, -1.0); });
  for (std::size_t i = 0; i < noisy.size(); i += 2) noisy[i] *= 1.5;
  CHECK(fit_power(t, noisy).inconclusive);
}

TEST_CASE("fit preconditions") {
  const auto decade = log_spaced(10.0, 100.0, 8);
  const auto short_span = log_spaced(10.0, 50.0, 8);
  const auto few = log_spaced(10.0, 200.0, 7);
  const auto ones = [](const std::vector<double>& t) { return std::vector<double>(t.size(), 1.0); };

  const DecayFit flat = fit_unweighted_decay(scalar_kernel(OperatorKind::sine, decade, ones(decade)));
  CHECK(flat.exponent == doctest::Approx(0.0).scale(1.0).epsilon(0.02));

  for (const auto& t : {short_span, few}) {
    try {
      (void)fit_unweighted_decay(scalar_kernel(OperatorKind::sine, t, ones(t)));
      FAIL("fit accepted too few samples or too short a span");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::fit);
    }
  }
  const std::vector<double> unordered = {1.0, 3.0, 2.0};
  CHECK_THROWS_AS(fit_power(unordered, ones(unordered)), Error);
  const std::vector<double> early = {1.5, 3.0, 6.0};
  CHECK_THROWS_AS(fit_power_log2(early, ones(early)), Error);
  const std::vector<double> three = {1.0, 2.0, 3.0};
  const std::vector<double> with_zero = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(fit_power(three, with_zero), Error);

  const auto ek = scalar_kernel(OperatorKind::sine, decade, ones(decade));
  try {
    (void)fit_weighted_decay(ek, Resonance::first_kind, 0.51);
    FAIL("weighted fit accepted a non-regular threshold");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::precondition);
  }
  // Samples below t = 2 are dropped from the weighted fit.
  const auto wide = log_spaced(1.0, 200.0, 16);
  const DecayFit wf = fit_weighted_decay(scalar_kernel(OperatorKind::sine, wide, ones(wide)), Resonance::regular, 0.51);
  CHECK(wf.t_values.front() >= 2.0);
}

TEST_CASE("non-regular report") {
  const auto t = log_spaced(1.0, 100.0, 12);
  const auto one = std::vector<double>(t.size(), 1.0);
  CHECK_THROWS_AS(nonregular_decay_report(std::vector<EvolutionKernel>{scalar_kernel(OperatorKind::sine, t, one)},
                                          report_of(Resonance::regular)),
                  Error);

  const auto free_like = sample(t, [](double s) { return std::pow(s, -0.5); });
  const std::vector<EvolutionKernel> first{scalar_kernel(OperatorKind::cosine, t, free_like),
                                           scalar_kernel(OperatorKind::sine, t, free_like)};
  const auto first_report = nonregular_decay_report(first, report_of(Resonance::first_kind));
  CHECK(first_report.checks.size() == 2);
  CHECK(first_report.passed());

  // Bounded cosine, linearly growing sine, remainders decaying like t^-1/2.
  std::vector<double> cos_total, cos_lead, sin_total, sin_lead;
  for (double s : t) {
    cos_lead.push_back(2.0);
    cos_total.push_back(2.0 + std::pow(s, -0.5));
    sin_lead.push_back(0.3 * s);
    sin_total.push_back(0.3 * s + std::pow(s, -0.5));
  }
  const std::vector<EvolutionKernel> third{scalar_kernel(OperatorKind::cosine, t, cos_total, cos_lead),
                                           scalar_kernel(OperatorKind::sine, t, sin_total, sin_lead)};
  const auto report = nonregular_decay_report(third, report_of(Resonance::third_kind));
  CHECK(report.checks.size() == 4);
  CHECK(report.passed());

  // Remainder that does not decay.
  std::vector<double> stuck = cos_lead;
  for (double& v : stuck) v *= 0.5;
  const std::vector<EvolutionKernel> bad{scalar_kernel(OperatorKind::cosine, t, cos_total, stuck)};
  CHECK_FALSE(nonregular_decay_report(bad, report_of(Resonance::second_kind)).passed());

  // Boundedness is judged over the final decade: t^-1/2 varies by 10^(1/2) there, t^-1 by 10.
  const auto wide = log_spaced(1.0, 1000.0, 16);
  for (const auto& [power, bounded] : {std::pair{-0.5, true}, std::pair{-1.0, false}}) {
    std::vector<double> total, lead;
    for (double s : wide) {
      lead.push_back(1e-6 * std::pow(s, power));
      total.push_back(std::pow(s, power));
    }
    const std::vector<EvolutionKernel> decaying{scalar_kernel(OperatorKind::cosine, wide, total, lead)};
    const auto r = nonregular_decay_report(decaying, report_of(Resonance::third_kind));
    CHECK(r.checks.front().name == "cosine_bounded_ratio");
    CHECK(r.checks.front().passed == bounded);
  }

  const std::vector<EvolutionKernel> missing{scalar_kernel(OperatorKind::cosine, t, cos_total)};
  CHECK_THROWS_AS(nonregular_decay_report(missing, report_of(Resonance::third_kind)), Error);
}

TEST_CASE("free decay exponent approaches -1/2 under refinement") {
  const auto times = log_spaced(10.0, 200.0, 10);
  SynthesisOptions options;
  options.alpha = 0.0;
  std::vector<double> distance;
  for (const auto& [n, refinement] : {std::pair{33, 1}, std::pair{49, 2}}) {
    const auto g = build_grid(n, 8.0);
    const BirmanSpace space(sample_potential(find_preset("zero"), g));
    const ObservationSet obs = default_observation(*g, true);
    PlanSettings settings;
    settings.refinement = refinement;
    // Lambda_max follows the grid's Nyquist scale.
    settings.Lambda_max = 6.0 * (n - 1) / 32.0;
    const auto ek = synthesize_kernel(OperatorKind::sine, times, build_spectral_plan(settings, oscillation_length(space, obs)),
                                      space, obs, options);
    const DecayFit fit = fit_unweighted_decay(ek);
    CHECK(fit.exponent == doctest::Approx(-0.5).epsilon(0.1));
    distance.push_back(std::abs(fit.exponent + 0.5));
  }
  CHECK(distance[1] <= distance[0]);
}
