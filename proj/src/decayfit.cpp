#include "wavedisp/decayfit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wavedisp {

namespace {

void validate_samples(std::span<const double> t, std::span<const double> norms, double t_floor) {
  if (t.size() != norms.size()) fail(ErrorCode::fit, "times and norms differ in length");
  if (t.size() < 2) fail(ErrorCode::fit, "a decay fit needs at least two samples");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= t_floor) || !(t[i] > 0.0))
      fail(ErrorCode::fit, "sample time " + std::to_string(t[i]) + " is below " + std::to_string(t_floor));
    if (i > 0 && !(t[i] > t[i - 1])) fail(ErrorCode::fit, "sample times must be strictly increasing");
    if (!(norms[i] > 0.0) || !std::isfinite(norms[i])) fail(ErrorCode::fit, "norms must be positive and finite");
  }
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

template <class Model>
double max_deviation(std::span<const double> t, std::span<const double> norms, Model model) {
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(model(t[i]) / norms[i] - 1.0));
  return worst;
}

struct Selection {
  std::vector<double> t;
  std::vector<double> norms;
};

Selection select(const std::vector<double>& times, const std::vector<double>& norms, double t_lo, double t_hi) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] >= t_lo && times[i] <= t_hi && times[i] > 0.0) order.push_back(i);
  std::ranges::sort(order, {}, [&](std::size_t i) { return times[i]; });
  Selection s;
  for (std::size_t i : order) {
    s.t.push_back(times[i]);
    s.norms.push_back(norms[i]);
  }
  if (static_cast<int>(s.t.size()) < kMinDecaySamples)
    fail(ErrorCode::fit, "decay fits need at least " + std::to_string(kMinDecaySamples) + " samples in range, got " +
                             std::to_string(s.t.size()));
  if (s.t.back() < 10.0 * s.t.front())
    fail(ErrorCode::fit, "sample times [" + std::to_string(s.t.front()) + ", " + std::to_string(s.t.back()) +
                             "] span less than a decade");
  return s;
}

// Samples from the last t_i <= t_max / 10 onwards: the final decade of the range.
Selection last_decade(const Selection& s) {
  std::size_t first = 0;
  for (std::size_t i = 0; i < s.t.size(); ++i)
    if (s.t[i] <= s.t.back() / 10.0) first = i;
  Selection out;
  out.t.assign(s.t.begin() + static_cast<std::ptrdiff_t>(first), s.t.end());
  out.norms.assign(s.norms.begin() + static_cast<std::ptrdiff_t>(first), s.norms.end());
  return out;
}

double ratio_of(const std::vector<double>& v) {
  const auto [lo, hi] = std::ranges::minmax(v);
  return hi / lo;
}

}  // namespace

const char* decay_model_name(DecayModel model) { return model == DecayModel::power ? "power" : "power_log2"; }

DecayFit fit_power(std::span<const double> t, std::span<const double> norms) {
  validate_samples(t, norms, 0.0);
  DecayFit fit;
  fit.model = DecayModel::power;
  fit.t_values.assign(t.begin(), t.end());
  fit.norms.assign(norms.begin(), norms.end());
  std::vector<double> lt, ln;
  for (std::size_t i = 0; i < t.size(); ++i) {
    lt.push_back(std::log(t[i]));
    ln.push_back(std::log(norms[i]));
  }
  const LineFit line = least_squares(lt, ln);
  fit.exponent = line.slope;
  fit.constant = std::exp(line.intercept);
  fit.residual = max_deviation(t, norms, [&](double s) { return fit.constant * std::pow(s, fit.exponent); });
  fit.inconclusive = fit.residual > kInconclusiveResidual;
  return fit;
}

DecayFit fit_power_log2(std::span<const double> t, std::span<const double> norms) {
  validate_samples(t, norms, 2.0);
  DecayFit fit = fit_power(t, norms);
  fit.model = DecayModel::power_log2;
  std::vector<double> scaled;
  double mean_log = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double lt = std::log(t[i]);
    scaled.push_back(norms[i] * t[i] * lt * lt);
    mean_log += std::log(scaled.back());
  }
  fit.constant = std::exp(mean_log / static_cast<double>(t.size()));
  fit.ratio = ratio_of(scaled);
  fit.residual = max_deviation(t, norms, [&](double s) { return fit.constant / (s * std::log(s) * std::log(s)); });
  fit.inconclusive = fit.residual > kInconclusiveResidual;
  return fit;
}

DecayFit fit_unweighted_decay(const EvolutionKernel& ek, double t_lo, double t_hi) {
  const Selection s = select(ek.times, ek.sup_norms(), t_lo, t_hi);
  return fit_power(s.t, s.norms);
}

DecayFit fit_weighted_decay(const EvolutionKernel& ek, Resonance classification, double sigma, double t_lo,
                            double t_hi) {
  if (classification != Resonance::regular)
    fail(ErrorCode::precondition,
         std::string("weighted decay needs a regular threshold, classification is ") + resonance_name(classification));
  const Selection s = select(ek.times, ek.weighted_sup_norms(sigma), std::max(2.0, t_lo), t_hi);
  return fit_power_log2(s.t, s.norms);
}

bool NonregularReport::passed() const {
  return std::ranges::all_of(checks, [](const DecayCheck& c) { return c.passed; });
}

NonregularReport nonregular_decay_report(std::span<const EvolutionKernel> kernels, const ResonanceReport& report) {
  if (report.classification == Resonance::regular)
    fail(ErrorCode::precondition, "the non-regular decay report needs a resonance at zero");
  if (kernels.empty()) fail(ErrorCode::precondition, "the non-regular decay report needs at least one kernel");
  NonregularReport out;
  out.classification = report.classification;
  for (const EvolutionKernel& ek : kernels) {
    const std::string kind = operator_kind_name(ek.kind);
    if (report.classification == Resonance::first_kind) {
      DecayFit fit = fit_unweighted_decay(ek, 1.0);
      out.checks.push_back({kind + "_exponent", fit.exponent, kFirstKindBand,
                            std::abs(fit.exponent + 0.5) <= kFirstKindBand});
      out.fits.push_back(std::move(fit));
      continue;
    }
    if (ek.leading_kernels.empty())
      fail(ErrorCode::precondition, "non-regular checks need kernels synthesized with the leading singular terms");
    const Selection s = select(ek.times, ek.sup_norms(), 1.0, 1e300);
    if (ek.kind == OperatorKind::cosine) {
      const double ratio = ratio_of(last_decade(s).norms);
      out.checks.push_back({"cosine_bounded_ratio", ratio, kBoundedRatio, ratio <= kBoundedRatio});
    } else {
      DecayFit growth = fit_power(s.t, s.norms);
      out.checks.push_back({"sine_growth_exponent", growth.exponent, kGrowthExponent,
                            growth.exponent <= kGrowthExponent});
      out.fits.push_back(std::move(growth));
    }
    const Selection r = select(ek.times, ek.remainder_sup_norms(), 1.0, 1e300);
    DecayFit remainder = fit_power(r.t, r.norms);
    out.checks.push_back({kind + "_remainder_exponent", remainder.exponent, kRemainderExponent,
                          remainder.exponent <= kRemainderExponent});
    out.fits.push_back(std::move(remainder));
  }
  return out;
}

}  // namespace wavedisp
