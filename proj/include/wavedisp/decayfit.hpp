#pragma once

// Decay-rate extraction from per-t kernel norms.

#include <span>
#include <string>
#include <vector>

#include "wavedisp/birman.hpp"
#include "wavedisp/evolution.hpp"

namespace wavedisp {

enum class DecayModel { power, power_log2 };
const char* decay_model_name(DecayModel model);

inline constexpr double kInconclusiveResidual = 0.2;
inline constexpr int kMinDecaySamples = 8;

struct DecayFit {
  DecayModel model = DecayModel::power;
  std::vector<double> t_values;
  std::vector<double> norms;
  // Least-squares slope of log norm against log t; for power_log2 this is the pure-power fallback.
  double exponent = 0.0;
  // power: C in C t^exponent. power_log2: C in C t^-1 (log t)^-2, the geometric mean of norm t (log t)^2.
  double constant = 0.0;
  double residual = 0.0;      // max |model / norm - 1|
  double ratio = 0.0;         // power_log2: max / min of norm t (log t)^2
  bool inconclusive = false;  // residual > kInconclusiveResidual
};

// Both need strictly increasing positive t and positive norms; power_log2 needs t >= 2.
DecayFit fit_power(std::span<const double> t, std::span<const double> norms);
DecayFit fit_power_log2(std::span<const double> t, std::span<const double> norms);

// Samples with t in [t_lo, t_hi]; at least kMinDecaySamples spanning a decade.
DecayFit fit_unweighted_decay(const EvolutionKernel& ek, double t_lo = 0.0, double t_hi = 1e300);
// Weighted sup norm with <x>^-sigma <y>^-sigma against C t^-1 (log t)^-2, on t >= max(2, t_lo).
DecayFit fit_weighted_decay(const EvolutionKernel& ek, Resonance classification, double sigma, double t_lo = 2.0,
                            double t_hi = 1e300);

struct DecayCheck {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool passed = false;
};

struct NonregularReport {
  Resonance classification = Resonance::first_kind;
  std::vector<DecayCheck> checks;
  std::vector<DecayFit> fits;

  bool passed() const;
};

inline constexpr double kBoundedRatio = 5.0;
inline constexpr double kGrowthExponent = 1.1;
inline constexpr double kRemainderExponent = -0.35;
inline constexpr double kFirstKindBand = 0.15;

// FirstKind: every kernel keeps exponent -1/2 within kFirstKindBand. Second
// and third kind: over the final decade of times the cosine sup norm stays
// within a factor kBoundedRatio, the sine sup norm grows no faster than
// t^kGrowthExponent, and the kernels minus their leading singular parts decay
// at least like t^kRemainderExponent.
NonregularReport nonregular_decay_report(std::span<const EvolutionKernel> kernels, const ResonanceReport& report);

}  // namespace wavedisp
