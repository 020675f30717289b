#include "wavedisp/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "wavedisp/symmetry.hpp"

namespace wavedisp {

using json = nlohmann::ordered_json;

namespace {

constexpr CheckKind kCheckOrder[] = {CheckKind::classify,   CheckKind::expansion_validate, CheckKind::main_decay,
                                     CheckKind::weighted_decay, CheckKind::nonregular,      CheckKind::oracle_compare};

// Limits of the driver's own checks; the bounds they test carry unspecified constants.
constexpr double kRegularExponent = -0.4;
constexpr double kFreeExponentBand = 0.1;
constexpr double kWeightedRatio = 5.0;
constexpr double kWeightedFallbackExponent = -0.8;
constexpr double kOracleTolerance = 5e-2;
constexpr double kClosedFormTolerance = 1e-2;
constexpr double kEnvelopeConstant = 10.0;
constexpr double kRegularSlope = 0.4;
constexpr double kSwaveSlope = 0.35;
constexpr double kSingularRemainder = 0.15;
constexpr double kSopImag = 1e-10;

// ---- configuration parsing ----

class Reader {
 public:
  Reader(const json& node, std::string where) : node_(node), where_(std::move(where)) {
    if (!node_.is_object()) fail(ErrorCode::parse, where_ + ": expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : node_.items())
      if (!allowed.count(item.key())) fail(ErrorCode::parse, where_ + ": unknown key '" + item.key() + "'");
  }

  bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }
  const json& at(const char* key) const { return node_.at(key); }
  std::string path(const char* key) const { return where_ + "." + key; }

  template <class T>
  void read(const char* key, T& out) const {
    if (!has(key)) return;
    try {
      out = node_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(ErrorCode::parse, path(key) + ": " + e.what());
    }
  }

 private:
  const json& node_;
  std::string where_;
};

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::configuration, what);
}

std::vector<double> parse_samples(const json& node, const std::string& where) {
  std::vector<double> out;
  if (node.is_array()) {
    try {
      out = node.get<std::vector<double>>();
    } catch (const json::exception& e) {
      fail(ErrorCode::parse, where + ": " + e.what());
    }
  } else {
    const Reader r(node, where);
    r.allow({"from", "to", "count", "spacing"});
    double from = 0.0, to = 0.0;
    int count = 0;
    std::string spacing = "geometric";
    r.read("from", from);
    r.read("to", to);
    r.read("count", count);
    r.read("spacing", spacing);
    require(count >= 2, where + ": count must be at least 2");
    require(to > from, where + ": 'to' must exceed 'from'");
    if (spacing == "geometric") {
      require(from > 0.0, where + ": geometric ranges need from > 0");
      out = log_spaced(from, to, count);
    } else if (spacing == "linear") {
      for (int i = 0; i < count; ++i) out.push_back(from + (to - from) * i / (count - 1));
    } else {
      fail(ErrorCode::configuration, where + ": spacing must be 'geometric' or 'linear'");
    }
  }
  require(!out.empty(), where + ": no samples");
  for (std::size_t i = 0; i < out.size(); ++i) {
    require(std::isfinite(out[i]) && out[i] >= 0.0, where + ": samples must be finite and nonnegative");
    require(i == 0 || out[i] > out[i - 1], where + ": samples must be strictly increasing");
  }
  return out;
}

std::array<double, 2> parse_range(const Reader& r, const char* key, std::array<double, 2> fallback) {
  if (!r.has(key)) return fallback;
  std::vector<double> v;
  r.read(key, v);
  require(v.size() == 2 && v[0] > 0.0 && v[1] > v[0], r.path(key) + ": expected [lo, hi] with 0 < lo < hi");
  return {v[0], v[1]};
}

PotentialSpec parse_potential(const json& node, std::optional<Parity>& tune) {
  if (node.is_string()) return find_preset(node.get<std::string>());
  const Reader r(node, "potential");
  r.allow({"preset", "name", "family", "amplitude", "width", "center", "beta", "tune_to_threshold"});
  PotentialSpec spec;
  if (r.has("preset")) {
    std::string preset;
    r.read("preset", preset);
    spec = find_preset(preset);
  }
  if (r.has("family")) {
    std::string family;
    r.read("family", family);
    spec.family = parse_family(family);
    if (!r.has("name") && !r.has("preset")) spec.name = family;
  }
  r.read("name", spec.name);
  r.read("amplitude", spec.amplitude);
  r.read("width", spec.width);
  r.read("beta", spec.beta);
  if (r.has("center")) {
    std::vector<double> c;
    r.read("center", c);
    require(c.size() == 2, "potential.center: expected [x, y]");
    spec.center = {c[0], c[1]};
  }
  if (r.has("tune_to_threshold")) {
    std::string sector;
    r.read("tune_to_threshold", sector);
    tune = parse_parity(sector);
  }
  if (spec.name.empty()) spec.name = family_name(spec.family);
  require(spec.width > 0.0, "potential.width must be positive");
  require(std::isfinite(spec.amplitude), "potential.amplitude must be finite");
  require(spec.beta > 0.0, "potential.beta must be positive");
  return spec;
}

std::string to_lower_copy(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

Resonance parse_resonance(const std::string& name) {
  for (Resonance r : {Resonance::regular, Resonance::first_kind, Resonance::second_kind, Resonance::third_kind})
    if (to_lower_copy(name) == to_lower_copy(resonance_name(r))) return r;
  fail(ErrorCode::configuration, "unknown classification '" + name + "'");
}

bool is_centred_radial(const PotentialSpec& spec) {
  return spec.family == PotentialFamily::zero || (spec.center.x == 0.0 && spec.center.y == 0.0);
}

// ---- JSON helpers ----

json to_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

json potential_json(const PotentialSpec& spec) {
  return json{{"name", spec.name},
              {"family", family_name(spec.family)},
              {"amplitude", spec.amplitude},
              {"width", spec.width},
              {"center", {spec.center.x, spec.center.y}},
              {"beta", spec.beta}};
}

json fit_json(const DecayFit& fit) {
  return json{{"model", decay_model_name(fit.model)},
              {"exponent", fit.exponent},
              {"constant", fit.constant},
              {"residual", fit.residual},
              {"ratio", fit.ratio},
              {"inconclusive", fit.inconclusive},
              {"t_first", fit.t_values.front()},
              {"t_last", fit.t_values.back()},
              {"samples", fit.t_values.size()}};
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", x);
  return buf;
}

// ---- check bookkeeping ----

struct CheckRecord {
  CheckKind kind = CheckKind::classify;
  CheckStatus status = CheckStatus::pass;
  std::string reason;
  json metrics = json::array();
  json details = json::object();

  void metric(const std::string& name, double value, const char* relation, double limit, bool ok) {
    metrics.push_back({{"name", name}, {"value", value}, {"relation", relation}, {"limit", limit}, {"passed", ok}});
    if (!ok) status = CheckStatus::fail;
  }
  void at_most(const std::string& name, double value, double limit) {
    metric(name, value, "<=", limit, value <= limit);
  }
  void at_least(const std::string& name, double value, double limit) {
    metric(name, value, ">=", limit, value >= limit);
  }
  void flag(const std::string& name, bool ok, const std::string& detail) {
    metrics.push_back({{"name", name}, {"value", detail}, {"passed", ok}});
    if (!ok) status = CheckStatus::fail;
  }
  void skip(std::string why) {
    status = CheckStatus::skip;
    reason = std::move(why);
  }
  void error(const std::string& why) {
    status = CheckStatus::fail;
    reason = why;
  }
};

struct Trace {
  std::vector<double> power_fit;
  std::vector<double> power_log2_fit;
};

// ---- the run ----

class Experiment {
 public:
  Experiment(const ExperimentConfig& config, RunMode mode, ProgressLog log)
      : config_(config), mode_(mode), log_(std::move(log)) {}

  RunResult run(const std::filesystem::path& out_dir);

 private:
  bool enabled(CheckKind kind) const;
  void note(const std::string& message) const {
    if (log_) log_(message);
  }
  CheckRecord& record(CheckKind kind) { return records_.at(kind); }

  void prepare();
  void classify_stage();
  void expansion_stage();
  void evolve_stage();
  void decay_stage();
  void nonregular_stage();
  void oracle_stage();

  json resonance_json() const;
  json report_json() const;
  void write_traces(const std::filesystem::path& dir, RunResult& result) const;

  const ExperimentConfig& config_;
  RunMode mode_;
  ProgressLog log_;

  GridPtr grid_;
  PotentialSpec spec_;
  std::optional<BirmanSpace> space_;
  ResonanceReport report_;
  std::optional<Resonance> refined_;
  std::optional<Eigen::MatrixXd> T_;
  std::optional<ProjectionChain> chain_;
  std::optional<LeadingTerms> leading_;
  std::vector<EvolutionKernel> kernels_;
  std::map<OperatorKind, Trace> traces_;
  json oracle_rows_ = json::array();
  std::string evolve_error_;
  std::map<CheckKind, CheckRecord> records_;
  std::vector<std::string> warnings_;
  std::vector<std::string> errors_;
};

bool Experiment::enabled(CheckKind kind) const {
  if (!config_.wants(kind)) return false;
  switch (mode_) {
    case RunMode::run:
      return true;
    case RunMode::classify:
    case RunMode::evolve:
      return kind == CheckKind::classify;
    case RunMode::decay_fit:
      return kind == CheckKind::classify || kind == CheckKind::main_decay || kind == CheckKind::weighted_decay ||
             kind == CheckKind::nonregular;
    case RunMode::validate:
      return kind == CheckKind::classify || kind == CheckKind::expansion_validate ||
             kind == CheckKind::oracle_compare;
  }
  return false;
}

void Experiment::prepare() {
  for (CheckKind kind : kCheckOrder)
    if (enabled(kind)) records_[kind].kind = kind;
  grid_ = build_grid(config_.n_per_axis, config_.L_box);
  spec_ = config_.potential;
  if (config_.tune_sector) {
    note("tuning the depth to the " + config_.tune_sector->name() + " threshold");
    spec_ = tune_to_threshold(spec_, grid_, *config_.tune_sector);
  }
  space_.emplace(sample_potential(spec_, grid_));
  const auto span = std::minmax_element(config_.times.begin(), config_.times.end());
  const bool evolving = mode_ == RunMode::evolve || enabled(CheckKind::main_decay) ||
                        enabled(CheckKind::weighted_decay) || enabled(CheckKind::nonregular);
  if (evolving && !(*span.second >= 10.0 * *span.first && *span.first > 0.0))
    warnings_.push_back("times span less than a decade; decay fits will be rejected");
}

void Experiment::classify_stage() {
  note("classifying the threshold");
  if (space_->free_case()) {
    report_ = classify(*space_, config_.null_threshold);
  } else {
    T_ = assemble_T(*space_);
    chain_ = build_projection_chain(*T_, *space_, config_.null_threshold);
    report_ = classify_resonance(*chain_, *T_, *space_);
  }
  if (report_.low_confidence) warnings_.push_back("classification is close to the null-space threshold");
  if (!enabled(CheckKind::classify)) return;
  CheckRecord& rec = record(CheckKind::classify);
  rec.details["classification"] = resonance_name(report_.classification);
  if (config_.expected)
    rec.flag("expected_classification", report_.classification == *config_.expected,
             std::string(resonance_name(report_.classification)) + " vs expected " +
                 resonance_name(*config_.expected));
  if (config_.refinement_check) {
    const int n = config_.n_per_axis + (config_.n_per_axis - 1) / 2;
    note("classifying on the refined grid (" + std::to_string(n) + " points per axis)");
    try {
      const BirmanSpace refined(sample_potential(spec_, build_grid(n, config_.L_box)));
      refined_ = classify(refined, config_.null_threshold).classification;
      rec.details["refined_n_per_axis"] = n;
      rec.flag("refinement_stable", *refined_ == report_.classification,
               std::string(resonance_name(*refined_)) + " on the refined grid");
    } catch (const Error& e) {
      rec.error(std::string("refined classification failed: ") + e.what());
    }
  }
}

void Experiment::expansion_stage() {
  if (!enabled(CheckKind::expansion_validate)) return;
  CheckRecord& rec = record(CheckKind::expansion_validate);
  if (space_->free_case()) {
    rec.skip("V = 0 has no Birman-Schwinger operator to invert");
    return;
  }
  note("validating M inverses and expansions");
  try {
    const double lambda_1 = config_.spectral.lambda_1;
    std::vector<double> lambdas = log_spaced(config_.spectral.lambda_min, lambda_1, 6);
    for (double l : log_spaced(lambda_1, 10.0, 6))
      if (l > lambda_1) lambdas.push_back(l);
    double worst = 0.0;
    json sweep = json::array();
    for (double l : lambdas) {
      for (Sign s : {Sign::plus, Sign::minus}) {
        const double r = invert_M(l, s, *space_).residual;
        worst = std::max(worst, r);
        sweep.push_back({{"lambda", l}, {"sign", s == Sign::plus ? "+" : "-"}, {"residual", r}});
      }
    }
    rec.details["inverse_sweep"] = sweep;
    rec.at_most("inverse_residual", worst, kInverseResidual);

    double constant = 0.0, previous = 1e300;
    bool shrinking = true;
    for (double l : {1e-2, 1e-3, 1e-4}) {
      const double ratio = expansion_residual_E0(l, Sign::plus, *space_->potential).envelope_ratio;
      constant = std::max(constant, ratio);
      shrinking = shrinking && ratio <= previous;
      previous = ratio;
    }
    rec.at_most("E0_envelope_constant", constant, kEnvelopeConstant);
    rec.flag("E0_envelope_shrinks", shrinking, "envelope ratio non-increasing as lambda -> 0");

    switch (report_.classification) {
      case Resonance::regular: {
        const auto e = validate_Minverse_expansion(*space_, *chain_, *T_, config_.expansion_lambdas);
        rec.at_least("expansion_slope", e.fit.slope, kRegularSlope);
        rec.at_most("S_op_imag_max", e.S_op_imag_max, kSopImag);
        rec.details["expansion_constant"] = e.fit.constant;
        rec.details["c_fit"] = e.c_fit;
        rec.details["c_analytic"] = e.c_analytic;
        break;
      }
      case Resonance::first_kind: {
        const auto e = swave_expansion_terms(*chain_, *T_, *space_, config_.expansion_lambdas);
        rec.at_least("swave_expansion_slope", e.fit.slope, kSwaveSlope);
        rec.details["expansion_constant"] = e.fit.constant;
        break;
      }
      case Resonance::second_kind:
      case Resonance::third_kind: {
        leading_ = singular_leading_terms(*chain_, *T_, *space_, config_.expansion_lambdas);
        rec.at_most("leading_relative_remainder", leading_->sweep.front().relative_remainder, kSingularRemainder);
        rec.details["D2_absolute_norm"] = leading_->D2_absolute_norm;
        rec.details["D3_absolute_norm"] = leading_->D3_absolute_norm;
        break;
      }
    }
  } catch (const Error& e) {
    rec.error(std::string(error_code_name(e.code())) + " error: " + e.what());
  }
}

void Experiment::evolve_stage() {
  const bool nonregular = report_.classification != Resonance::regular;
  const bool wants_fits =
      (enabled(CheckKind::main_decay) &&
       (report_.classification == Resonance::regular || report_.classification == Resonance::first_kind)) ||
      (enabled(CheckKind::weighted_decay) && !nonregular) || (enabled(CheckKind::nonregular) && nonregular);
  if (mode_ != RunMode::evolve && !wants_fits) return;
  try {
    SynthesisOptions options;
    options.threads = config_.threads;
    const bool singular =
        report_.classification == Resonance::second_kind || report_.classification == Resonance::third_kind;
    if (singular) {
      if (!leading_) leading_ = singular_leading_terms(*chain_, *T_, *space_, config_.expansion_lambdas);
      options.leading = &*leading_;
    }
    const ObservationSet obs = default_observation(*grid_, true);
    const SpectralPlan plan = build_spectral_plan(config_.spectral, oscillation_length(*space_, obs));
    check_plan(plan);
    note("synthesizing " + std::to_string(config_.kinds.size()) + " kernel(s) on " +
         std::to_string(plan.node_count()) + " spectral nodes at " + std::to_string(config_.times.size()) +
         " times");
    kernels_ = synthesize_kernels(config_.kinds, config_.times, plan, *space_, obs, options);
    for (const auto& ek : kernels_) traces_[ek.kind];
  } catch (const Error& e) {
    evolve_error_ = std::string("evolution failed: ") + error_code_name(e.code()) + " error: " + e.what();
    errors_.push_back(evolve_error_);
  }
}

void Experiment::decay_stage() {
  const Resonance cls = report_.classification;
  if (enabled(CheckKind::main_decay)) {
    CheckRecord& rec = record(CheckKind::main_decay);
    if (cls != Resonance::regular && cls != Resonance::first_kind) {
      rec.skip(std::string("the t^-1/2 rate needs a regular point or an s-wave resonance, classification is ") +
               resonance_name(cls));
    } else if (!evolve_error_.empty()) {
      rec.error(evolve_error_);
    } else {
      for (const auto& ek : kernels_) {
        const std::string kind = operator_kind_name(ek.kind);
        try {
          const DecayFit fit = fit_unweighted_decay(ek, config_.main_range[0], config_.main_range[1]);
          if (cls == Resonance::regular)
            rec.at_most(kind + "_exponent", fit.exponent, kRegularExponent);
          else
            rec.metric(kind + "_exponent_deviation", std::abs(fit.exponent + 0.5), "<=", kFreeExponentBand,
                       std::abs(fit.exponent + 0.5) <= kFreeExponentBand);
          rec.details[kind] = fit_json(fit);
          auto& trace = traces_[ek.kind].power_fit;
          for (double t : ek.times) trace.push_back(fit.constant * std::pow(t, fit.exponent));
        } catch (const Error& e) {
          rec.error(kind + ": " + e.what());
        }
      }
    }
  }
  if (enabled(CheckKind::weighted_decay)) {
    CheckRecord& rec = record(CheckKind::weighted_decay);
    if (cls != Resonance::regular) {
      rec.skip(std::string("the weighted estimate needs a regular point, classification is ") + resonance_name(cls));
    } else if (!evolve_error_.empty()) {
      rec.error(evolve_error_);
    } else {
      for (const auto& ek : kernels_) {
        const std::string kind = operator_kind_name(ek.kind);
        try {
          const DecayFit fit = fit_weighted_decay(ek, cls, config_.sigma, config_.weighted_range[0],
                                                  config_.weighted_range[1]);
          // The sine kernel meets the rate with equality; the cosine kernel
          // decays faster, so for it the rate is tested as an upper bound.
          if (ek.kind == OperatorKind::sine) {
            rec.at_most(kind + "_log_ratio", fit.ratio, kWeightedRatio);
          } else {
            double peak = 0.0;
            double first = 0.0;
            for (std::size_t i = 0; i < fit.t_values.size(); ++i) {
              const double lt = std::log(fit.t_values[i]);
              const double scaled = fit.norms[i] * fit.t_values[i] * lt * lt;
              if (i == 0) first = scaled;
              peak = std::max(peak, scaled);
            }
            rec.at_most(kind + "_log_bound_ratio", peak / first, kWeightedRatio);
            rec.details[kind + "_log_ratio"] = fit.ratio;
          }
          rec.at_most(kind + "_fallback_exponent", fit.exponent, kWeightedFallbackExponent);
          const DecayFit plain = fit_unweighted_decay(ek, fit.t_values.front(), fit.t_values.back());
          rec.metric(kind + "_unweighted_exponent", plain.exponent, ">", fit.exponent, plain.exponent > fit.exponent);
          rec.details[kind] = fit_json(fit);
          rec.details[kind + "_unweighted"] = fit_json(plain);
          auto& trace = traces_[ek.kind].power_log2_fit;
          for (double t : ek.times) {
            const double lt = std::log(t);
            trace.push_back(t >= 2.0 ? fit.constant / (t * lt * lt) : std::nan(""));
          }
        } catch (const Error& e) {
          rec.error(kind + ": " + e.what());
        }
      }
    }
  }
}

void Experiment::nonregular_stage() {
  if (!enabled(CheckKind::nonregular)) return;
  CheckRecord& rec = record(CheckKind::nonregular);
  if (report_.classification == Resonance::regular) {
    rec.skip("zero is a regular point; the non-regular taxonomy does not apply");
    return;
  }
  if (!evolve_error_.empty()) {
    rec.error(evolve_error_);
    return;
  }
  try {
    const NonregularReport nr = nonregular_decay_report(kernels_, report_);
    for (const DecayCheck& c : nr.checks) {
      if (nr.classification == Resonance::first_kind)
        rec.metric(c.name + "_deviation", std::abs(c.value + 0.5), "<=", c.limit, c.passed);
      else
        rec.metric(c.name, c.value, "<=", c.limit, c.passed);
    }
    json fits = json::array();
    for (const DecayFit& f : nr.fits) fits.push_back(fit_json(f));
    rec.details["fits"] = fits;
  } catch (const Error& e) {
    rec.error(std::string(error_code_name(e.code())) + " error: " + e.what());
  }
}

void Experiment::oracle_stage() {
  if (!enabled(CheckKind::oracle_compare)) return;
  CheckRecord& rec = record(CheckKind::oracle_compare);
  if (report_.classification != Resonance::regular && !space_->free_case()) {
    rec.skip(std::string("the box oracle does not resolve a threshold resonance, classification is ") +
             resonance_name(report_.classification));
    return;
  }
  try {
    const auto& os = config_.oracle;
    const double width = os.data_width;
    const auto data = [width](const Point& p) { return std::exp(-(p.x * p.x + p.y * p.y) / (2.0 * width * width)); };
    ObservationSet obs = default_observation(*grid_, false);
    obs.data.resize(grid_->size());
    for (int k = 0; k < grid_->size(); ++k) obs.data[k] = data(grid_->point(k));
    const SpectralPlan plan = build_spectral_plan(config_.spectral, oscillation_length(*space_, obs));
    check_plan(plan);
    SynthesisOptions options;
    options.threads = config_.threads;
    note("synthesizing against data at " + std::to_string(os.times.size()) + " oracle times");
    const auto kernels = synthesize_kernels(config_.kinds, os.times, plan, *space_, obs, options);

    note("diagonalizing the box Hamiltonian");
    const DiscreteHamiltonian H(spec_, os.box);
    rec.details["oracle_dimension"] = H.eigenvalues().size();
    rec.details["bound_states_removed"] = H.negative_count();
    rec.details["validity_horizon"] = H.validity_horizon();
    Eigen::VectorXd f(H.lattice().size());
    for (int k = 0; k < f.size(); ++k) f[k] = data(H.lattice().point(k));
    const Grid& lattice = H.lattice();
    const auto lattice_index = [&](const Point& p) {
      const long c = std::lround((p.x + lattice.half_width()) / lattice.spacing());
      const long r = std::lround((p.y + lattice.half_width()) / lattice.spacing());
      if (c < 0 || r < 0 || c >= lattice.n_per_axis() || r >= lattice.n_per_axis() ||
          distance(lattice.point(lattice.index(static_cast<int>(c), static_cast<int>(r))), p) > 1e-9)
        fail(ErrorCode::configuration, "oracle lattice does not contain the observation points");
      return lattice.index(static_cast<int>(c), static_cast<int>(r));
    };

    for (const auto& ek : kernels) {
      const std::string kind = operator_kind_name(ek.kind);
      PropagatorOptions po;
      po.alpha = ek.regularizer_alpha;
      po.Lambda_max = config_.spectral.Lambda_max;
      double worst = 0.0;
      for (std::size_t ti = 0; ti < os.times.size(); ++ti) {
        const auto oracle = discrete_propagator(ek.kind, os.times[ti], H, f, po);
        double err = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < ek.points.size(); ++i) {
          const double u = oracle.u[lattice_index(ek.points[i])];
          err = std::max(err, std::abs(ek.applied[ti][i] - u));
          ref = std::max(ref, std::abs(u));
        }
        worst = std::max(worst, err / ref);
        oracle_rows_.push_back({{"comparison", "oracle"}, {"kind", kind}, {"t", os.times[ti]}, {"error", err / ref}});
      }
      rec.at_most(kind + "_oracle_relative_error", worst, kOracleTolerance);
    }

    if (space_->free_case()) {
      note("comparing with the closed-form free propagator");
      SynthesisOptions plain = options;
      plain.alpha = 0.0;
      const auto ek = synthesize_kernel(OperatorKind::sine, os.times, plan, *space_, obs, plain);
      double worst = 0.0;
      for (std::size_t ti = 0; ti < os.times.size(); ++ti) {
        double err = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < ek.points.size(); ++i) {
          const double exact = smeared_free_sine(os.times[ti], ek.points[i], data, 8.0 * width);
          err = std::max(err, std::abs(ek.applied[ti][i] - exact));
          ref = std::max(ref, std::abs(exact));
        }
        worst = std::max(worst, err / ref);
        oracle_rows_.push_back(
            {{"comparison", "closed_form"}, {"kind", "sine"}, {"t", os.times[ti]}, {"error", err / ref}});
      }
      rec.at_most("sine_closed_form_relative_error", worst, kClosedFormTolerance);
    }
  } catch (const Error& e) {
    rec.error(std::string(error_code_name(e.code())) + " error: " + e.what());
  }
}

json Experiment::resonance_json() const {
  json out;
  out["classification"] = resonance_name(report_.classification);
  out["potential"] = potential_json(spec_);
  out["tuned_sector"] = config_.tune_sector ? json(config_.tune_sector->name()) : json(nullptr);
  out["grid"] = {{"n_per_axis", config_.n_per_axis}, {"L_box", config_.L_box}};
  out["free_case"] = report_.free_case;
  out["threshold"] = report_.threshold;
  out["low_confidence"] = report_.low_confidence;
  out["ranks"] = {report_.ranks[0], report_.ranks[1], report_.ranks[2]};
  out["sigma_min"] = {report_.sigma_min[0], report_.sigma_min[1], report_.sigma_min[2]};
  out["scale"] = {report_.scale[0], report_.scale[1], report_.scale[2]};
  json functions = json::array();
  for (const auto& rf : report_.resonance_functions)
    functions.push_back({{"c0", rf.c0}, {"c1", rf.c1}, {"c2", rf.c2}, {"remainder", rf.remainder}});
  out["resonance_functions"] = functions;
  if (refined_) out["refined_classification"] = resonance_name(*refined_);
  return out;
}

json Experiment::report_json() const {
  json out;
  out["experiment"] = config_.name;
  out["mode"] = run_mode_name(mode_);
  out["potential"] = potential_json(spec_);
  out["classification"] = resonance_name(report_.classification);
  json checks = json::array();
  bool passed = errors_.empty();
  for (const auto& [kind, rec] : records_) {
    json c;
    c["check"] = check_kind_name(kind);
    c["status"] = check_status_name(rec.status);
    if (!rec.reason.empty()) c["reason"] = rec.reason;
    c["metrics"] = rec.metrics;
    c["details"] = rec.details;
    checks.push_back(c);
    passed = passed && rec.status != CheckStatus::fail;
  }
  out["passed"] = passed;
  out["checks"] = checks;
  if (!kernels_.empty()) {
    json diag = json::array();
    for (const auto& ek : kernels_)
      diag.push_back({{"kind", operator_kind_name(ek.kind)},
                      {"regularizer_alpha", ek.regularizer_alpha},
                      {"nodes", ek.nodes},
                      {"tail_estimate", ek.tail_estimate},
                      {"low_tail_bound", ek.low_tail_bound},
                      {"envelope_at_cutoff", ek.envelope_at_cutoff},
                      {"max_imag", ek.max_imag},
                      {"max_asymmetry", ek.max_asymmetry}});
    out["synthesis"] = diag;
  }
  out["warnings"] = warnings_;
  out["errors"] = errors_;
  out["tolerances"] = "all limits are artifact choices; the bounds they test have unspecified constants";
  // The thread count changes the schedule, not the results.
  json echoed = json::parse(config_to_json(config_));
  echoed.erase("threads");
  out["config"] = echoed;
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text, RunResult& result) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  result.files.push_back(path);
}

void Experiment::write_traces(const std::filesystem::path& dir, RunResult& result) const {
  const auto cell = [](const std::vector<double>& v, std::size_t i) {
    return i < v.size() && std::isfinite(v[i]) ? format_number(v[i]) : std::string();
  };
  for (const auto& ek : kernels_) {
    const Trace& trace = traces_.at(ek.kind);
    const auto sup = ek.sup_norms();
    const auto weighted = ek.weighted_sup_norms(config_.sigma);
    const auto remainder = ek.leading_kernels.empty() ? std::vector<double>{} : ek.remainder_sup_norms();
    std::ostringstream csv;
    csv << "t,sup_norm,weighted_sup_norm,remainder_sup_norm,power_fit,power_log2_fit\n";
    for (std::size_t i = 0; i < ek.times.size(); ++i) {
      csv << format_number(ek.times[i]) << ',' << format_number(sup[i]) << ',' << format_number(weighted[i]) << ','
          << cell(remainder, i) << ',' << cell(trace.power_fit, i) << ',' << cell(trace.power_log2_fit, i) << '\n';
    }
    write_file(dir / (std::string("trace_") + operator_kind_name(ek.kind) + ".csv"), csv.str(), result);
  }
  if (!oracle_rows_.empty()) {
    std::ostringstream csv;
    csv << "comparison,kind,t,relative_error\n";
    for (const auto& row : oracle_rows_)
      csv << row["comparison"].get<std::string>() << ',' << row["kind"].get<std::string>() << ','
          << format_number(row["t"].get<double>()) << ',' << format_number(row["error"].get<double>()) << '\n';
    write_file(dir / "trace_oracle.csv", csv.str(), result);
  }
}

RunResult Experiment::run(const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    fail(ErrorCode::io, "cannot create output directory " + out_dir.string());

  prepare();
  classify_stage();
  expansion_stage();
  evolve_stage();
  decay_stage();
  nonregular_stage();
  oracle_stage();

  RunResult result;
  for (const auto& [kind, rec] : records_) result.checks.push_back({kind, rec.status, rec.reason});
  result.warnings = warnings_;
  result.report_json = report_json().dump(2) + "\n";
  result.resonance_json = resonance_json().dump(2) + "\n";
  result.errors = errors_;
  write_file(out_dir / "report.json", result.report_json, result);
  write_file(out_dir / "resonance.json", result.resonance_json, result);
  write_traces(out_dir, result);
  return result;
}

}  // namespace

const char* check_kind_name(CheckKind kind) {
  switch (kind) {
    case CheckKind::classify:
      return "classify";
    case CheckKind::expansion_validate:
      return "expansion_validate";
    case CheckKind::main_decay:
      return "main_decay";
    case CheckKind::weighted_decay:
      return "weighted_decay";
    case CheckKind::nonregular:
      return "nonregular";
    case CheckKind::oracle_compare:
      return "oracle_compare";
  }
  return "unknown";
}

CheckKind parse_check_kind(const std::string& name) {
  for (CheckKind kind : kCheckOrder)
    if (name == check_kind_name(kind)) return kind;
  fail(ErrorCode::configuration, "unknown check '" + name + "'");
}

const char* run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::run:
      return "run";
    case RunMode::classify:
      return "classify";
    case RunMode::evolve:
      return "evolve";
    case RunMode::decay_fit:
      return "decay-fit";
    case RunMode::validate:
      return "validate";
  }
  return "unknown";
}

const char* check_status_name(CheckStatus status) {
  switch (status) {
    case CheckStatus::pass:
      return "pass";
    case CheckStatus::fail:
      return "fail";
    case CheckStatus::skip:
      return "skip";
  }
  return "unknown";
}

ExperimentConfig::ExperimentConfig()
    : times(log_spaced(1.0, 200.0, 24)), expansion_lambdas(log_spaced(1e-4, kDefaultLambda1, 12)) {}

bool ExperimentConfig::wants(CheckKind kind) const { return std::ranges::find(checks, kind) != checks.end(); }

bool RunResult::passed() const {
  return errors.empty() &&
         std::ranges::none_of(checks, [](const CheckOutcome& c) { return c.status == CheckStatus::fail; });
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse, std::string("config is not valid JSON: ") + e.what());
  }
  const Reader r(root, "config");
  r.allow({"name", "potential", "grid", "spectral", "times", "operator_kinds", "checks", "classification", "decay",
           "expansion", "oracle", "threads"});
  ExperimentConfig c;
  r.read("name", c.name);
  if (r.has("potential")) c.potential = parse_potential(r.at("potential"), c.tune_sector);
  if (r.has("grid")) {
    const Reader g(r.at("grid"), "grid");
    g.allow({"n_per_axis", "L_box"});
    g.read("n_per_axis", c.n_per_axis);
    g.read("L_box", c.L_box);
  }
  require(c.n_per_axis >= 8, "grid.n_per_axis must be at least 8");
  require(c.L_box > 0.0, "grid.L_box must be positive");
  if (r.has("spectral")) {
    const Reader s(r.at("spectral"), "spectral");
    s.allow({"lambda_min", "lambda_1", "Lambda_max", "epsilon", "tail_tolerance", "node_counts"});
    auto& p = c.spectral;
    s.read("lambda_min", p.lambda_min);
    s.read("lambda_1", p.lambda_1);
    s.read("Lambda_max", p.Lambda_max);
    s.read("epsilon", p.epsilon);
    s.read("tail_tolerance", p.tail_tolerance);
    if (s.has("node_counts")) {
      const Reader n(s.at("node_counts"), "spectral.node_counts");
      n.allow({"order", "refinement", "nodes_per_period", "low_ratio", "high_width"});
      n.read("order", p.order);
      n.read("refinement", p.refinement);
      n.read("nodes_per_period", p.nodes_per_period);
      n.read("low_ratio", p.low_ratio);
      n.read("high_width", p.high_width);
    }
  }
  require(c.spectral.lambda_min > 0.0 && c.spectral.lambda_min < c.spectral.lambda_1 &&
              c.spectral.lambda_1 < c.spectral.Lambda_max,
          "spectral: need 0 < lambda_min < lambda_1 < Lambda_max");
  require(c.spectral.epsilon > 0.0, "spectral.epsilon must be positive");
  if (r.has("times")) c.times = parse_samples(r.at("times"), "times");
  if (r.has("operator_kinds")) {
    std::vector<std::string> names;
    r.read("operator_kinds", names);
    c.kinds.clear();
    for (const auto& n : names) {
      const OperatorKind k = parse_operator_kind(n);
      require(std::ranges::find(c.kinds, k) == c.kinds.end(), "operator_kinds: '" + n + "' listed twice");
      c.kinds.push_back(k);
    }
    require(!c.kinds.empty(), "operator_kinds must not be empty");
    std::ranges::sort(c.kinds);
  }
  if (r.has("checks")) {
    std::vector<std::string> names;
    r.read("checks", names);
    std::set<CheckKind> chosen;
    for (const auto& n : names) chosen.insert(parse_check_kind(n));
    c.checks.clear();
    for (CheckKind k : kCheckOrder)
      if (chosen.count(k)) c.checks.push_back(k);
  }
  if (r.has("classification")) {
    const Reader s(r.at("classification"), "classification");
    s.allow({"expected", "null_threshold", "refinement_check"});
    if (s.has("expected")) {
      std::string expected;
      s.read("expected", expected);
      c.expected = parse_resonance(expected);
    }
    s.read("null_threshold", c.null_threshold);
    s.read("refinement_check", c.refinement_check);
    require(c.null_threshold > 0.0 && c.null_threshold < 1.0, "classification.null_threshold must lie in (0, 1)");
  }
  if (r.has("decay")) {
    const Reader s(r.at("decay"), "decay");
    s.allow({"sigma", "main_range", "weighted_range"});
    s.read("sigma", c.sigma);
    c.main_range = parse_range(s, "main_range", c.main_range);
    c.weighted_range = parse_range(s, "weighted_range", c.weighted_range);
    require(c.sigma > 0.0, "decay.sigma must be positive");
  }
  if (r.has("expansion")) {
    const Reader s(r.at("expansion"), "expansion");
    s.allow({"lambdas"});
    if (s.has("lambdas")) c.expansion_lambdas = parse_samples(s.at("lambdas"), "expansion.lambdas");
    require(c.expansion_lambdas.front() > 0.0, "expansion.lambdas must be positive");
  }
  if (r.has("oracle")) {
    const Reader s(r.at("oracle"), "oracle");
    s.allow({"half_width", "spacing", "sector", "data_radius", "data_width", "times"});
    auto& o = c.oracle;
    s.read("half_width", o.box.half_width);
    s.read("spacing", o.box.spacing);
    s.read("data_radius", o.box.data_radius);
    s.read("data_width", o.data_width);
    if (s.has("sector")) {
      std::string sector;
      s.read("sector", sector);
      o.box.sector = parse_parity(sector);
    } else if (r.at("oracle").contains("sector")) {
      o.box.sector.reset();
    }
    if (s.has("times")) o.times = parse_samples(s.at("times"), "oracle.times");
    require(o.box.half_width > 0.0 && o.box.spacing > 0.0 && o.data_width > 0.0,
            "oracle: half_width, spacing and data_width must be positive");
  }
  require(!c.oracle.box.sector || !c.wants(CheckKind::oracle_compare) || is_centred_radial(c.potential),
          "oracle.sector needs a potential centred at the origin; set it to null for off-centre potentials");
  r.read("threads", c.threads);
  require(c.threads >= 1, "threads must be at least 1");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string potential_to_json(const PotentialSpec& spec) { return potential_json(spec).dump(); }

PotentialRequest parse_potential_request(const std::string& json_text) {
  json node;
  try {
    node = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse, std::string("potential is not valid JSON: ") + e.what());
  }
  PotentialRequest request;
  request.spec = parse_potential(node, request.tune_sector);
  return request;
}

std::string config_to_json(const ExperimentConfig& c) {
  json out;
  out["name"] = c.name;
  json potential = potential_json(c.potential);
  if (c.tune_sector) potential["tune_to_threshold"] = c.tune_sector->name();
  out["potential"] = potential;
  out["grid"] = {{"n_per_axis", c.n_per_axis}, {"L_box", c.L_box}};
  const auto& p = c.spectral;
  out["spectral"] = {{"lambda_min", p.lambda_min},
                     {"lambda_1", p.lambda_1},
                     {"Lambda_max", p.Lambda_max},
                     {"epsilon", p.epsilon},
                     {"tail_tolerance", p.tail_tolerance},
                     {"node_counts",
                      {{"order", p.order},
                       {"refinement", p.refinement},
                       {"nodes_per_period", p.nodes_per_period},
                       {"low_ratio", p.low_ratio},
                       {"high_width", p.high_width}}}};
  out["times"] = to_json(c.times);
  json kinds = json::array();
  for (OperatorKind k : c.kinds) kinds.push_back(operator_kind_name(k));
  out["operator_kinds"] = kinds;
  json checks = json::array();
  for (CheckKind k : c.checks) checks.push_back(check_kind_name(k));
  out["checks"] = checks;
  out["classification"] = {{"expected", c.expected ? json(resonance_name(*c.expected)) : json(nullptr)},
                           {"null_threshold", c.null_threshold},
                           {"refinement_check", c.refinement_check}};
  out["decay"] = {{"sigma", c.sigma},
                  {"main_range", {c.main_range[0], c.main_range[1]}},
                  {"weighted_range", {c.weighted_range[0], c.weighted_range[1]}}};
  out["expansion"] = {{"lambdas", to_json(c.expansion_lambdas)}};
  const auto& o = c.oracle;
  out["oracle"] = {{"half_width", o.box.half_width},
                   {"spacing", o.box.spacing},
                   {"sector", o.box.sector ? json(o.box.sector->name()) : json(nullptr)},
                   {"data_radius", o.box.data_radius},
                   {"data_width", o.data_width},
                   {"times", to_json(o.times)}};
  out["threads"] = c.threads;
  return out.dump(2);
}

RunResult run_experiment(const ExperimentConfig& config, RunMode mode, const std::filesystem::path& out_dir,
                         const ProgressLog& log) {
  return Experiment(config, mode, log).run(out_dir);
}

}  // namespace wavedisp
