// Runs the acceptance criteria end to end and prints one PASS/FAIL line each.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracle_bessel.hpp"
#include "oracle_radial.hpp"
#include "wavedisp/freeres.hpp"
#include "wavedisp/oracle.hpp"
#include "wavedisp/pipeline.hpp"
#include "wavedisp/specfun.hpp"
#include "wavedisp/symmetry.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace wavedisp;

namespace {

struct Verdict {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what, double value) {
    passed = passed && ok;
    if (!detail.empty()) detail += ", ";
    detail += what + " " + to_scientific(value) + (ok ? "" : " (FAILED)");
  }
  void require(bool ok, const std::string& what) {
    passed = passed && ok;
    if (!detail.empty()) detail += ", ";
    detail += what + (ok ? "" : " (FAILED)");
  }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

struct Run {
  fs::path dir;
  RunResult result;
  json report;

  const json& check(const std::string& name) const {
    for (const auto& c : report.at("checks"))
      if (c.at("check") == name) return c;
    throw std::runtime_error("check not run: " + name);
  }
  const json& metric(const std::string& check_name, const std::string& metric_name) const {
    for (const auto& m : check(check_name).at("metrics"))
      if (m.at("name") == metric_name) return m;
    throw std::runtime_error("metric not reported: " + check_name + "." + metric_name);
  }
  double value(const std::string& check_name, const std::string& metric_name) const {
    return metric(check_name, metric_name).at("value").get<double>();
  }
};

Run run(const std::string& config_json, const fs::path& dir, RunMode mode = RunMode::run) {
  fs::remove_all(dir);
  const ExperimentConfig config = parse_config(config_json);
  std::fprintf(stderr, "running %s in %s\n", config.name.c_str(), dir.c_str());
  Run r{dir, run_experiment(config, mode, dir), {}};
  r.report = json::parse(r.result.report_json);
  return r;
}

// Metric-by-metric verdict of one pipeline check.
void require_check(Verdict& v, const Run& r, const std::string& check_name, const std::string& label) {
  const json& c = r.check(check_name);
  for (const auto& m : c.at("metrics")) {
    const std::string what = label + " " + m.at("name").get<std::string>();
    if (m.at("value").is_number())
      v.require(m.at("passed").get<bool>(), what, m.at("value").get<double>());
    else
      v.require(m.at("passed").get<bool>(), what);
  }
  v.require(c.at("status") == "pass", label + " " + check_name + " " + c.at("status").get<std::string>());
}

Verdict special_functions() {
  Verdict v;
  double worst = 0.0;
  for (double z = 1e-6; z <= 1e4; z *= 1.01) {
    const auto [j, y] = specfun::bessel_j0_y0(z);
    worst = std::max(worst, std::abs(j - reference::j0(z)));
    worst = std::max(worst, std::abs(y - reference::y0(z)) / std::max(1.0, std::abs(reference::y0(z))));
  }
  v.require(worst <= 1e-12, "max J0/Y0 deviation from the 50-digit reference", worst);
  double wronskian = 0.0;
  for (double z = 1e-3; z <= 1e4; z *= 1.1) {
    // Central differences with the step capped where the functions oscillate.
    const double d = 1e-5 * std::min(z, 1.0);
    const double dj = (specfun::bessel_j0(z + d) - specfun::bessel_j0(z - d)) / (2 * d);
    const double dy = (specfun::bessel_y0(z + d) - specfun::bessel_y0(z - d)) / (2 * d);
    const double expected = 2.0 / (specfun::kPi * z);
    wronskian = std::max(wronskian,
                         std::abs(specfun::bessel_j0(z) * dy - dj * specfun::bessel_y0(z) - expected) / expected);
  }
  v.require(wronskian <= 1e-6, "Wronskian relative error", wronskian);
  return v;
}

Verdict free_resolvent_identities(const Run& barrier) {
  Verdict v;
  const auto g = build_grid(17, 4.0);
  double worst = 0.0;
  for (double lambda : log_spaced(1e-4, 10.0, 20)) {
    const auto Rp = free_resolvent(lambda, Sign::plus, g);
    const auto Rm = free_resolvent(lambda, Sign::minus, g);
    for (int j = 0; j < g->size(); ++j)
      for (int i = 0; i < g->size(); ++i) {
        const std::complex<double> expected(0.0, 0.5 * specfun::bessel_j0(lambda * distance(g->point(i), g->point(j))));
        worst = std::max(worst, std::abs(Rp.matrix()(i, j) - Rm.matrix()(i, j) - expected));
      }
  }
  v.require(worst <= 1e-14, "max |R0+ - R0- - (i/2) J0| over 20 lambdas", worst);
  v.require(barrier.metric("expansion_validate", "E0_envelope_constant").at("passed").get<bool>(),
            "certified E0 envelope constant", barrier.value("expansion_validate", "E0_envelope_constant"));
  v.require(barrier.metric("expansion_validate", "E0_envelope_shrinks").at("passed").get<bool>(),
            "E0 envelope ratio shrinks as lambda -> 0");
  return v;
}

Verdict m_operator(const Run& barrier) {
  Verdict v;
  require_check(v, barrier, "expansion_validate", "barrier");
  return v;
}

Verdict taxonomy(const Run& zero, const Run& third, const fs::path& out) {
  Verdict v;
  v.require(zero.report.at("classification") == "FirstKind", "V = 0 is FirstKind");

  const Run weak = run(R"({"name": "weak_refined", "potential": "weak_well", "checks": ["classify"],
    "classification": {"expected": "Regular", "refinement_check": true}})",
                       out / "weak_well", RunMode::classify);
  const json weak_resonance = json::parse(weak.result.resonance_json);
  v.require(weak.result.passed() && weak_resonance.at("classification") == "Regular" &&
                weak_resonance.at("refined_classification") == "Regular",
            "weak well Regular on 33 and 49 points");

  // The discrete ground state crosses zero at the finite-difference threshold depth.
  const double ode = reference::ode_threshold(2, 10.0, 30.0);
  BoxSettings box;
  box.sector = parse_parity("B2");
  PotentialSpec profile;
  profile.family = PotentialFamily::gaussian_well;
  profile.amplitude = -1.0;
  const double coarse = fd_threshold_depth(profile, box, 5.0, 40.0);
  box.spacing = 0.125;
  const double fine = fd_threshold_depth(profile, box, 5.0, 40.0);
  const double fd = (4.0 * fine - coarse) / 3.0;
  v.require(std::abs(fd - ode) <= 1e-3 * ode, "extrapolated bisection depth vs radial threshold, relative",
            std::abs(fd - ode) / ode);

  std::vector<double> crossings;
  for (int n : {33, 49}) {
    const GridPtr g = build_grid(n, 8.0);
    const double at = classifier_threshold(profile, g, parse_parity("B2")).amplitude;
    crossings.push_back(at);
    bool bracketed = true;
    for (const auto& [factor, expected] :
         {std::pair{0.98, Resonance::regular}, std::pair{1.0, Resonance::third_kind}, std::pair{1.02, Resonance::regular}}) {
      PotentialSpec tuned = profile;
      tuned.amplitude = -factor * at;
      bracketed = bracketed && classify(BirmanSpace(sample_potential(tuned, g))).classification == expected;
    }
    v.require(bracketed, "ThirdKind at the " + std::to_string(n) + "-point crossing, Regular at +-2%");
  }
  // Second-order extrapolation in h = 16 / (n - 1).
  const double h2_coarse = 0.25, h2_fine = 1.0 / 9.0;
  const double extrapolated =
      (crossings[1] * h2_coarse - crossings[0] * h2_fine) / (h2_coarse - h2_fine);
  v.require(std::abs(extrapolated - ode) <= 0.02 * ode, "extrapolated classifier crossing vs radial threshold, relative",
            std::abs(extrapolated - ode) / ode);

  const json resonance = json::parse(read_file(third.dir / "resonance.json"));
  v.require(resonance.at("classification") == "ThirdKind" && resonance.contains("sigma_min") &&
                resonance.contains("ranks") && !resonance.at("resonance_functions").empty(),
            "tuned d-wave ThirdKind with serialized diagnostics");
  return v;
}

Verdict oracle_comparison(const Run& barrier, const Run& zero) {
  Verdict v;
  require_check(v, barrier, "oracle_compare", "barrier");
  require_check(v, zero, "oracle_compare", "free");
  return v;
}

Verdict main_decay(const Run& barrier, const Run& zero) {
  Verdict v;
  require_check(v, barrier, "main_decay", "barrier");
  require_check(v, zero, "main_decay", "free");
  return v;
}

Verdict weighted_decay(const Run& barrier) {
  Verdict v;
  require_check(v, barrier, "weighted_decay", "barrier");
  return v;
}

Verdict nonregular_decay(const Run& zero, const Run& third) {
  Verdict v;
  require_check(v, zero, "nonregular", "free");
  require_check(v, third, "classify", "d-wave");
  require_check(v, third, "expansion_validate", "d-wave");
  require_check(v, third, "nonregular", "d-wave");
  return v;
}

Verdict determinism(const Run& first, const Run& second) {
  Verdict v;
  int compared = 0;
  bool identical = true;
  for (const auto& entry : fs::directory_iterator(first.dir)) {
    const fs::path other = second.dir / entry.path().filename();
    identical = identical && fs::exists(other) && read_file(entry.path()) == read_file(other);
    ++compared;
  }
  v.require(identical && compared >= 5, "byte-identical outputs across runs with 1 and 2 threads, files",
            compared);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "wavedisp_acceptance";

  const char* kBarrier = R"({"name": "barrier", "potential": "barrier", "classification": {"expected": "Regular"}})";
  const Run barrier = run(kBarrier, out / "barrier");
  const Run zero = run(R"({"name": "free", "potential": "zero", "classification": {"expected": "FirstKind"}})",
                       out / "free");
  const Run third = run(R"({"name": "dwave_threshold",
    "potential": {"preset": "dwave_well", "tune_to_threshold": "B2"},
    "spectral": {"lambda_min": 1e-3},
    "expansion": {"lambdas": {"from": 1e-3, "to": 0.2, "count": 10}},
    "checks": ["classify", "expansion_validate", "nonregular"],
    "classification": {"expected": "ThirdKind"}})",
                        out / "dwave");
  std::string repeat = kBarrier;
  repeat.insert(repeat.size() - 1, R"(, "threads": 2)");
  const Run barrier_again = run(repeat, out / "barrier_again");

  const std::vector<std::pair<std::string, Verdict>> verdicts = {
      {"special functions", special_functions()},
      {"free resolvent identities", free_resolvent_identities(barrier)},
      {"M operator and its inverse expansion", m_operator(barrier)},
      {"resonance taxonomy", taxonomy(zero, third, out)},
      {"evolution vs oracles", oracle_comparison(barrier, zero)},
      {"main decay", main_decay(barrier, zero)},
      {"weighted decay", weighted_decay(barrier)},
      {"non-regular decay", nonregular_decay(zero, third)},
      {"determinism", determinism(barrier, barrier_again)},
  };
  int failures = 0;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& [title, v] = verdicts[i];
    std::printf("%s %zu %s: %s\n", v.passed ? "PASS" : "FAIL", i + 1, title.c_str(), v.detail.c_str());
    failures += v.passed ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
