#pragma once

// Batch experiment driver: a JSON configuration selects a potential, grid,
// spectral plan, times and checks; run_experiment executes the checks in
// dependency order and writes report.json, resonance.json and trace_*.csv.

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wavedisp/decayfit.hpp"
#include "wavedisp/oracle.hpp"

namespace wavedisp {

enum class CheckKind { classify, expansion_validate, main_decay, weighted_decay, nonregular, oracle_compare };
const char* check_kind_name(CheckKind kind);
CheckKind parse_check_kind(const std::string& name);

// Subcommands restrict a run to a subset of its checks.
enum class RunMode { run, classify, evolve, decay_fit, validate };
const char* run_mode_name(RunMode mode);

struct OracleCompareSettings {
  BoxSettings box;
  std::vector<double> times = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  double data_width = 1.5;
};

struct ExperimentConfig {
  std::string name = "experiment";
  PotentialSpec potential = find_preset("barrier");
  std::optional<Parity> tune_sector;
  int n_per_axis = 33;
  double L_box = 8.0;
  PlanSettings spectral;
  std::vector<double> times;
  std::vector<OperatorKind> kinds = {OperatorKind::cosine, OperatorKind::sine};
  std::vector<CheckKind> checks = {CheckKind::classify,       CheckKind::expansion_validate, CheckKind::main_decay,
                                   CheckKind::weighted_decay, CheckKind::nonregular,         CheckKind::oracle_compare};
  double null_threshold = kDefaultNullThreshold;
  std::optional<Resonance> expected;
  bool refinement_check = false;
  double sigma = 0.51;
  std::array<double, 2> main_range = {10.0, 200.0};
  std::array<double, 2> weighted_range = {5.0, 200.0};
  std::vector<double> expansion_lambdas;
  OracleCompareSettings oracle;
  int threads = 1;

  ExperimentConfig();
  bool wants(CheckKind kind) const;
};

// Throws parse errors for malformed JSON or unknown keys and configuration
// errors for values outside their domain. Every field has a default.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
// The resolved configuration, with every default filled in.
std::string config_to_json(const ExperimentConfig& config);

std::string potential_to_json(const PotentialSpec& spec);

// The "potential" entry of a configuration: a preset name or an object.
struct PotentialRequest {
  PotentialSpec spec;
  std::optional<Parity> tune_sector;
};
PotentialRequest parse_potential_request(const std::string& json_text);

enum class CheckStatus { pass, fail, skip };
const char* check_status_name(CheckStatus status);

struct CheckOutcome {
  CheckKind kind = CheckKind::classify;
  CheckStatus status = CheckStatus::skip;
  std::string reason;
};

struct RunResult {
  std::vector<CheckOutcome> checks;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;  // stage failures outside any check, e.g. a failed synthesis in evolve mode
  std::string report_json;
  std::string resonance_json;
  std::vector<std::filesystem::path> files;

  // True iff no executed check failed and no stage failed.
  bool passed() const;
};

using ProgressLog = std::function<void(const std::string&)>;

// Writes its artifacts into out_dir (created if missing). Failures inside a
// check are recorded as that check failing; configuration and I/O problems throw.
RunResult run_experiment(const ExperimentConfig& config, RunMode mode, const std::filesystem::path& out_dir,
                         const ProgressLog& log = {});

}  // namespace wavedisp
