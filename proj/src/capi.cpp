#include "wavedisp/wavedisp.h"

#include <algorithm>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "wavedisp/decayfit.hpp"
#include "wavedisp/pipeline.hpp"
#include "wavedisp/specfun.hpp"
#include "wavedisp/symmetry.hpp"

struct wd_potential {
  wavedisp::BirmanSpace space;
};

struct wd_kernel {
  wavedisp::EvolutionKernel kernel;
};

struct wd_experiment {
  wavedisp::ExperimentConfig config;
  mutable std::string config_json;
  wd_log_fn log = nullptr;
  void* log_user = nullptr;
  std::string report;
  std::vector<std::string> warnings;
};

namespace {

thread_local std::string last_error;

wd_status fail_with(wd_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs body, translating exceptions into status codes and recording the message.
template <class Body>
wd_status guarded(Body&& body) {
  try {
    last_error.clear();
    body();
    return WD_OK;
  } catch (const wavedisp::Error& e) {
    return fail_with(static_cast<wd_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail_with(WD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail_with(WD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail_with(WD_ERR_INTERNAL, "unknown exception");
  }
}

struct PresetStrings {
  std::vector<std::string> names;
  std::vector<std::string> json;
};

const PresetStrings& preset_strings() {
  static const PresetStrings strings = [] {
    PresetStrings s;
    for (const auto& p : wavedisp::potential_presets()) {
      s.names.push_back(p.name);
      s.json.push_back(wavedisp::potential_to_json(p));
    }
    return s;
  }();
  return strings;
}

wd_status sampled_potential(const wavedisp::PotentialRequest& request, int n_per_axis, double half_width,
                            wd_potential** out) {
  return guarded([&] {
    const auto grid = wavedisp::build_grid(n_per_axis, half_width);
    const auto spec =
        request.tune_sector ? wavedisp::tune_to_threshold(request.spec, grid, *request.tune_sector) : request.spec;
    *out = new wd_potential{wavedisp::BirmanSpace(wavedisp::sample_potential(spec, grid))};
  });
}

}  // namespace

#define WD_REQUIRE(cond, what) \
  if (!(cond)) return fail_with(WD_ERR_ARGUMENT, what)

extern "C" {

const char* wd_version(void) { return "1.0.0"; }

const char* wd_status_name(wd_status status) {
  if (status == WD_OK) return "Ok";
  if (status == WD_ERR_ARGUMENT) return "ArgumentError";
  if (status >= WD_ERR_DOMAIN && status <= WD_ERR_INTERNAL)
    return wavedisp::error_code_name(static_cast<wavedisp::ErrorCode>(static_cast<int>(status)));
  return "UnknownStatus";
}

const char* wd_resonance_name(wd_resonance resonance) {
  if (resonance < WD_REGULAR || resonance > WD_THIRD_KIND) return "Unknown";
  return wavedisp::resonance_name(static_cast<wavedisp::Resonance>(static_cast<int>(resonance)));
}

const char* wd_last_error(void) { return last_error.c_str(); }

wd_status wd_bessel_j0(double z, double* out) {
  WD_REQUIRE(out, "out is null");
  return guarded([&] { *out = wavedisp::specfun::bessel_j0(z); });
}

wd_status wd_bessel_y0(double z, double* out) {
  WD_REQUIRE(out, "out is null");
  return guarded([&] { *out = wavedisp::specfun::bessel_y0(z); });
}

size_t wd_preset_count(void) { return preset_strings().names.size(); }

wd_status wd_preset_name(size_t index, const char** name) {
  WD_REQUIRE(name, "name is null");
  WD_REQUIRE(index < wd_preset_count(), "preset index out of range");
  *name = preset_strings().names[index].c_str();
  return WD_OK;
}

wd_status wd_preset_json(size_t index, const char** json) {
  WD_REQUIRE(json, "json is null");
  WD_REQUIRE(index < wd_preset_count(), "preset index out of range");
  *json = preset_strings().json[index].c_str();
  return WD_OK;
}

wd_status wd_potential_from_preset(const char* preset, int n_per_axis, double half_width, wd_potential** out) {
  WD_REQUIRE(preset && out, "preset and out must be non-null");
  wavedisp::PotentialRequest request;
  const wd_status s = guarded([&] { request.spec = wavedisp::find_preset(preset); });
  return s == WD_OK ? sampled_potential(request, n_per_axis, half_width, out) : s;
}

wd_status wd_potential_from_json(const char* spec_json, int n_per_axis, double half_width, wd_potential** out) {
  WD_REQUIRE(spec_json && out, "spec_json and out must be non-null");
  wavedisp::PotentialRequest request;
  const wd_status s = guarded([&] { request = wavedisp::parse_potential_request(spec_json); });
  return s == WD_OK ? sampled_potential(request, n_per_axis, half_width, out) : s;
}

void wd_potential_free(wd_potential* potential) { delete potential; }

wd_status wd_potential_support_size(const wd_potential* potential, size_t* out) {
  WD_REQUIRE(potential && out, "potential and out must be non-null");
  *out = potential->space.potential->support.size();
  return WD_OK;
}

wd_status wd_potential_classify(const wd_potential* potential, double null_threshold, wd_resonance* out) {
  WD_REQUIRE(potential && out, "potential and out must be non-null");
  WD_REQUIRE(null_threshold > 0.0 && null_threshold < 1.0, "null_threshold must lie in (0, 1)");
  return guarded([&] {
    *out = static_cast<wd_resonance>(
        static_cast<int>(wavedisp::classify(potential->space, null_threshold).classification));
  });
}

wd_status wd_kernel_synthesize(const wd_potential* potential, wd_operator_kind kind, const double* times,
                               size_t time_count, int threads, wd_kernel** out) {
  WD_REQUIRE(potential && times && out, "potential, times and out must be non-null");
  WD_REQUIRE(time_count > 0, "time_count must be positive");
  WD_REQUIRE(kind == WD_COSINE || kind == WD_SINE, "unknown operator kind");
  WD_REQUIRE(threads >= 1, "threads must be at least 1");
  return guarded([&] {
    const auto& space = potential->space;
    const auto obs = wavedisp::default_observation(space.grid(), true);
    const auto plan = wavedisp::build_spectral_plan({}, wavedisp::oscillation_length(space, obs));
    wavedisp::check_plan(plan);
    wavedisp::SynthesisOptions options;
    options.threads = threads;
    const auto op = kind == WD_COSINE ? wavedisp::OperatorKind::cosine : wavedisp::OperatorKind::sine;
    auto ek = wavedisp::synthesize_kernel(op, std::vector<double>(times, times + time_count), plan, space, obs,
                                          options);
    *out = new wd_kernel{std::move(ek)};
  });
}

void wd_kernel_free(wd_kernel* kernel) { delete kernel; }

wd_status wd_kernel_time_count(const wd_kernel* kernel, size_t* out) {
  WD_REQUIRE(kernel && out, "kernel and out must be non-null");
  *out = kernel->kernel.times.size();
  return WD_OK;
}

wd_status wd_kernel_sup_norms(const wd_kernel* kernel, double* out, size_t count) {
  WD_REQUIRE(kernel && out, "kernel and out must be non-null");
  WD_REQUIRE(count == kernel->kernel.times.size(), "count differs from the number of times");
  return guarded([&] {
    const auto norms = kernel->kernel.sup_norms();
    std::copy(norms.begin(), norms.end(), out);
  });
}

wd_status wd_kernel_weighted_sup_norms(const wd_kernel* kernel, double sigma, double* out, size_t count) {
  WD_REQUIRE(kernel && out, "kernel and out must be non-null");
  WD_REQUIRE(count == kernel->kernel.times.size(), "count differs from the number of times");
  WD_REQUIRE(sigma >= 0.0, "sigma must be nonnegative");
  return guarded([&] {
    const auto norms = kernel->kernel.weighted_sup_norms(sigma);
    std::copy(norms.begin(), norms.end(), out);
  });
}

wd_status wd_fit_power(const double* t, const double* norms, size_t count, double* exponent, double* constant,
                       double* residual) {
  WD_REQUIRE(t && norms && exponent && constant && residual, "arguments must be non-null");
  return guarded([&] {
    const auto fit = wavedisp::fit_power({t, count}, {norms, count});
    *exponent = fit.exponent;
    *constant = fit.constant;
    *residual = fit.residual;
  });
}

wd_status wd_experiment_load(const char* config_path, wd_experiment** out) {
  WD_REQUIRE(config_path && out, "config_path and out must be non-null");
  return guarded([&] {
    auto experiment = std::make_unique<wd_experiment>();
    experiment->config = wavedisp::load_config(config_path);
    *out = experiment.release();
  });
}

wd_status wd_experiment_parse(const char* config_json, wd_experiment** out) {
  WD_REQUIRE(config_json && out, "config_json and out must be non-null");
  return guarded([&] {
    auto experiment = std::make_unique<wd_experiment>();
    experiment->config = wavedisp::parse_config(config_json);
    *out = experiment.release();
  });
}

void wd_experiment_free(wd_experiment* experiment) { delete experiment; }

wd_status wd_experiment_set_threads(wd_experiment* experiment, int threads) {
  WD_REQUIRE(experiment, "experiment is null");
  WD_REQUIRE(threads >= 1, "threads must be at least 1");
  experiment->config.threads = threads;
  return WD_OK;
}

wd_status wd_experiment_set_logger(wd_experiment* experiment, wd_log_fn log, void* user) {
  WD_REQUIRE(experiment, "experiment is null");
  experiment->log = log;
  experiment->log_user = user;
  return WD_OK;
}

wd_status wd_experiment_config_json(const wd_experiment* experiment, const char** json) {
  WD_REQUIRE(experiment && json, "experiment and json must be non-null");
  return guarded([&] {
    experiment->config_json = wavedisp::config_to_json(experiment->config);
    *json = experiment->config_json.c_str();
  });
}

wd_status wd_experiment_run(wd_experiment* experiment, wd_mode mode, const char* out_dir, int* passed) {
  WD_REQUIRE(experiment && out_dir && passed, "experiment, out_dir and passed must be non-null");
  WD_REQUIRE(mode >= WD_MODE_RUN && mode <= WD_MODE_VALIDATE, "unknown mode");
  return guarded([&] {
    wavedisp::ProgressLog log;
    if (experiment->log)
      log = [experiment](const std::string& message) { experiment->log(message.c_str(), experiment->log_user); };
    const auto result = wavedisp::run_experiment(experiment->config,
                                                 static_cast<wavedisp::RunMode>(static_cast<int>(mode)), out_dir, log);
    experiment->report = result.report_json;
    experiment->warnings = result.warnings;
    *passed = result.passed() ? 1 : 0;
  });
}

wd_status wd_experiment_report(const wd_experiment* experiment, const char** json) {
  WD_REQUIRE(experiment && json, "experiment and json must be non-null");
  WD_REQUIRE(!experiment->report.empty(), "the experiment has not run");
  *json = experiment->report.c_str();
  return WD_OK;
}

size_t wd_experiment_warning_count(const wd_experiment* experiment) {
  return experiment ? experiment->warnings.size() : 0;
}

wd_status wd_experiment_warning(const wd_experiment* experiment, size_t index, const char** message) {
  WD_REQUIRE(experiment && message, "experiment and message must be non-null");
  WD_REQUIRE(index < experiment->warnings.size(), "warning index out of range");
  *message = experiment->warnings[index].c_str();
  return WD_OK;
}

}  // extern "C"
