#ifndef WAVEDISP_WAVEDISP_H
#define WAVEDISP_WAVEDISP_H

/* C interface of the wavedisp library. Every function returns a wd_status;
   on failure wd_last_error() describes the most recent error of the calling
   thread. Objects are opaque handles released with their *_free function. */

#include <stddef.h>

#if defined(_WIN32)
#define WD_API __declspec(dllexport)
#else
#define WD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wd_status {
  WD_OK = 0,
  WD_ERR_DOMAIN = 1,
  WD_ERR_CONFIGURATION = 2,
  WD_ERR_NEAR_SINGULAR = 3,
  WD_ERR_PRECONDITION = 4,
  WD_ERR_PLAN = 5,
  WD_ERR_TAIL = 6,
  WD_ERR_FIT = 7,
  WD_ERR_HORIZON = 8,
  WD_ERR_PARSE = 9,
  WD_ERR_IO = 10,
  WD_ERR_INTERNAL = 11,
  WD_ERR_ARGUMENT = 12
} wd_status;

typedef enum wd_resonance {
  WD_REGULAR = 0,
  WD_FIRST_KIND = 1,
  WD_SECOND_KIND = 2,
  WD_THIRD_KIND = 3
} wd_resonance;

typedef enum wd_operator_kind { WD_COSINE = 0, WD_SINE = 1 } wd_operator_kind;

typedef enum wd_mode {
  WD_MODE_RUN = 0,
  WD_MODE_CLASSIFY = 1,
  WD_MODE_EVOLVE = 2,
  WD_MODE_DECAY_FIT = 3,
  WD_MODE_VALIDATE = 4
} wd_mode;

WD_API const char* wd_version(void);
WD_API const char* wd_status_name(wd_status status);
WD_API const char* wd_resonance_name(wd_resonance resonance);
/* Message of the last failed call on this thread; empty after a success. */
WD_API const char* wd_last_error(void);

/* Bessel functions of order zero. */
WD_API wd_status wd_bessel_j0(double z, double* out);
WD_API wd_status wd_bessel_y0(double z, double* out);

/* Shipped potentials. Strings stay valid for the lifetime of the process. */
WD_API size_t wd_preset_count(void);
WD_API wd_status wd_preset_name(size_t index, const char** name);
WD_API wd_status wd_preset_json(size_t index, const char** json);

/* A potential sampled on the grid [-L, L]^2 with n points per axis. */
typedef struct wd_potential wd_potential;
WD_API wd_status wd_potential_from_preset(const char* preset, int n_per_axis, double half_width,
                                          wd_potential** out);
/* spec_json uses the "potential" object of an experiment configuration. */
WD_API wd_status wd_potential_from_json(const char* spec_json, int n_per_axis, double half_width,
                                        wd_potential** out);
WD_API void wd_potential_free(wd_potential* potential);
WD_API wd_status wd_potential_support_size(const wd_potential* potential, size_t* out);
WD_API wd_status wd_potential_classify(const wd_potential* potential, double null_threshold, wd_resonance* out);

/* Sampled wave kernel at a list of times, on the default observation set. */
typedef struct wd_kernel wd_kernel;
WD_API wd_status wd_kernel_synthesize(const wd_potential* potential, wd_operator_kind kind, const double* times,
                                      size_t time_count, int threads, wd_kernel** out);
WD_API void wd_kernel_free(wd_kernel* kernel);
WD_API wd_status wd_kernel_time_count(const wd_kernel* kernel, size_t* out);
/* Fill count values; count must equal the number of times. */
WD_API wd_status wd_kernel_sup_norms(const wd_kernel* kernel, double* out, size_t count);
WD_API wd_status wd_kernel_weighted_sup_norms(const wd_kernel* kernel, double sigma, double* out, size_t count);

/* Least-squares power law norms ~ constant * t^exponent. */
WD_API wd_status wd_fit_power(const double* t, const double* norms, size_t count, double* exponent,
                              double* constant, double* residual);

/* Experiments driven by a JSON configuration. */
typedef struct wd_experiment wd_experiment;
typedef void (*wd_log_fn)(const char* message, void* user);

WD_API wd_status wd_experiment_load(const char* config_path, wd_experiment** out);
WD_API wd_status wd_experiment_parse(const char* config_json, wd_experiment** out);
WD_API void wd_experiment_free(wd_experiment* experiment);
WD_API wd_status wd_experiment_set_threads(wd_experiment* experiment, int threads);
WD_API wd_status wd_experiment_set_logger(wd_experiment* experiment, wd_log_fn log, void* user);
/* Resolved configuration with every default filled in. */
WD_API wd_status wd_experiment_config_json(const wd_experiment* experiment, const char** json);
/* Writes report.json, resonance.json and trace_*.csv into out_dir. *passed is
   1 when no executed check failed. Failures inside checks still return WD_OK. */
WD_API wd_status wd_experiment_run(wd_experiment* experiment, wd_mode mode, const char* out_dir, int* passed);
/* Results of the last run; strings stay valid until the next run or free. */
WD_API wd_status wd_experiment_report(const wd_experiment* experiment, const char** json);
WD_API size_t wd_experiment_warning_count(const wd_experiment* experiment);
WD_API wd_status wd_experiment_warning(const wd_experiment* experiment, size_t index, const char** message);

#ifdef __cplusplus
}
#endif

#endif
