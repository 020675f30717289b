/* Exercises the C interface from C. */

#include <math.h>
#include <stdio.h>
#include <string.h>

#include "wavedisp/wavedisp.h"

static int failures = 0;

#define EXPECT(cond)                                               \
  do {                                                             \
    if (!(cond)) {                                                 \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                  \
    }                                                              \
  } while (0)

static void test_basics(void) {
  double j0 = 0.0, y0 = 0.0;
  EXPECT(wd_bessel_j0(0.0, &j0) == WD_OK && j0 == 1.0);
  EXPECT(wd_bessel_y0(1.0, &y0) == WD_OK && fabs(y0 - 0.08825696421567696) < 1e-14);
  EXPECT(wd_bessel_y0(0.0, &y0) == WD_ERR_DOMAIN);
  EXPECT(strlen(wd_last_error()) > 0);
  EXPECT(wd_bessel_j0(1.0, NULL) == WD_ERR_ARGUMENT);
  EXPECT(strcmp(wd_status_name(WD_ERR_PARSE), "ParseError") == 0);
  EXPECT(strcmp(wd_resonance_name(WD_THIRD_KIND), "ThirdKind") == 0);
  EXPECT(strlen(wd_version()) > 0);

  EXPECT(wd_preset_count() >= 5);
  const char* name = NULL;
  const char* json = NULL;
  EXPECT(wd_preset_name(0, &name) == WD_OK && strcmp(name, "zero") == 0);
  EXPECT(wd_preset_json(1, &json) == WD_OK && strstr(json, "\"amplitude\"") != NULL);
  EXPECT(wd_preset_name(wd_preset_count(), &name) == WD_ERR_ARGUMENT);

  const double t[] = {10.0, 20.0, 40.0, 80.0};
  const double norms[] = {2.0 / sqrt(10.0), 2.0 / sqrt(20.0), 2.0 / sqrt(40.0), 2.0 / sqrt(80.0)};
  double exponent = 0.0, constant = 0.0, residual = 1.0;
  EXPECT(wd_fit_power(t, norms, 4, &exponent, &constant, &residual) == WD_OK);
  EXPECT(fabs(exponent + 0.5) < 1e-12 && fabs(constant - 2.0) < 1e-12 && residual < 1e-12);
}

static void test_potentials(void) {
  wd_potential* p = NULL;
  EXPECT(wd_potential_from_preset("no_such_preset", 17, 4.0, &p) == WD_ERR_CONFIGURATION);
  EXPECT(p == NULL);
  EXPECT(wd_potential_from_json("{\"family\": \"gaussian_well\", \"amplitude\": -0.3", 17, 4.0, &p) == WD_ERR_PARSE);
  EXPECT(wd_potential_from_preset("weak_well", 4, 4.0, &p) == WD_ERR_CONFIGURATION);

  wd_resonance r = WD_THIRD_KIND;
  size_t support = 0;
  EXPECT(wd_potential_from_preset("weak_well", 17, 4.0, &p) == WD_OK);
  EXPECT(wd_potential_support_size(p, &support) == WD_OK && support > 0);
  EXPECT(wd_potential_classify(p, 1e-6, &r) == WD_OK && r == WD_REGULAR);
  EXPECT(wd_potential_classify(p, 2.0, &r) == WD_ERR_ARGUMENT);
  wd_potential_free(p);

  EXPECT(wd_potential_from_json("{\"family\": \"gaussian_well\", \"tune_to_threshold\": \"B2\"}", 17, 4.0, &p) ==
         WD_OK);
  EXPECT(wd_potential_classify(p, 1e-6, &r) == WD_OK && r == WD_THIRD_KIND);
  wd_potential_free(p);

  EXPECT(wd_potential_from_preset("zero", 17, 4.0, &p) == WD_OK);
  EXPECT(wd_potential_classify(p, 1e-6, &r) == WD_OK && r == WD_FIRST_KIND);
  const double times[] = {1.0, 2.0, 4.0};
  wd_kernel* k = NULL;
  EXPECT(wd_kernel_synthesize(p, WD_SINE, times, 3, 1, &k) == WD_OK);
  size_t count = 0;
  double sup[3] = {0.0, 0.0, 0.0};
  double weighted[3] = {0.0, 0.0, 0.0};
  EXPECT(wd_kernel_time_count(k, &count) == WD_OK && count == 3);
  EXPECT(wd_kernel_sup_norms(k, sup, 3) == WD_OK);
  EXPECT(wd_kernel_weighted_sup_norms(k, 0.51, weighted, 3) == WD_OK);
  for (int i = 0; i < 3; ++i) EXPECT(sup[i] > 0.0 && weighted[i] > 0.0 && weighted[i] <= sup[i]);
  EXPECT(wd_kernel_sup_norms(k, sup, 2) == WD_ERR_ARGUMENT);
  wd_kernel_free(k);
  wd_potential_free(p);
}

static void test_experiment(const char* out_dir) {
  wd_experiment* e = NULL;
  EXPECT(wd_experiment_parse("{\"checks\": [\"classify\"], \"unknown\": 1}", &e) == WD_ERR_PARSE);
  EXPECT(strstr(wd_last_error(), "unknown") != NULL);
  EXPECT(wd_experiment_load("/nonexistent/config.json", &e) == WD_ERR_IO);

  EXPECT(wd_experiment_parse("{\"potential\": \"zero\", \"checks\": [\"classify\"]}", &e) == WD_OK);
  const char* json = NULL;
  EXPECT(wd_experiment_report(e, &json) == WD_ERR_ARGUMENT);
  EXPECT(wd_experiment_config_json(e, &json) == WD_OK && strstr(json, "\"n_per_axis\": 33") != NULL);
  EXPECT(wd_experiment_set_threads(e, 0) == WD_ERR_ARGUMENT);
  int passed = 0;
  EXPECT(wd_experiment_run(e, WD_MODE_CLASSIFY, out_dir, &passed) == WD_OK && passed == 1);
  EXPECT(wd_experiment_report(e, &json) == WD_OK && strstr(json, "\"FirstKind\"") != NULL);
  EXPECT(wd_experiment_warning_count(e) == 0);
  wd_experiment_free(e);
}

int main(int argc, char** argv) {
  test_basics();
  test_potentials();
  test_experiment(argc > 1 ? argv[1] : "wavedisp_capi_out");
  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("C interface: all checks passed\n");
  return failures ? 1 : 0;
}
