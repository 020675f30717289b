#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "wavedisp/wavedisp.h"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;

struct RunOptions {
  std::string config;
  std::string positional_config;
  std::string out_dir = "wavedisp_out";
  int threads = 0;
  bool verbose = false;
};

void log_to_stderr(const char* message, void*) { std::fprintf(stderr, "[wavedisp] %s\n", message); }

int report_error(const char* what) {
  std::fprintf(stderr, "error: %s: %s\n", what, wd_last_error());
  return kExitUsage;
}

void print_summary(const char* report_json) {
  const auto report = nlohmann::json::parse(report_json);
  std::printf("classification: %s\n", report.at("classification").get<std::string>().c_str());
  for (const auto& check : report.at("checks")) {
    std::printf("%-20s %s", check.at("check").get<std::string>().c_str(),
                check.at("status").get<std::string>().c_str());
    if (check.contains("reason")) std::printf("  (%s)", check.at("reason").get<std::string>().c_str());
    std::printf("\n");
    for (const auto& m : check.at("metrics")) {
      if (m.at("passed").get<bool>()) continue;
      std::printf("    failed %s = %s", m.at("name").get<std::string>().c_str(), m.at("value").dump().c_str());
      if (m.contains("limit"))
        std::printf(" (needs %s %s)", m.at("relation").get<std::string>().c_str(), m.at("limit").dump().c_str());
      std::printf("\n");
    }
  }
  for (const auto& e : report.at("errors")) std::printf("error: %s\n", e.get<std::string>().c_str());
}

int run_mode(wd_mode mode, const RunOptions& options) {
  const std::string& path = options.config.empty() ? options.positional_config : options.config;
  if (path.empty()) {
    std::fprintf(stderr, "error: a config file is required (positional or --config)\n");
    return kExitUsage;
  }
  if (!options.config.empty() && !options.positional_config.empty() && options.config != options.positional_config) {
    std::fprintf(stderr, "error: conflicting config paths '%s' and '%s'\n", options.positional_config.c_str(),
                 options.config.c_str());
    return kExitUsage;
  }
  wd_experiment* experiment = nullptr;
  if (wd_experiment_load(path.c_str(), &experiment) != WD_OK) return report_error("cannot load config");
  if (options.threads > 0 && wd_experiment_set_threads(experiment, options.threads) != WD_OK) {
    wd_experiment_free(experiment);
    return report_error("invalid thread count");
  }
  if (options.verbose) wd_experiment_set_logger(experiment, log_to_stderr, nullptr);

  int passed = 0;
  if (wd_experiment_run(experiment, mode, options.out_dir.c_str(), &passed) != WD_OK) {
    const int code = report_error("run failed");
    wd_experiment_free(experiment);
    return code;
  }
  for (size_t i = 0; i < wd_experiment_warning_count(experiment); ++i) {
    const char* message = nullptr;
    wd_experiment_warning(experiment, i, &message);
    std::fprintf(stderr, "warning: %s\n", message);
  }
  const char* report = nullptr;
  wd_experiment_report(experiment, &report);
  print_summary(report);
  std::printf("outputs written to %s\n", options.out_dir.c_str());
  wd_experiment_free(experiment);
  return passed ? kExitPass : kExitCheckFailure;
}

int list_presets() {
  for (size_t i = 0; i < wd_preset_count(); ++i) {
    const char* name = nullptr;
    const char* json = nullptr;
    wd_preset_name(i, &name);
    wd_preset_json(i, &json);
    std::printf("%-20s %s\n", name, json);
  }
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dispersive decay experiments for 2D wave equations with potentials"};
  app.set_version_flag("--version", wd_version());
  app.require_subcommand(1);

  RunOptions options;
  struct Mode {
    const char* name;
    const char* help;
    wd_mode mode;
  };
  const Mode modes[] = {
      {"run", "Run every requested check", WD_MODE_RUN},
      {"classify", "Classify the threshold behaviour", WD_MODE_CLASSIFY},
      {"evolve", "Synthesize the wave kernels and write the traces", WD_MODE_EVOLVE},
      {"decay-fit", "Synthesize the kernels and run the decay checks", WD_MODE_DECAY_FIT},
      {"validate", "Check M inverses, expansion envelopes and the oracle comparison", WD_MODE_VALIDATE},
  };
  wd_mode selected = WD_MODE_RUN;
  for (const Mode& m : modes) {
    CLI::App* sub = app.add_subcommand(m.name, m.help);
    sub->add_option("config-file", options.positional_config, "Experiment configuration (JSON)");
    sub->add_option("--config", options.config, "Experiment configuration (JSON)");
    sub->add_option("--out", options.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--threads", options.threads, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_flag("--verbose", options.verbose, "Log progress to stderr");
    sub->callback([&selected, mode = m.mode] { selected = mode; });
  }
  CLI::App* presets = app.add_subcommand("presets", "Shipped potentials");
  presets->require_subcommand(1);
  CLI::App* list = presets->add_subcommand("list", "List the shipped potentials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }
  if (list->parsed()) return list_presets();
  return run_mode(selected, options);
}
