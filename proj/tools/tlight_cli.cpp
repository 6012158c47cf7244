// tlight: run experiments, list built-in presets, compare CSV data files.
//
//   tlight run <config.json | preset-name>
//   tlight presets [--show NAME] [--write DIR]
//   tlight compare <empirical.csv> <analytic.csv> --metric tvd|maxabs|chisq --threshold X
//
// Exit status: 0 when every comparison passes, 1 when any fails, 2 on error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "presets.hpp"
#include "tlight/tlight.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kError = 2;

void print_report(const tlight::ComparisonReport& r) {
  std::cout << (r.pass ? "PASS " : "FAIL ") << r.label << "  [" << tlight::metric_name(r.metric)
            << " = " << r.value << ", threshold " << r.threshold << "]\n";
}

tlight::ExperimentConfig resolve_config(const std::string& what) {
  for (const auto& [name, body] : tlight::presets::all()) {
    if (name == what && !std::filesystem::exists(what)) {
      return tlight::parse_config(nlohmann::json::parse(body));
    }
  }
  return tlight::load_config(what);
}

int run(const std::string& what) {
  const auto config = resolve_config(what);
  const auto result = tlight::run_experiment(config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& r : result.reports) print_report(r);
  std::cout << "wrote " << result.files.size() << " file(s) to "
            << tlight::resolve_output_dir(config).string() << "\n";
  return result.all_pass() ? kPass : kFail;
}

int presets(const std::string& show, const std::string& write_dir) {
  if (!show.empty()) {
    for (const auto& [name, body] : tlight::presets::all()) {
      if (name == show) {
        std::cout << body;
        return kPass;
      }
    }
    std::cerr << "error: no preset named '" << show << "'\n";
    return kError;
  }
  if (!write_dir.empty()) {
    std::filesystem::create_directories(write_dir);
    for (const auto& [name, body] : tlight::presets::all()) {
      std::ofstream(std::filesystem::path(write_dir) / (std::string(name) + ".json")) << body;
    }
  }
  for (const auto& [name, body] : tlight::presets::all()) {
    const auto j = nlohmann::json::parse(body);
    std::cout << name << "\t" << j.value("experiment", "?") << "\n";
  }
  return kPass;
}

int compare(const std::string& a, const std::string& b, const std::string& metric,
            double threshold) {
  const auto report = tlight::compare(tlight::read_series_csv(a), tlight::read_series_csv(b),
                                      tlight::parse_metric(metric), threshold, a + " vs " + b);
  print_report(report);
  return report.pass ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tailored classical light: simulation and analytic reference curves"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tlight::kSoftwareVersion);

  std::string config;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a config file or preset name");
  run_cmd->add_option("config", config, "Config file (JSON) or built-in preset name")->required();

  std::string show;
  std::string write_dir;
  auto* presets_cmd = app.add_subcommand("presets", "List built-in presets");
  presets_cmd->add_option("--show", show, "Print one preset");
  presets_cmd->add_option("--write", write_dir, "Write all presets into a directory");

  std::string file_a;
  std::string file_b;
  std::string metric = "maxabs";
  double threshold = 0.0;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare an empirical and an analytic CSV");
  cmp_cmd->add_option("empirical", file_a, "Empirical CSV (first two columns used)")->required();
  cmp_cmd->add_option("analytic", file_b, "Analytic CSV (first two columns used)")->required();
  cmp_cmd->add_option("--metric", metric, "tvd | maxabs | chisq")
      ->check(CLI::IsMember({"tvd", "maxabs", "chisq"}));
  cmp_cmd->add_option("--threshold", threshold, "Pass if value < threshold")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kError;
  }

  try {
    if (run_cmd->parsed()) return run(config);
    if (presets_cmd->parsed()) return presets(show, write_dir);
    if (cmp_cmd->parsed()) return compare(file_a, file_b, metric, threshold);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
