// Command-line front end: run presets or config files, analyze run
// directories, print summaries.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "zkmrta/harness.hpp"
#include "zkmrta/reports.hpp"

namespace fs = std::filesystem;
using namespace zkmrta;

namespace {

fs::path default_out(const std::string& given, const std::string& name) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("ZKMRTA_OUT_DIR")) return fs::path(env) / name;
  return fs::path("out") / name;
}

void run_and_write(const ExperimentConfig& cfg, const fs::path& out, int workers, bool quiet) {
  RunSettings settings;
  settings.workers = workers;
  if (!quiet) {
    settings.progress = [](std::size_t done, std::size_t total) {
      std::fprintf(stderr, "\r%zu/%zu jobs", done, total);
      if (done == total) std::fprintf(stderr, "\n");
    };
  }
  const auto result = run_experiment(cfg, settings);
  write_outputs(result, out);
  if (!quiet) std::fprintf(stderr, "wrote %s\n", (out / "summary.csv").string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Communication-free multi-robot task allocation simulator"};
  app.require_subcommand(1);
  int workers = 0;
  bool quiet = false;
  app.add_option("-j,--workers", workers, "Worker threads (default: ZKMRTA_WORKERS or all cores)");
  app.add_flag("-q,--quiet", quiet, "No progress output");

  auto* run = app.add_subcommand("run", "Run a preset");
  std::string preset_name, run_out;
  std::vector<std::string> overrides;
  run->add_option("--preset", preset_name, "Preset name")->required();
  run->add_option("--override", overrides, "Parameter override key=value (repeatable)");
  run->add_option("--out", run_out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run a configuration file");
  std::string config_file, sweep_out;
  std::vector<std::string> sweep_overrides;
  sweep->add_option("--config", config_file, "JSON configuration")->required()->check(CLI::ExistingFile);
  sweep->add_option("--override", sweep_overrides, "Parameter override key=value (repeatable)");
  sweep->add_option("--out", sweep_out, "Output directory");

  auto* analyze = app.add_subcommand("analyze", "Analyze a run directory");
  std::string log_dir, check, analyze_out;
  analyze->add_option("--log", log_dir, "Run directory (config.json, summary.csv, log.csv)")->required();
  analyze->add_option("--check", check, "spanning | bound | foldin | coverage")
      ->required()
      ->check(CLI::IsMember({"spanning", "bound", "foldin", "coverage"}));
  analyze->add_option("--out", analyze_out, "Output directory (default: the run directory)");

  auto* report = app.add_subcommand("report", "Print a run's summary table");
  std::string report_in;
  report->add_option("--in", report_in, "Run directory")->required();

  auto* list = app.add_subcommand("list-presets", "List preset names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = preset(preset_name);
      for (const auto& o : overrides) apply_override(cfg, o);
      run_and_write(cfg, default_out(run_out, preset_name), workers, quiet);
    } else if (*sweep) {
      auto cfg = load_config(config_file);
      for (const auto& o : sweep_overrides) apply_override(cfg, o);
      const auto name = cfg.preset.empty() ? fs::path(config_file).stem().string() : cfg.preset;
      run_and_write(cfg, default_out(sweep_out, name), workers, quiet);
    } else if (*analyze) {
      const fs::path out = analyze_out.empty() ? fs::path(log_dir) : fs::path(analyze_out);
      if (check == "spanning") {
        const auto s = analyze_spanning(log_dir, out);
        std::printf("pairs %ld  exceptions %ld  non-spanning prior error %.4f  rank bins monotone %s\n",
                    s.pairs, s.exceptions, s.nonspanning_prior_error, s.monotone ? "yes" : "no");
      } else if (check == "bound") {
        for (const auto& b : analyze_bound(log_dir, out)) {
          std::printf("%-10s point %zu  mean %.4f  bound %.4f  margin %.4f  %s\n", b.method.c_str(),
                      b.point, b.report.mean, b.report.bound, b.report.margin,
                      b.report.holds ? "holds" : "VIOLATED");
        }
      } else if (check == "foldin") {
        for (const auto& r : analyze_foldin(out)) {
          std::printf("%-10s eps %-5g sigma %-5g lambda %-6g k %-3d  error %.3g\n", r.axis.c_str(),
                      r.epsilon, r.sigma, r.lambda, r.k, r.profile.mean_error);
        }
      } else {
        std::vector<double> medians;
        for (const auto& r : analyze_coverage(log_dir, out)) {
          std::printf("m %-4d median coverage time %.1f\n", r.m, r.median);
          medians.push_back(r.median);
        }
        std::printf("inversions %d\n", count_inversions(medians));
      }
    } else if (*report) {
      print_report(report_in, std::cout);
    } else if (*list) {
      for (const auto& n : preset_names()) std::cout << n << '\n';
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
