// Command-line driver: synthesize, validate and inspect controllers.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "msyn/app.hpp"
#include "msyn/error.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSynthesisError = 2;
constexpr int kViolations = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lazy multi-layered abstraction-based controller synthesis"};
  app.require_subcommand(1);

  std::string config_path, algorithm, out_dir;
  int layers = 0;
  std::size_t m = 0;
  unsigned threads = 0;
  auto* syn = app.add_subcommand("synthesize", "Synthesize a controller from a JSON config");
  syn->add_option("--config", config_path, "Problem configuration (JSON)")->required();
  syn->add_option("--algorithm", algorithm,
                  "eager-safe | lazy-safe | eager-reach | lazy-reach | single-layer");
  syn->add_option("--layers", layers, "Number of layers L");
  syn->add_option("--m", m, "Steps per finer-layer visit");
  syn->add_option("--threads", threads, "Workers for transition computation");
  syn->add_option("--out", out_dir, "Output directory");

  std::string controller_path, report_path;
  std::size_t runs = 1000, horizon = 200;
  std::uint64_t seed = 0;
  auto* val = app.add_subcommand("validate", "Monte Carlo closed-loop validation");
  val->add_option("--controller", controller_path, "Controller file")->required();
  val->add_option("--config", config_path, "Problem configuration (JSON)")->required();
  val->add_option("--runs", runs, "Number of runs")->required();
  val->add_option("--horizon", horizon, "Safety horizon in steps")->required();
  val->add_option("--seed", seed, "Random seed")->required();
  val->add_option("--report", report_path,
                  "Report file (default: validation.json next to the controller)");

  std::string stats_dir;
  auto* st = app.add_subcommand("stats", "Pretty-print the statistics of a synthesis run");
  st->add_option("--in", stats_dir, "Output directory of a synthesis run")->required();

  CLI11_PARSE(app, argc, argv);

  msyn::ProblemConfig config;
  if (*syn || *val) {
    try {
      config = msyn::load_config(config_path);
      if (!algorithm.empty()) config.algorithm = algorithm;
      if (layers > 0) config.layers = layers;
      if (m > 0) config.m = m;
      if (threads > 0) config.threads = threads;
      if (!out_dir.empty()) config.output_dir = out_dir;
      msyn::check_config(config);
    } catch (const msyn::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kConfigError;
    }
  }

  if (*syn) {
    try {
      const auto run = msyn::run_synthesis(config);
      for (const auto& w : run.result.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "winning cells (layer 1): " << run.result.winning.count() << "\n";
      std::cout << "transitions computed: " << run.result.stats.total_transitions() << "\n";
      for (const auto& f : run.files) std::cout << "wrote " << f.string() << "\n";
      return kOk;
    } catch (const msyn::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kConfigError;
    } catch (const std::exception& e) {
      std::cerr << "synthesis failed: " << e.what() << "\n";
      return kSynthesisError;
    }
  }

  if (*val) {
    try {
      std::filesystem::path report = report_path;
      if (report.empty())
        report = std::filesystem::path(controller_path).parent_path() / "validation.json";
      const auto rep =
          msyn::run_validation(controller_path, config, runs, horizon, seed, report);
      std::printf("runs %zu, violations %zu, target reached %zu, max steps %zu\n", rep.runs,
                  rep.violations, rep.target_reached, rep.max_steps);
      for (const auto& ex : rep.examples) std::printf("  %s\n", ex.c_str());
      std::printf("report: %s\n", report.string().c_str());
      return rep.violations == 0 ? kOk : kViolations;
    } catch (const msyn::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kConfigError;
    } catch (const msyn::FormatError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kConfigError;
    } catch (const std::exception& e) {
      std::cerr << "validation failed: " << e.what() << "\n";
      return kSynthesisError;
    }
  }

  try {
    std::cout << msyn::format_stats(stats_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
