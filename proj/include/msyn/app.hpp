#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msyn/benchmarks.hpp"
#include "msyn/controller.hpp"
#include "msyn/grid.hpp"
#include "msyn/synthesis.hpp"

namespace msyn {

/// Everything needed to set up and run one synthesis problem.
struct ProblemConfig {
  std::string benchmark;
  DcdcParams dcdc;
  UnicycleParams unicycle;

  int layers = 1;
  Vector eta1;
  double tau1 = 0.0;
  Vector y_lower, y_upper;

  SpecKind spec = SpecKind::Safe;
  std::vector<ReachBox> safe_boxes;  // empty: all of Y
  std::vector<ReachBox> obstacles;
  std::vector<ReachBox> targets;

  std::size_t m = 2;
  std::uint64_t seed = 0;
  std::string algorithm;  // eager-safe | lazy-safe | eager-reach | lazy-reach | single-layer
  int substeps = 5;
  std::string output_dir = "out";
  unsigned threads = 1;
  std::size_t recursion_cap = 1'000'000;

  std::vector<std::string> warnings;  // produced while loading (e.g. clipped boxes)

  LayerStack stack() const;
  ProblemGeometry geometry() const;
  ControlSystem system() const;
};

const std::vector<std::string>& algorithm_ids();

/// Parses and validates a JSON configuration. Throws ConfigError with the
/// offending field in the message.
ProblemConfig load_config(const std::filesystem::path& path);
ProblemConfig parse_config(const std::string& json_text);

/// Re-checks invariants after command-line overrides.
void check_config(ProblemConfig& config);

struct SynthesisRun {
  SynthesisResult result;
  std::vector<std::filesystem::path> files;
};

/// Runs the configured algorithm and writes winning.csv, domain_layer<l>.csv,
/// explored_layer<l>.csv, controller.txt, stats.json (deterministic) and
/// timing.json (wall times) into config.output_dir.
SynthesisRun run_synthesis(const ProblemConfig& config);

/// Loads a controller file, runs Monte Carlo validation and writes the report
/// as JSON to `report`.
ValidationReport run_validation(const std::filesystem::path& controller, const ProblemConfig& config,
                                std::size_t runs, std::size_t horizon, std::uint64_t seed,
                                const std::filesystem::path& report);

/// Human-readable summary of stats.json (and timing.json when present).
std::string format_stats(const std::filesystem::path& dir);

}  // namespace msyn
