#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "msyn/dynamics.hpp"
#include "msyn/grid.hpp"

namespace msyn {

enum class SpecKind : std::uint8_t { Safe, Reach };

std::string to_string(SpecKind kind);

/// Controller of one stage: a cell set of one layer with, per cell, the
/// admissible input indices (ascending) and, for reach stages, the rank i*.
struct LayerController {
  int layer = 1;
  std::size_t stage = 0;
  bool ranked = false;
  CellSet domain;
  std::vector<CellIndex> cells;                   // sorted, equals the members of domain
  std::vector<std::vector<std::uint32_t>> moves;  // parallel to cells
  std::vector<std::uint32_t> ranks;               // parallel to cells when ranked

  /// Position of `cell` in `cells`, if present.
  std::optional<std::size_t> find(std::size_t cell) const;
  std::uint32_t max_rank() const;

  /// Appends a record; cells must arrive in increasing order.
  void add(std::size_t cell, std::vector<std::uint32_t> inputs);
  void add(std::size_t cell, std::vector<std::uint32_t> inputs, std::uint32_t rank);

  friend bool operator==(const LayerController&, const LayerController&) = default;
};

/// Ordered list of stages built for one layer stack.
struct MultiLayeredController {
  SpecKind kind = SpecKind::Safe;
  LayerStack stack;
  std::vector<LayerController> stages;

  /// Union of the stage domains, projected to layer 1 with gamma_down.
  CellSet domain_layer1() const;

  friend bool operator==(const MultiLayeredController&, const MultiLayeredController&) = default;
};

struct Selection {
  std::size_t stage;
  std::size_t cell;  // cell of the stage's layer
};

/// Safety: the stage of the coarsest layer whose domain holds x (earliest on
/// ties). Reach: the earliest stage whose domain holds x.
std::optional<Selection> quantizer(const MultiLayeredController& mlc, std::span<const double> x);

enum class RunStatus : std::uint8_t { TargetReached, HorizonComplete, LeftDomain, Violation };

std::string to_string(RunStatus status);

struct LogEntry {
  double time = 0.0;
  Vector state;
  int layer = 0;
  std::size_t stage = 0;
  std::uint32_t input = 0;
  std::uint32_t rank = 0;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

struct TrajectoryLog {
  std::vector<LogEntry> entries;
  Vector final_state;
  double final_time = 0.0;
  RunStatus status = RunStatus::HorizonComplete;
  std::string reason;

  friend bool operator==(const TrajectoryLog&, const TrajectoryLog&) = default;
};

struct StepResult {
  Vector next;
  LogEntry entry;
};

/// Applies the lowest admissible input of the selected stage for tau of the
/// stage's layer under a sampled disturbance. nullopt when no stage applies.
std::optional<StepResult> step_closed_loop(const MultiLayeredController& mlc,
                                           const ControlSystem& sys, std::span<const double> x,
                                           std::mt19937_64& rng, int substeps = 5);

/*
 * Runs the closed loop from x0. Safety: `horizon` sampling steps, each sampled
 * state has to be safe. Reach: stops when the target is entered; every state
 * before has to be safe and the (stage, rank) measure has to decrease
 * strictly. `horizon` caps the number of steps.
 */
TrajectoryLog simulate(const MultiLayeredController& mlc, const ControlSystem& sys,
                       const ProblemGeometry& geometry, std::span<const double> x0,
                       std::size_t horizon, std::uint64_t seed, int substeps = 5);

/// Step budget of a reach controller: 2 * sum over stages of (max rank + 1).
std::size_t reach_step_bound(const MultiLayeredController& mlc);

struct ValidationReport {
  std::size_t runs = 0;
  std::size_t violations = 0;
  std::size_t target_reached = 0;
  std::size_t horizon_complete = 0;
  std::size_t max_steps = 0;
  double mean_steps = 0.0;
  std::size_t horizon = 0;
  std::vector<std::string> examples;  // first few violation reasons
};

/*
 * Monte Carlo closed-loop check. Initial states are drawn uniformly from the
 * layer-1 projection of the controller domain. Safety runs last `horizon`
 * steps; reach runs are capped by reach_step_bound and `horizon` is unused.
 */
ValidationReport validate(const MultiLayeredController& mlc, const ControlSystem& sys,
                          const ProblemGeometry& geometry, std::size_t runs, std::size_t horizon,
                          std::uint64_t seed, int substeps = 5, unsigned threads = 1);

void serialize(std::ostream& out, const MultiLayeredController& mlc);
MultiLayeredController deserialize(std::istream& in);

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log);

}  // namespace msyn
