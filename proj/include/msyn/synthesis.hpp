#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "msyn/abstraction.hpp"
#include "msyn/controller.hpp"
#include "msyn/grid.hpp"

namespace msyn {

/// What to do when an operator reads an Unexplored entry.
enum class UnexploredPolicy : std::uint8_t {
  Throw,  ///< contract violation: the frontier computation missed a cell
  Skip,   ///< treat the entry as unusable (lazy mode, cells off the frontier)
};

/// Per-layer safe and target cells (index l-1), plus the coarse obstacle
/// over-approximation used for statistics.
struct SpecSets {
  std::vector<CellSet> safe;
  std::vector<CellSet> target;
  CellSet obstacle_coarse;

  const CellSet& safe_at(int layer) const { return safe.at(static_cast<std::size_t>(layer - 1)); }
  const CellSet& target_at(int layer) const {
    return target.at(static_cast<std::size_t>(layer - 1));
  }
};

/// Builds R_l (cells inside the safe region, avoiding obstacles) and
/// T_l (cells inside a target box, within R_l) for every layer.
SpecSets build_spec_sets(const LayerStack& stack, const ProblemGeometry& geometry);

// ----------------------------------------------------------------------------
// Predecessor operators and single-layer fixed points

/// Controllable predecessor over all cells of the table's grid.
CellSet cpre(const TransitionTable& table, const CellSet& target);
/// Controllable predecessor restricted to `candidates`.
CellSet cpre(const TransitionTable& table, const CellSet& target, const CellSet& candidates,
             UnexploredPolicy policy);
/// Cooperative predecessor: some input has a successor in `target`.
CellSet upre(const TransitionTable& table, const CellSet& target);
/// UPre^1 = upre, UPre^{j+1} = UPre^j | upre(UPre^j).
CellSet upre_m(const TransitionTable& table, const CellSet& target, std::size_t m);

/// One safety step: cpre(current) & safe.
CellSet safe_step(const TransitionTable& table, const CellSet& current, const CellSet& safe,
                  UnexploredPolicy policy = UnexploredPolicy::Throw);

/// Inputs of `cell` whose successors are computed and contained in `within`.
std::vector<std::uint32_t> enabled_inputs(const TransitionTable& table, std::size_t cell,
                                          const CellSet& within);

/// Safety controller on `domain`: every input keeping the successors in `within`.
LayerController safety_controller(const TransitionTable& table, const CellSet& domain,
                                  const CellSet& within);

struct SafeFixpoint {
  CellSet winning;
  LayerController controller;
  std::size_t iterations = 0;
};

/// Greatest fixed point of safe_step inside `safe`, with its controller.
SafeFixpoint safe_fixpoint(const TransitionTable& table, const CellSet& safe);

struct ReachOutcome {
  CellSet won;                 ///< the last W (contains the initial target)
  LayerController controller;  ///< newly won cells with their ranks
  bool fixed_point = false;
  std::size_t iterations = 0;  ///< cpre evaluations
};

/// At most m steps of W0 = target, W(i+1) = (cpre(Wi) & safe) | target.
/// A cell first added at step i gets rank i-1 (+ rank_offset) and every input
/// whose successors lie in W(i-1).
ReachOutcome reach_m(const TransitionTable& table, const CellSet& target, const CellSet& safe,
                     std::size_t m, UnexploredPolicy policy = UnexploredPolicy::Throw);

/// reach_m chained in chunks of `chunk` steps until the fixed point; ranks
/// accumulate across chunks.
ReachOutcome reach_inf(const TransitionTable& table, const CellSet& target, const CellSet& safe,
                       std::size_t chunk = 2, UnexploredPolicy policy = UnexploredPolicy::Throw);

// ----------------------------------------------------------------------------
// Multi-layer protocols

struct SynthesisOptions {
  std::size_t m = 2;
  unsigned threads = 1;
  std::size_t recursion_cap = 1'000'000;
};

struct LayerStats {
  std::size_t transitions = 0;      ///< main-table entries computed
  std::size_t aux_transitions = 0;  ///< auxiliary-table entries computed
  std::size_t cpre_evaluations = 0;
  std::size_t iterations = 0;  ///< protocol visits of this layer
  std::size_t domain_cells = 0;
  double abstraction_seconds = 0.0;
  double synthesis_seconds = 0.0;
};

struct TraceEvent {
  int layer = 0;
  std::size_t iterations = 0;  ///< fixed-point steps run at this visit
  std::size_t added = 0;       ///< layer-1 cells added to the winning set
  bool fixed_point = false;
  std::size_t explored = 0;  ///< main-table entries computed at this visit
};

struct SynthesisStats {
  std::vector<LayerStats> layers;
  std::vector<TraceEvent> trace;
  std::size_t rounds = 0;           ///< safety outer rounds
  std::size_t frontier_checks = 0;  ///< frontier-sufficiency assertions evaluated
  double total_seconds = 0.0;

  std::size_t total_transitions() const;
};

struct SynthesisResult {
  CellSet winning;  ///< layer-1 winning set
  MultiLayeredController controller;
  SynthesisStats stats;
  /// Safety: the layer-1 set at the end of every round (starting with R_1).
  /// Reach: the layer-1 set after every protocol visit (starting with T_1).
  std::vector<CellSet> history;
  std::vector<std::string> warnings;
};

/*
 * Owns the per-layer transition tables of one problem and runs the
 * multi-resolution protocols over them. The same object can be queried for
 * its tables afterwards.
 */
class Synthesizer {
 public:
  Synthesizer(const TransitionSource& source, SpecSets spec, SynthesisOptions options = {});

  const LayerStack& stack() const { return *stack_; }
  const SpecSets& spec() const { return spec_; }
  const SynthesisOptions& options() const { return options_; }
  const SynthesisStats& stats() const { return stats_; }

  const TransitionTable& main_table(int layer) const;
  TransitionTable& main_table(int layer);
  /// Auxiliary table J_l, computed over every cell of layer L on first use.
  const TransitionTable& aux_table(int layer);

  /// Computes F_l on `region` (a layer-l cell set).
  void explore(int layer, const CellSet& region);
  /// Computes F_l on R_l for every layer.
  void populate_all();

  /// Alg. SafeIteration started from (R_1, {}, L, {}).
  SynthesisResult safe_iteration(bool lazy);
  /// One frontier expansion for layer l < L; returns W''.
  CellSet expand_abstraction_m(const CellSet& won, int layer);
  /// Alg. ReachIteration_m started from (T_1, R_1, L, {}).
  SynthesisResult reach_iteration(bool lazy);
  /// Single-layer synthesis at layer 1 (explores R_1 eagerly).
  SynthesisResult single_layer(SpecKind kind);

 private:
  LayerStats& layer_stats(int layer) { return stats_.layers[static_cast<std::size_t>(layer - 1)]; }
  void finish(SynthesisResult& r, double seconds);

  const TransitionSource* source_;
  const LayerStack* stack_;
  SpecSets spec_;
  SynthesisOptions options_;
  std::vector<TransitionTable> main_;
  std::vector<std::optional<TransitionTable>> aux_;
  SynthesisStats stats_;
};

SynthesisResult eager_safe(const TransitionSource& source, const SpecSets& spec,
                           SynthesisOptions options = {});
SynthesisResult lazy_safe(const TransitionSource& source, const SpecSets& spec,
                          SynthesisOptions options = {});
SynthesisResult eager_reach(const TransitionSource& source, const SpecSets& spec,
                            SynthesisOptions options = {});
SynthesisResult lazy_reach(const TransitionSource& source, const SpecSets& spec,
                           SynthesisOptions options = {});
SynthesisResult single_layer(const TransitionSource& source, const SpecSets& spec, SpecKind kind,
                             SynthesisOptions options = {});

}  // namespace msyn
