#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "msyn/dynamics.hpp"
#include "msyn/grid.hpp"

namespace msyn {

/*
 * Result of one abstract transition computation.
 *
 * `cells` lists (sorted) the cells of the state grid that meet the
 * over-approximated reach box and lie inside Y. `blocked` is set when the
 * reach box is not contained in Y; such entries never satisfy a controllable
 * predecessor test, but their in-Y cells still count for cooperative
 * predecessors.
 */
struct Successors {
  bool blocked = false;
  std::vector<CellIndex> cells;
};

/// Provider of abstract transitions. Implementations must be deterministic and
/// safe to call concurrently.
class TransitionSource {
 public:
  virtual ~TransitionSource() = default;
  virtual const LayerStack& stack() const = 0;
  virtual std::size_t num_inputs() const = 0;
  /// Transition of `cell` (a cell of `grid_layer`) under input `input` for
  /// the sampling time of `time_layer`, expressed in cells of `grid_layer`.
  virtual Successors compute(int grid_layer, int time_layer, std::size_t cell,
                             std::size_t input) const = 0;
};

/// Transitions from growth-bound reach boxes of a ControlSystem.
class GrowthBoundSource final : public TransitionSource {
 public:
  /// `substeps` is the RK4 step count for tau_1; layer l uses 2^(l-1) times it.
  GrowthBoundSource(const ControlSystem& sys, const LayerStack& stack, int substeps = 5);

  const LayerStack& stack() const override { return *stack_; }
  std::size_t num_inputs() const override { return sys_->inputs.size(); }
  Successors compute(int grid_layer, int time_layer, std::size_t cell,
                     std::size_t input) const override;

  const ControlSystem& system() const { return *sys_; }
  int substeps() const { return substeps_; }

 private:
  const ControlSystem* sys_;
  const LayerStack* stack_;
  int substeps_;
  std::vector<Matrix> growth_;
};

/// Cells of `layer` meeting the semi-open box [box.lower, box.upper), with the
/// containment flag of the box in Y.
Successors successors_of_box(const LayerStack& stack, int layer, const ReachBox& box);

enum class TableKind : std::uint8_t { Main, Auxiliary };
enum class EntryState : std::uint8_t { Unexplored, Computed, Blocked };

struct Lookup {
  EntryState state;
  std::span<const CellIndex> cells;
};

/*
 * Lazily populated transition function of one abstract system.
 *
 * A main table at layer l holds F_l over the cells of layer l with tau_l.
 * An auxiliary table for l holds J_l over the cells of the coarsest layer L,
 * also with tau_l. Entries are written at most once.
 */
class TransitionTable {
 public:
  TransitionTable() = default;
  TransitionTable(const LayerStack& stack, int layer, TableKind kind, std::size_t num_inputs);

  int layer() const { return layer_; }
  TableKind kind() const { return kind_; }
  /// Layer whose cells index the entries (l for main, L for auxiliary).
  int grid_layer() const { return grid_layer_; }
  std::size_t cell_count() const { return cells_; }
  std::size_t num_inputs() const { return inputs_; }
  std::size_t explored_count() const { return explored_; }

  EntryState state(std::size_t cell, std::size_t input) const {
    return state_[cell * inputs_ + input];
  }
  Lookup lookup(std::size_t cell, std::size_t input) const;

  /// Computes the entry if still unexplored. Returns true if it was computed now.
  bool compute_transition(const TransitionSource& source, std::size_t cell, std::size_t input);
  /// Computes every unexplored entry of the cells in `region`, fanning out to
  /// `threads` workers. Returns the number of entries computed.
  std::size_t compute_transitions(const TransitionSource& source, const CellSet& region,
                                  unsigned threads = 1);

  /// Cells with at least one computed (or blocked) entry.
  CellSet explored_cells() const;

  void dump(std::ostream& out, const LayerStack& stack) const;
  static TransitionTable load(std::istream& in, const LayerStack& stack);

  friend bool operator==(const TransitionTable&, const TransitionTable&) = default;

 private:
  void check_cell(std::size_t cell, std::size_t input) const;
  void store(std::size_t slot, Successors&& s);

  int layer_ = 0;
  int grid_layer_ = 0;
  TableKind kind_ = TableKind::Main;
  std::size_t cells_ = 0;
  std::size_t inputs_ = 0;
  std::size_t explored_ = 0;
  std::vector<EntryState> state_;
  std::vector<std::vector<CellIndex>> succ_;
};

}  // namespace msyn
