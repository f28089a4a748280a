#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "msyn/dynamics.hpp"

namespace msyn {

using CellIndex = std::uint32_t;

/*
 * Sequence of L nested grids over the region of interest Y = [lower, upper).
 *
 * Layers are numbered 1..L, layer 1 being the finest. Layer l has grid
 * parameter eta_l = 2^(l-1) eta_1 and sampling time tau_l = 2^(l-1) tau_1.
 * Cells are the semi-open boxes [lower + k eta_l, lower + (k+1) eta_l), so the
 * cells of every layer partition Y. Multi-indices are linearized row-major
 * with dimension 0 varying fastest.
 */
class LayerStack {
 public:
  LayerStack() = default;
  /// Throws ContractViolation unless upper - lower is an integer multiple of
  /// 2^(L-1) eta1 in every dimension.
  LayerStack(Vector lower, Vector upper, Vector eta1, double tau1, int layers);

  std::size_t dim() const { return lower_.size(); }
  int layers() const { return layers_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const Vector& eta1() const { return eta1_; }
  double tau1() const { return tau1_; }

  double tau(int layer) const;
  Vector eta(int layer) const;
  /// Substep count for layer `layer` given the count used at layer 1.
  static int substeps(int layer, int base) { return base << (layer - 1); }
  const std::vector<std::uint32_t>& extent(int layer) const;
  std::size_t cell_count(int layer) const;

  std::size_t linearize(int layer, std::span<const std::uint32_t> index) const;
  std::vector<std::uint32_t> unravel(int layer, std::size_t cell) const;

  /// Cell of `layer` containing x, or nullopt when x lies outside Y.
  std::optional<std::size_t> quantize(std::span<const double> x, int layer) const;
  /// Closure of the cell's box.
  ReachBox cell_box(int layer, std::size_t cell) const;
  Vector cell_center(int layer, std::size_t cell) const;
  /// The unique cell of the coarser layer `coarse` containing `cell` of `fine`.
  std::size_t parent(int fine, std::size_t cell, int coarse) const;

  /// Whether `box` (closed, compared as semi-open) fits into Y.
  bool inside_region(const ReachBox& box) const;

  void check_layer(int layer) const;

  friend bool operator==(const LayerStack&, const LayerStack&) = default;

 private:
  Vector lower_, upper_, eta1_;
  double tau1_ = 0.0;
  int layers_ = 0;
  std::vector<std::vector<std::uint32_t>> extent_;  // per layer
  std::vector<std::size_t> count_;
};

/// A cell identified by layer and multi-index.
struct CellId {
  int layer = 1;
  std::vector<std::uint32_t> index;

  friend bool operator==(const CellId&, const CellId&) = default;
};

std::optional<CellId> quantize(const LayerStack& stack, std::span<const double> x, int layer);
ReachBox cell_box(const LayerStack& stack, const CellId& id);

/*
 * Dense bitset of cells of one layer. Binary operations require both operands
 * to belong to the same layer and throw ContractViolation otherwise.
 */
class CellSet {
 public:
  CellSet() = default;
  CellSet(int layer, std::size_t size);
  static CellSet full(int layer, std::size_t size);
  static CellSet of(const LayerStack& stack, int layer) { return {layer, stack.cell_count(layer)}; }

  int layer() const { return layer_; }
  std::size_t size() const { return size_; }

  bool contains(std::size_t cell) const { return (words_[cell >> 6] >> (cell & 63)) & 1U; }
  void insert(std::size_t cell) { words_[cell >> 6] |= std::uint64_t{1} << (cell & 63); }
  void erase(std::size_t cell) { words_[cell >> 6] &= ~(std::uint64_t{1} << (cell & 63)); }

  std::size_t count() const;
  bool empty() const;
  bool is_subset_of(const CellSet& other) const;
  bool intersects(const CellSet& other) const;
  void clear();

  CellSet& operator|=(const CellSet& other);
  CellSet& operator&=(const CellSet& other);
  CellSet& operator-=(const CellSet& other);
  friend CellSet operator|(CellSet a, const CellSet& b) { return a |= b; }
  friend CellSet operator&(CellSet a, const CellSet& b) { return a &= b; }
  friend CellSet operator-(CellSet a, const CellSet& b) { return a -= b; }
  friend bool operator==(const CellSet&, const CellSet&) = default;

  /// Calls f(cell) for every member in increasing order.
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        const int b = __builtin_ctzll(bits);
        f((w << 6) + static_cast<std::size_t>(b));
        bits &= bits - 1;
      }
    }
  }
  std::vector<std::size_t> to_vector() const;

 private:
  void check_same(const CellSet& other) const;
  void trim();

  int layer_ = 0;
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

CellSet set_union(const CellSet& a, const CellSet& b);
CellSet set_intersect(const CellSet& a, const CellSet& b);
CellSet set_difference(const CellSet& a, const CellSet& b);

/*
 * Inter-layer transformers.
 *
 * gamma_down(src, l): for l <= layer(src) the layer-l cells contained in some
 * src cell; for l > layer(src) the layer-l cells all of whose sub-cells are in
 * src (under-approximation).
 * gamma_up(src, l): identical for l <= layer(src); for l > layer(src) the
 * layer-l cells intersecting some src cell (over-approximation).
 */
CellSet gamma_down(const LayerStack& stack, const CellSet& src, int target_layer);
CellSet gamma_up(const LayerStack& stack, const CellSet& src, int target_layer);

/// Axis-aligned boxes describing safe, obstacle and target regions.
struct ProblemGeometry {
  std::vector<ReachBox> safe;  // empty: all of Y is safe
  std::vector<ReachBox> obstacles;
  std::vector<ReachBox> targets;

  /// x in Y, in some safe box (if any given) and in no obstacle.
  bool in_safe(const LayerStack& stack, std::span<const double> x) const;
  bool in_target(const LayerStack& stack, std::span<const double> x) const;
};

/// Cells of `layer` whose (semi-open) box lies inside some box of `boxes`.
CellSet cells_inside(const LayerStack& stack, int layer, const std::vector<ReachBox>& boxes);
/// Cells of `layer` whose (semi-open) box meets some (closed) box of `boxes`.
CellSet cells_meeting(const LayerStack& stack, int layer, const std::vector<ReachBox>& boxes);

/// CSV with header `layer,i0..,c0..`; one row per member, in index order.
void write_csv(std::ostream& out, const LayerStack& stack, const CellSet& cells);

}  // namespace msyn
