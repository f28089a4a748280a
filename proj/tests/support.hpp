#pragma once

// Shared fixtures for the unit and acceptance tests: table-driven synthetic
// systems and brute-force reference solvers that do not reuse the library's
// bitset or Gamma code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "msyn/abstraction.hpp"
#include "msyn/grid.hpp"
#include "msyn/synthesis.hpp"

namespace msyn::testing {

using Cells = std::set<std::size_t>;

inline Cells to_cells(const CellSet& s) {
  Cells out;
  for (std::size_t c = 0; c < s.size(); ++c)
    if (s.contains(c)) out.insert(c);
  return out;
}

inline CellSet from_cells(const LayerStack& stack, int layer, const Cells& cells) {
  CellSet s = CellSet::of(stack, layer);
  for (auto c : cells) s.insert(c);
  return s;
}

inline CellSet random_set(const LayerStack& stack, int layer, double p, std::mt19937_64& rng) {
  CellSet s = CellSet::of(stack, layer);
  std::bernoulli_distribution coin(p);
  for (std::size_t c = 0; c < s.size(); ++c)
    if (coin(rng)) s.insert(c);
  return s;
}

// ---------------------------------------------------------------------------
// Geometric reference for the Gamma operators: decides membership from the
// cell boxes alone.

inline bool box_inside(const ReachBox& a, const ReachBox& b) {
  for (std::size_t i = 0; i < a.dim(); ++i)
    if (a.lower[i] < b.lower[i] - 1e-9 || a.upper[i] > b.upper[i] + 1e-9) return false;
  return true;
}

/// Cells of `fine` whose box lies inside the box of `coarse_cell` at `coarse`.
inline Cells subcells(const LayerStack& stack, int coarse, std::size_t coarse_cell, int fine) {
  const ReachBox outer = stack.cell_box(coarse, coarse_cell);
  Cells out;
  for (std::size_t c = 0; c < stack.cell_count(fine); ++c)
    if (box_inside(stack.cell_box(fine, c), outer)) out.insert(c);
  return out;
}

inline Cells oracle_gamma(const LayerStack& stack, const CellSet& src, int target, bool up) {
  const int from = src.layer();
  Cells out;
  if (target <= from) {
    for (std::size_t c = 0; c < stack.cell_count(target); ++c) {
      const ReachBox b = stack.cell_box(target, c);
      for (std::size_t s = 0; s < src.size(); ++s)
        if (src.contains(s) && box_inside(b, stack.cell_box(from, s))) {
          out.insert(c);
          break;
        }
    }
    return out;
  }
  for (std::size_t c = 0; c < stack.cell_count(target); ++c) {
    const Cells subs = subcells(stack, target, c, from);
    std::size_t hit = 0;
    for (auto s : subs) hit += src.contains(s) ? 1 : 0;
    if (up ? hit > 0 : hit == subs.size()) out.insert(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic multi-layer systems.
//
// A random layer-1 transition table is drawn; the transition of a cell at any
// coarser grid is the set of grid cells meeting the union of the layer-1
// successors of its sub-cells (blocked if any of them is). Time layers are
// ignored. Every coarse transition therefore over-approximates the finer ones,
// which is the property the multi-layer algorithms rely on.

class SyntheticSource final : public TransitionSource {
 public:
  SyntheticSource(LayerStack stack, std::size_t inputs, std::uint64_t seed, double p_blocked = 0.05,
                  int max_step = 2)
      : stack_(std::move(stack)), inputs_(inputs) {
    std::mt19937_64 rng(seed);
    const std::size_t n = stack_.dim();
    const auto& ext = stack_.extent(1);
    std::uniform_int_distribution<int> step(-max_step, max_step);
    std::uniform_int_distribution<int> spread(0, 1);
    std::bernoulli_distribution blocked(p_blocked);
    fine_.resize(stack_.cell_count(1) * inputs_);
    for (std::size_t c = 0; c < stack_.cell_count(1); ++c) {
      const auto idx = stack_.unravel(1, c);
      for (std::size_t u = 0; u < inputs_; ++u) {
        Successors s;
        std::vector<int> lo(n), hi(n);
        for (std::size_t i = 0; i < n; ++i) {
          lo[i] = static_cast<int>(idx[i]) + step(rng);
          hi[i] = lo[i] + spread(rng);
          if (lo[i] < 0 || hi[i] >= static_cast<int>(ext[i])) s.blocked = true;
          lo[i] = std::max(lo[i], 0);
          hi[i] = std::min(hi[i], static_cast<int>(ext[i]) - 1);
        }
        if (blocked(rng)) s.blocked = true;
        bool empty = false;
        for (std::size_t i = 0; i < n; ++i) empty = empty || lo[i] > hi[i];
        if (!empty) {
          std::vector<std::uint32_t> k(n);
          for (std::size_t i = 0; i < n; ++i) k[i] = static_cast<std::uint32_t>(lo[i]);
          while (true) {
            s.cells.push_back(static_cast<CellIndex>(stack_.linearize(1, k)));
            std::size_t i = 0;
            for (; i < n; ++i) {
              if (static_cast<int>(k[i]) < hi[i]) {
                ++k[i];
                break;
              }
              k[i] = static_cast<std::uint32_t>(lo[i]);
            }
            if (i == n) break;
          }
          std::sort(s.cells.begin(), s.cells.end());
        } else {
          s.blocked = true;
        }
        fine_[c * inputs_ + u] = std::move(s);
      }
    }
  }

  const LayerStack& stack() const override { return stack_; }
  std::size_t num_inputs() const override { return inputs_; }

  Successors compute(int grid_layer, int, std::size_t cell, std::size_t input) const override {
    if (grid_layer == 1) return fine_[cell * inputs_ + input];
    Successors out;
    std::set<std::size_t> coarse;
    const std::size_t shift = static_cast<std::size_t>(grid_layer - 1);
    for (std::size_t f : subcells_of(grid_layer, cell)) {
      const auto& s = fine_[f * inputs_ + input];
      out.blocked = out.blocked || s.blocked;
      for (auto c : s.cells) {
        auto idx = stack_.unravel(1, c);
        for (auto& v : idx) v >>= shift;
        coarse.insert(stack_.linearize(grid_layer, idx));
      }
    }
    out.cells.assign(coarse.begin(), coarse.end());
    return out;
  }

  const Successors& fine(std::size_t cell, std::size_t input) const {
    return fine_[cell * inputs_ + input];
  }

 private:
  std::vector<std::size_t> subcells_of(int layer, std::size_t cell) const {
    const std::size_t n = stack_.dim();
    const auto base = stack_.unravel(layer, cell);
    const std::uint32_t k = std::uint32_t{1} << (layer - 1);
    std::vector<std::size_t> out;
    std::vector<std::uint32_t> off(n, 0), idx(n);
    while (true) {
      for (std::size_t i = 0; i < n; ++i) idx[i] = base[i] * k + off[i];
      out.push_back(stack_.linearize(1, idx));
      std::size_t i = 0;
      for (; i < n; ++i) {
        if (++off[i] < k) break;
        off[i] = 0;
      }
      if (i == n) break;
    }
    return out;
  }

  LayerStack stack_;
  std::size_t inputs_;
  std::vector<Successors> fine_;
};

/// Random spec sets: layer-1 safe and target cells, coarser layers by Gamma-down.
inline SpecSets random_spec(const LayerStack& stack, std::mt19937_64& rng, double p_safe = 0.85,
                            double p_target = 0.08) {
  SpecSets s;
  CellSet safe = random_set(stack, 1, p_safe, rng);
  CellSet target = random_set(stack, 1, p_target, rng) & safe;
  for (int l = 1; l <= stack.layers(); ++l) {
    s.safe.push_back(gamma_down(stack, safe, l));
    s.target.push_back(gamma_down(stack, target, l));
  }
  s.obstacle_coarse = CellSet::full(stack.layers(), stack.cell_count(stack.layers())) -
                      s.safe.back();
  return s;
}

struct SyntheticInstance {
  LayerStack stack;
  SyntheticSource source;
  SpecSets spec;
};

/// 2-D instance; layer-1 extent between 8 and 16 per axis (multiple of 2^(L-1)).
inline SyntheticInstance random_instance(std::uint64_t seed, int layers = 2) {
  std::mt19937_64 rng(seed);
  const std::uint32_t block = 1U << (layers - 1);
  std::uniform_int_distribution<std::uint32_t> blocks(8 / block, 16 / block);
  const double nx = blocks(rng) * block, ny = blocks(rng) * block;
  LayerStack stack({0.0, 0.0}, {nx, ny}, {1.0, 1.0}, 0.1, layers);
  std::uniform_int_distribution<std::size_t> ninputs(1, 3);
  SyntheticSource src(stack, ninputs(rng), rng());
  SpecSets spec = random_spec(stack, rng);
  return {stack, std::move(src), std::move(spec)};
}

// ---------------------------------------------------------------------------
// Brute-force single-layer game solvers over an explicit table.

struct ExplicitGame {
  std::size_t cells = 0, inputs = 0;
  std::vector<bool> blocked;            // [cell * inputs + u]
  std::vector<std::vector<std::size_t>> succ;

  static ExplicitGame from(const TransitionSource& src, int layer) {
    ExplicitGame g;
    g.cells = src.stack().cell_count(layer);
    g.inputs = src.num_inputs();
    for (std::size_t c = 0; c < g.cells; ++c)
      for (std::size_t u = 0; u < g.inputs; ++u) {
        const Successors s = src.compute(layer, layer, c, u);
        g.blocked.push_back(s.blocked);
        g.succ.emplace_back(s.cells.begin(), s.cells.end());
      }
    return g;
  }

  bool good(std::size_t c, std::size_t u, const Cells& target) const {
    const std::size_t k = c * inputs + u;
    if (blocked[k]) return false;
    for (auto s : succ[k])
      if (!target.count(s)) return false;
    return true;
  }

  /// Greatest set Z inside `safe` such that every cell of Z has a good input into Z.
  Cells safety(const Cells& safe) const {
    Cells z = safe;
    for (bool changed = true; changed;) {
      changed = false;
      for (auto it = z.begin(); it != z.end();) {
        bool ok = false;
        for (std::size_t u = 0; u < inputs && !ok; ++u) ok = good(*it, u, z);
        if (!ok) {
          it = z.erase(it);
          changed = true;
        } else {
          ++it;
        }
      }
    }
    return z;
  }

  /// Attractor of `target` inside `safe`; rank[c] = step at which c joined minus 1.
  Cells attractor(const Cells& target, const Cells& safe, std::map<std::size_t, std::size_t>* rank = nullptr) const {
    Cells w = target;
    for (std::size_t step = 1;; ++step) {
      Cells add;
      for (auto c : safe) {
        if (w.count(c)) continue;
        for (std::size_t u = 0; u < inputs; ++u)
          if (good(c, u, w)) {
            add.insert(c);
            break;
          }
      }
      if (add.empty()) return w;
      for (auto c : add) {
        w.insert(c);
        if (rank) (*rank)[c] = step - 1;
      }
    }
  }
};

}  // namespace msyn::testing
