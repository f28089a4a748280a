#include "msyn/synthesis.hpp"

#include <algorithm>
#include <chrono>
#include <string>
#include <tuple>

#include "msyn/error.hpp"

namespace msyn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_grid(const TransitionTable& table, const CellSet& set, const char* what) {
  if (set.layer() != table.grid_layer() || set.size() != table.cell_count())
    throw ContractViolation(std::string(what) + ": cell set does not live on the table's grid");
}

bool all_in(std::span<const CellIndex> cells, const CellSet& target) {
  for (CellIndex c : cells)
    if (!target.contains(c)) return false;
  return true;
}

bool any_in(std::span<const CellIndex> cells, const CellSet& target) {
  for (CellIndex c : cells)
    if (target.contains(c)) return true;
  return false;
}

[[noreturn]] void unexplored(const TransitionTable& table, std::size_t cell, std::size_t u) {
  throw ContractViolation("frontier bug: entry (cell " + std::to_string(cell) + ", input " +
                          std::to_string(u) + ") of the layer-" + std::to_string(table.layer()) +
                          " table is unexplored");
}

}  // namespace

SpecSets build_spec_sets(const LayerStack& stack, const ProblemGeometry& geometry) {
  SpecSets s;
  const int L = stack.layers();
  for (int l = 1; l <= L; ++l) {
    CellSet safe = geometry.safe.empty() ? CellSet::full(l, stack.cell_count(l))
                                         : cells_inside(stack, l, geometry.safe);
    safe -= cells_meeting(stack, l, geometry.obstacles);
    CellSet target = cells_inside(stack, l, geometry.targets) & safe;
    if (l > 1) {
      safe &= gamma_down(stack, s.safe.front(), l);
      target &= gamma_down(stack, s.target.front(), l);
    }
    s.safe.push_back(std::move(safe));
    s.target.push_back(std::move(target));
  }
  s.obstacle_coarse = cells_meeting(stack, L, geometry.obstacles);
  return s;
}

// ----------------------------------------------------------------------------
// Operators

CellSet cpre(const TransitionTable& table, const CellSet& target) {
  return cpre(table, target, CellSet::full(table.grid_layer(), table.cell_count()),
              UnexploredPolicy::Throw);
}

CellSet cpre(const TransitionTable& table, const CellSet& target, const CellSet& candidates,
             UnexploredPolicy policy) {
  check_grid(table, target, "cpre");
  check_grid(table, candidates, "cpre");
  CellSet out(target.layer(), target.size());
  const std::size_t nu = table.num_inputs();
  candidates.for_each([&](std::size_t cell) {
    for (std::size_t u = 0; u < nu; ++u) {
      const Lookup e = table.lookup(cell, u);
      if (e.state == EntryState::Unexplored) {
        if (policy == UnexploredPolicy::Throw) unexplored(table, cell, u);
        continue;
      }
      if (e.state == EntryState::Computed && all_in(e.cells, target)) {
        out.insert(cell);
        return;
      }
    }
  });
  return out;
}

CellSet upre(const TransitionTable& table, const CellSet& target) {
  check_grid(table, target, "upre");
  CellSet out(target.layer(), target.size());
  if (target.empty()) return out;
  const std::size_t nu = table.num_inputs();
  for (std::size_t cell = 0; cell < table.cell_count(); ++cell) {
    for (std::size_t u = 0; u < nu; ++u) {
      const Lookup e = table.lookup(cell, u);
      if (e.state == EntryState::Unexplored) unexplored(table, cell, u);
      if (any_in(e.cells, target)) {
        out.insert(cell);
        break;
      }
    }
  }
  return out;
}

CellSet upre_m(const TransitionTable& table, const CellSet& target, std::size_t m) {
  if (m == 0) throw ContractViolation("upre_m: m must be positive");
  CellSet acc = upre(table, target);
  for (std::size_t j = 1; j < m; ++j) {
    CellSet next = acc | upre(table, acc);
    if (next == acc) break;
    acc = std::move(next);
  }
  return acc;
}

CellSet safe_step(const TransitionTable& table, const CellSet& current, const CellSet& safe,
                  UnexploredPolicy policy) {
  return cpre(table, current, current & safe, policy) & safe;
}

std::vector<std::uint32_t> enabled_inputs(const TransitionTable& table, std::size_t cell,
                                          const CellSet& within) {
  std::vector<std::uint32_t> out;
  for (std::size_t u = 0; u < table.num_inputs(); ++u) {
    const Lookup e = table.lookup(cell, u);
    if (e.state == EntryState::Computed && all_in(e.cells, within))
      out.push_back(static_cast<std::uint32_t>(u));
  }
  return out;
}

LayerController safety_controller(const TransitionTable& table, const CellSet& domain,
                                  const CellSet& within) {
  check_grid(table, domain, "safety_controller");
  check_grid(table, within, "safety_controller");
  LayerController c;
  c.layer = table.grid_layer();
  c.domain = domain;
  domain.for_each([&](std::size_t cell) {
    auto moves = enabled_inputs(table, cell, within);
    if (moves.empty())
      throw ContractViolation("safety controller: domain cell " + std::to_string(cell) +
                              " has no input keeping it inside the winning set");
    c.add(cell, std::move(moves));
  });
  return c;
}

SafeFixpoint safe_fixpoint(const TransitionTable& table, const CellSet& safe) {
  check_grid(table, safe, "safe_fixpoint");
  SafeFixpoint r;
  CellSet w = safe;
  while (true) {
    CellSet next = safe_step(table, w, safe);
    ++r.iterations;
    if (next == w) break;
    w = std::move(next);
  }
  r.controller = safety_controller(table, w, w);
  r.winning = std::move(w);
  return r;
}

namespace {

struct RankRecord {
  std::size_t cell;
  std::vector<std::uint32_t> moves;
  std::uint32_t rank;
};

// Runs up to m steps starting from `w` (modified in place).
std::tuple<bool, std::size_t> reach_steps(const TransitionTable& table, CellSet& w,
                                          const CellSet& safe, std::size_t m,
                                          UnexploredPolicy policy, std::uint32_t rank_offset,
                                          std::vector<RankRecord>& records) {
  for (std::size_t i = 1; i <= m; ++i) {
    const CellSet fresh = cpre(table, w, safe - w, policy);
    if (fresh.empty()) return {true, i};
    fresh.for_each([&](std::size_t cell) {
      records.push_back(
          {cell, enabled_inputs(table, cell, w), rank_offset + static_cast<std::uint32_t>(i - 1)});
    });
    w |= fresh;
  }
  return {false, m};
}

LayerController ranked_controller(int layer, std::size_t cells, std::vector<RankRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const RankRecord& a, const RankRecord& b) { return a.cell < b.cell; });
  LayerController c;
  c.layer = layer;
  c.ranked = true;
  c.domain = CellSet(layer, cells);
  for (auto& r : records) c.add(r.cell, std::move(r.moves), r.rank);
  return c;
}

}  // namespace

ReachOutcome reach_m(const TransitionTable& table, const CellSet& target, const CellSet& safe,
                     std::size_t m, UnexploredPolicy policy) {
  check_grid(table, target, "reach_m");
  check_grid(table, safe, "reach_m");
  if (m == 0) throw ContractViolation("reach_m: m must be positive");
  ReachOutcome out;
  out.won = target;
  std::vector<RankRecord> records;
  std::tie(out.fixed_point, out.iterations) =
      reach_steps(table, out.won, safe, m, policy, 0, records);
  out.controller = ranked_controller(table.grid_layer(), table.cell_count(), std::move(records));
  return out;
}

ReachOutcome reach_inf(const TransitionTable& table, const CellSet& target, const CellSet& safe,
                       std::size_t chunk, UnexploredPolicy policy) {
  check_grid(table, target, "reach_inf");
  check_grid(table, safe, "reach_inf");
  if (chunk == 0) throw ContractViolation("reach_inf: chunk must be positive");
  ReachOutcome out;
  out.won = target;
  std::vector<RankRecord> records;
  while (!out.fixed_point) {
    const auto [fp, its] = reach_steps(table, out.won, safe, chunk, policy,
                                       static_cast<std::uint32_t>(out.iterations), records);
    out.fixed_point = fp;
    out.iterations += its;
  }
  out.controller = ranked_controller(table.grid_layer(), table.cell_count(), std::move(records));
  return out;
}

// ----------------------------------------------------------------------------
// Synthesizer

std::size_t SynthesisStats::total_transitions() const {
  std::size_t t = 0;
  for (const auto& l : layers) t += l.transitions;
  return t;
}

Synthesizer::Synthesizer(const TransitionSource& source, SpecSets spec, SynthesisOptions options)
    : source_(&source), stack_(&source.stack()), spec_(std::move(spec)), options_(options) {
  const int L = stack_->layers();
  if (spec_.safe.size() != static_cast<std::size_t>(L) ||
      spec_.target.size() != static_cast<std::size_t>(L))
    throw ContractViolation("synthesizer: spec sets do not cover every layer");
  for (int l = 1; l <= L; ++l) {
    if (spec_.safe_at(l).layer() != l || spec_.safe_at(l).size() != stack_->cell_count(l) ||
        spec_.target_at(l).layer() != l || spec_.target_at(l).size() != stack_->cell_count(l))
      throw ContractViolation("synthesizer: spec sets do not match the layer stack");
    if (!spec_.target_at(l).is_subset_of(spec_.safe_at(l)))
      throw ContractViolation("synthesizer: target cells outside the safe set");
  }
  if (options_.m == 0) throw ContractViolation("synthesizer: m must be positive");
  for (int l = 1; l <= L; ++l)
    main_.emplace_back(*stack_, l, TableKind::Main, source.num_inputs());
  aux_.resize(static_cast<std::size_t>(L));
  stats_.layers.resize(static_cast<std::size_t>(L));
}

const TransitionTable& Synthesizer::main_table(int layer) const {
  stack_->check_layer(layer);
  return main_[static_cast<std::size_t>(layer - 1)];
}

TransitionTable& Synthesizer::main_table(int layer) {
  stack_->check_layer(layer);
  return main_[static_cast<std::size_t>(layer - 1)];
}

const TransitionTable& Synthesizer::aux_table(int layer) {
  stack_->check_layer(layer);
  auto& slot = aux_[static_cast<std::size_t>(layer - 1)];
  if (!slot) {
    const auto t0 = Clock::now();
    slot.emplace(*stack_, layer, TableKind::Auxiliary, source_->num_inputs());
    const int L = stack_->layers();
    slot->compute_transitions(*source_, CellSet::full(L, stack_->cell_count(L)), options_.threads);
    auto& st = layer_stats(layer);
    st.aux_transitions = slot->explored_count();
    st.abstraction_seconds += seconds_since(t0);
  }
  return *slot;
}

void Synthesizer::explore(int layer, const CellSet& region) {
  const auto t0 = Clock::now();
  auto& table = main_table(layer);
  table.compute_transitions(*source_, region, options_.threads);
  auto& st = layer_stats(layer);
  st.transitions = table.explored_count();
  st.abstraction_seconds += seconds_since(t0);
}

void Synthesizer::populate_all() {
  for (int l = 1; l <= stack_->layers(); ++l) explore(l, spec_.safe_at(l));
}

void Synthesizer::finish(SynthesisResult& r, double seconds) {
  for (int l = 1; l <= stack_->layers(); ++l) {
    auto& st = layer_stats(l);
    st.transitions = main_table(l).explored_count();
    st.domain_cells = 0;
  }
  for (const auto& stage : r.controller.stages) layer_stats(stage.layer).domain_cells += stage.cells.size();
  stats_.total_seconds += seconds;
  r.stats = stats_;
}

SynthesisResult Synthesizer::safe_iteration(bool lazy) {
  const auto t_start = Clock::now();
  const int L = stack_->layers();
  SynthesisResult r;
  CellSet psi = spec_.safe_at(1);
  if (psi.empty()) r.warnings.push_back("safe set is empty at layer 1; winning set is empty");
  r.history.push_back(psi);
  std::vector<CellSet> domains(static_cast<std::size_t>(L));
  std::size_t visits = 0;
  while (true) {
    ++stats_.rounds;
    CellSet ups = CellSet::of(*stack_, 1);
    for (int l = L; l >= 1; --l) {
      if (++visits > options_.recursion_cap)
        throw NonTermination("safe iteration exceeded the recursion cap of " +
                             std::to_string(options_.recursion_cap) + " layer visits");
      auto& st = layer_stats(l);
      ++st.iterations;
      const CellSet psi_l = gamma_down(*stack_, psi, l);
      const std::size_t explored_before = main_table(l).explored_count();
      CellSet w;
      if (lazy) {
        const CellSet frontier = psi_l - gamma_down(*stack_, ups, l);
        explore(l, frontier);
        const auto t0 = Clock::now();
        w = cpre(main_table(l), psi_l, frontier, UnexploredPolicy::Throw) |
            cpre(main_table(l), psi_l, psi_l - frontier, UnexploredPolicy::Skip);
        w &= spec_.safe_at(l);
        st.synthesis_seconds += seconds_since(t0);
      } else {
        const auto t0 = Clock::now();
        w = safe_step(main_table(l), psi_l, spec_.safe_at(l));
        st.synthesis_seconds += seconds_since(t0);
      }
      ++st.cpre_evaluations;
      const CellSet w1 = gamma_down(*stack_, w, 1);
      const std::size_t added = (w1 - ups).count();
      ups |= w1;
      r.stats.trace.push_back({l, 1, added, false, main_table(l).explored_count() - explored_before});
      stats_.trace.push_back(r.stats.trace.back());
      domains[static_cast<std::size_t>(l - 1)] = std::move(w);
    }
    if (!ups.is_subset_of(r.history.back()))
      throw ContractViolation("safe iteration: layer-1 winning set grew between rounds");
    r.history.push_back(ups);
    if (ups == psi) break;
    psi = std::move(ups);
  }
  r.controller.kind = SpecKind::Safe;
  r.controller.stack = *stack_;
  for (int l = L; l >= 1; --l) {
    const auto t0 = Clock::now();
    LayerController c = safety_controller(main_table(l), domains[static_cast<std::size_t>(l - 1)],
                                          gamma_down(*stack_, psi, l));
    c.stage = r.controller.stages.size();
    r.controller.stages.push_back(std::move(c));
    layer_stats(l).synthesis_seconds += seconds_since(t0);
  }
  r.winning = std::move(psi);
  finish(r, seconds_since(t_start));
  return r;
}

CellSet Synthesizer::expand_abstraction_m(const CellSet& won, int layer) {
  const int L = stack_->layers();
  if (layer < 1 || layer >= L)
    throw ContractViolation("expand_abstraction_m: layer must lie in [1; L-1]");
  if (won.layer() != 1) throw ContractViolation("expand_abstraction_m: expects a layer-1 set");
  const TransitionTable& aux = aux_table(layer);
  const auto t0 = Clock::now();
  const CellSet w1 = upre_m(aux, gamma_up(*stack_, won, L), options_.m) -
                     gamma_down(*stack_, won, L);
  CellSet w2 = gamma_down(*stack_, w1, layer);
  layer_stats(layer).synthesis_seconds += seconds_since(t0);
  explore(layer, w2 & spec_.safe_at(layer));
  return w2;
}

SynthesisResult Synthesizer::reach_iteration(bool lazy) {
  const auto t_start = Clock::now();
  const int L = stack_->layers();
  SynthesisResult r;
  r.controller.kind = SpecKind::Reach;
  r.controller.stack = *stack_;
  const CellSet psi = spec_.safe_at(1);
  CellSet ups = spec_.target_at(1);
  r.history.push_back(ups);
  if (ups.empty()) {
    r.warnings.push_back("target set is empty at layer 1; winning set is empty");
    r.winning = std::move(ups);
    finish(r, seconds_since(t_start));
    return r;
  }
  int l = L;
  std::size_t visits = 0;
  while (true) {
    if (++visits > options_.recursion_cap) {
      std::string trace;
      const std::size_t from = r.stats.trace.size() > 16 ? r.stats.trace.size() - 16 : 0;
      for (std::size_t i = from; i < r.stats.trace.size(); ++i)
        trace += " (" + std::to_string(r.stats.trace[i].layer) + "," +
                 std::to_string(r.stats.trace[i].iterations) + ")";
      throw NonTermination("reach iteration exceeded the recursion cap of " +
                           std::to_string(options_.recursion_cap) + " visits; last visits:" + trace);
    }
    auto& st = layer_stats(l);
    ++st.iterations;
    const std::size_t explored_before = main_table(l).explored_count();
    const CellSet psi_l = gamma_down(*stack_, psi, l);
    const CellSet ups_l = gamma_down(*stack_, ups, l);
    ReachOutcome out;
    if (l == L) {
      if (lazy) explore(L, psi_l);
      const auto t0 = Clock::now();
      out = reach_inf(main_table(L), ups_l, psi_l, options_.m);
      st.synthesis_seconds += seconds_since(t0);
    } else {
      CellSet frontier;
      if (lazy) frontier = expand_abstraction_m(ups, l);
      const auto t0 = Clock::now();
      out = reach_m(main_table(l), ups_l, psi_l, options_.m,
                    lazy ? UnexploredPolicy::Skip : UnexploredPolicy::Throw);
      st.synthesis_seconds += seconds_since(t0);
      if (lazy) {
        ++stats_.frontier_checks;
        if (!(out.won - ups_l).is_subset_of(frontier))
          throw ContractViolation("frontier sufficiency violated at layer " + std::to_string(l) +
                                  ": a newly won cell was not in the expanded frontier");
      }
    }
    st.cpre_evaluations += out.iterations;
    const CellSet won1 = gamma_down(*stack_, out.won, 1);
    const std::size_t added = (won1 - ups).count();
    if (!out.controller.cells.empty()) {
      out.controller.stage = r.controller.stages.size();
      r.controller.stages.push_back(std::move(out.controller));
    }
    ups |= won1;
    r.history.push_back(ups);
    r.stats.trace.push_back({l, out.iterations, added, out.fixed_point,
                             main_table(l).explored_count() - explored_before});
    stats_.trace.push_back(r.stats.trace.back());
    if (l == L) {
      if (L == 1) break;
      l = L - 1;
    } else if (out.fixed_point) {
      if (l == 1) break;
      --l;
    } else {
      ++l;
    }
  }
  r.winning = std::move(ups);
  finish(r, seconds_since(t_start));
  return r;
}

SynthesisResult Synthesizer::single_layer(SpecKind kind) {
  const auto t_start = Clock::now();
  SynthesisResult r;
  r.controller.kind = kind;
  r.controller.stack = *stack_;
  explore(1, spec_.safe_at(1));
  auto& st = layer_stats(1);
  ++st.iterations;
  const auto t0 = Clock::now();
  if (kind == SpecKind::Safe) {
    if (spec_.safe_at(1).empty()) r.warnings.push_back("safe set is empty at layer 1");
    SafeFixpoint fp = safe_fixpoint(main_table(1), spec_.safe_at(1));
    st.cpre_evaluations += fp.iterations;
    r.history = {spec_.safe_at(1), fp.winning};
    r.stats.trace.push_back({1, fp.iterations, fp.winning.count(), true, 0});
    r.winning = std::move(fp.winning);
    r.controller.stages.push_back(std::move(fp.controller));
  } else {
    if (spec_.target_at(1).empty()) r.warnings.push_back("target set is empty at layer 1");
    ReachOutcome out = reach_inf(main_table(1), spec_.target_at(1), spec_.safe_at(1), options_.m);
    st.cpre_evaluations += out.iterations;
    r.history = {spec_.target_at(1), out.won};
    r.stats.trace.push_back(
        {1, out.iterations, (out.won - spec_.target_at(1)).count(), true, 0});
    r.winning = std::move(out.won);
    if (!out.controller.cells.empty()) r.controller.stages.push_back(std::move(out.controller));
  }
  st.synthesis_seconds += seconds_since(t0);
  stats_.trace.push_back(r.stats.trace.back());
  finish(r, seconds_since(t_start));
  return r;
}

SynthesisResult eager_safe(const TransitionSource& source, const SpecSets& spec,
                           SynthesisOptions options) {
  Synthesizer s(source, spec, options);
  s.populate_all();
  return s.safe_iteration(false);
}

SynthesisResult lazy_safe(const TransitionSource& source, const SpecSets& spec,
                          SynthesisOptions options) {
  Synthesizer s(source, spec, options);
  return s.safe_iteration(true);
}

SynthesisResult eager_reach(const TransitionSource& source, const SpecSets& spec,
                            SynthesisOptions options) {
  Synthesizer s(source, spec, options);
  s.populate_all();
  return s.reach_iteration(false);
}

SynthesisResult lazy_reach(const TransitionSource& source, const SpecSets& spec,
                           SynthesisOptions options) {
  Synthesizer s(source, spec, options);
  return s.reach_iteration(true);
}

SynthesisResult single_layer(const TransitionSource& source, const SpecSets& spec, SpecKind kind,
                             SynthesisOptions options) {
  Synthesizer s(source, spec, options);
  return s.single_layer(kind);
}

}  // namespace msyn
