#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "msyn/error.hpp"
#include "msyn/synthesis.hpp"
#include "support.hpp"

using namespace msyn;
using namespace msyn::testing;

namespace {

/// Transitions given by a plain function of (grid layer, cell, input).
class FnSource final : public TransitionSource {
 public:
  using Fn = std::function<Successors(int, std::size_t, std::size_t)>;
  FnSource(LayerStack stack, std::size_t inputs, Fn fn)
      : stack_(std::move(stack)), inputs_(inputs), fn_(std::move(fn)) {}
  const LayerStack& stack() const override { return stack_; }
  std::size_t num_inputs() const override { return inputs_; }
  Successors compute(int grid_layer, int, std::size_t cell, std::size_t input) const override {
    return fn_(grid_layer, cell, input);
  }

 private:
  LayerStack stack_;
  std::size_t inputs_;
  Fn fn_;
};

LayerStack line(std::size_t cells, int layers = 1) {
  return LayerStack({0.0}, {static_cast<double>(cells)}, {1.0}, 1.0, layers);
}

TransitionTable full_table(const TransitionSource& src, int layer) {
  TransitionTable t(src.stack(), layer, TableKind::Main, src.num_inputs());
  t.compute_transitions(src, CellSet::full(layer, src.stack().cell_count(layer)));
  return t;
}

CellSet set_of(const LayerStack& s, int layer, std::initializer_list<std::size_t> cells) {
  return from_cells(s, layer, Cells(cells));
}

// Two states a = 0, b = 1 with F(a) = {a}, F(b) = {a, b}.
FnSource two_state() {
  return FnSource(line(2), 1, [](int, std::size_t c, std::size_t) {
    return c == 0 ? Successors{false, {0}} : Successors{false, {0, 1}};
  });
}

// Chain 0 -> 1 -> 2 -> 3 -> 4 -> 4.
FnSource drift_chain() {
  return FnSource(line(5), 1, [](int, std::size_t c, std::size_t) {
    return Successors{false, {static_cast<CellIndex>(std::min<std::size_t>(c + 1, 4))}};
  });
}

SpecSets spec_for(const LayerStack& s, const CellSet& safe1, const CellSet& target1) {
  SpecSets spec;
  for (int l = 1; l <= s.layers(); ++l) {
    spec.safe.push_back(gamma_down(s, safe1, l));
    spec.target.push_back(gamma_down(s, target1, l));
  }
  spec.obstacle_coarse = CellSet::of(s, s.layers());
  return spec;
}

/// Every recorded input keeps the successors inside `within` (layer of the stage).
void check_closure(const LayerController& c, const TransitionTable& t, const CellSet& within) {
  for (std::size_t k = 0; k < c.cells.size(); ++k) {
    REQUIRE_FALSE(c.moves[k].empty());
    for (auto u : c.moves[k]) {
      const auto lk = t.lookup(c.cells[k], u);
      REQUIRE(lk.state == EntryState::Computed);
      for (auto s : lk.cells) CHECK(within.contains(s));
    }
  }
}

}  // namespace

TEST_CASE("predecessors on the two-state table") {
  const auto src = two_state();
  const auto& s = src.stack();
  const auto t = full_table(src, 1);
  CHECK(to_cells(cpre(t, set_of(s, 1, {0}))) == Cells{0});
  CHECK(cpre(t, CellSet::of(s, 1)).empty());
  CHECK(to_cells(cpre(t, CellSet::full(1, 2))) == Cells{0, 1});
  CHECK(to_cells(upre(t, set_of(s, 1, {0}))) == Cells{0, 1});
  CHECK(upre(t, CellSet::of(s, 1)).empty());
  const CellSet safe = CellSet::full(1, 2);
  CHECK(safe_step(t, safe, safe) == safe);
  CHECK(to_cells(safe_step(t, set_of(s, 1, {0}), safe)) == Cells{0});
  CHECK(safe_step(t, CellSet::of(s, 1), safe).empty());
}

TEST_CASE("cpre of the full grid keeps cells with an unblocked input") {
  std::mt19937_64 rng(8);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LayerStack s({0.0, 0.0}, {8.0, 8.0}, {1.0, 1.0}, 0.1, 1);
    const SyntheticSource src(s, 2, seed, 0.3);
    const auto t = full_table(src, 1);
    Cells expect;
    for (std::size_t c = 0; c < s.cell_count(1); ++c)
      for (std::size_t u = 0; u < 2; ++u)
        if (!src.fine(c, u).blocked) expect.insert(c);
    CHECK(to_cells(cpre(t, CellSet::full(1, s.cell_count(1)))) == expect);

    const ExplicitGame g = ExplicitGame::from(src, 1);
    for (int k = 0; k < 5; ++k) {
      const CellSet target = random_set(s, 1, 0.6, rng);
      Cells oracle;
      for (std::size_t c = 0; c < g.cells; ++c)
        for (std::size_t u = 0; u < g.inputs; ++u)
          if (g.good(c, u, to_cells(target))) oracle.insert(c);
      const CellSet cp = cpre(t, target);
      CHECK(to_cells(cp) == oracle);
      CHECK(cp.is_subset_of(upre(t, target)));
    }
  }
}

TEST_CASE("unexplored entries are a contract violation unless skipped") {
  const auto src = two_state();
  const auto& s = src.stack();
  TransitionTable t(s, 1, TableKind::Main, 1);
  t.compute_transition(src, 0, 0);
  const CellSet all = CellSet::full(1, 2);
  CHECK_THROWS_AS(cpre(t, all, all, UnexploredPolicy::Throw), ContractViolation);
  CHECK(to_cells(cpre(t, all, all, UnexploredPolicy::Skip)) == Cells{0});
  CHECK_THROWS_AS(upre(t, all), ContractViolation);
}

TEST_CASE("upre_m on a drift chain") {
  const auto src = drift_chain();
  const auto& s = src.stack();
  const auto t = full_table(src, 1);
  const CellSet target = set_of(s, 1, {4});
  CHECK(upre_m(t, target, 1) == upre(t, target));
  CHECK(to_cells(upre_m(t, target, 3)) == Cells{1, 2, 3, 4});
  for (std::size_t m = 1; m < 6; ++m) CHECK(upre_m(t, target, m).is_subset_of(upre_m(t, target, m + 1)));
  CHECK_THROWS_AS(upre_m(t, target, 0), ContractViolation);
}

TEST_CASE("reach_m on a drift chain") {
  const auto src = drift_chain();
  const auto& s = src.stack();
  const auto t = full_table(src, 1);
  const CellSet safe = CellSet::full(1, 5);
  const CellSet target = set_of(s, 1, {4});

  const ReachOutcome two = reach_m(t, target, safe, 2);
  CHECK(to_cells(two.won) == Cells{2, 3, 4});
  CHECK_FALSE(two.fixed_point);
  CHECK(two.controller.ranked);
  CHECK(two.controller.cells == std::vector<CellIndex>{2, 3});
  CHECK(two.controller.ranks == std::vector<std::uint32_t>{1, 0});

  const ReachOutcome all = reach_inf(t, target, safe);
  CHECK(all.won == safe);
  CHECK(all.fixed_point);
  CHECK(all.controller.ranks == std::vector<std::uint32_t>{3, 2, 1, 0});

  const ReachOutcome none = reach_m(t, CellSet::of(s, 1), safe, 3);
  CHECK(none.won.empty());
  CHECK(none.controller.cells.empty());

  const ReachOutcome fixed = reach_m(t, safe, safe, 2);
  CHECK(fixed.won == safe);
  CHECK(fixed.fixed_point);
}

TEST_CASE("single-layer solvers match brute force") {
  std::mt19937_64 rng(21);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t nx = std::uniform_int_distribution<std::size_t>(3, 8)(rng);
    const LayerStack s({0.0, 0.0}, {static_cast<double>(nx), 8.0}, {1.0, 1.0}, 0.1, 1);
    const SyntheticSource src(s, 1 + seed % 3, seed, 0.1, 1);
    const auto t = full_table(src, 1);
    const ExplicitGame g = ExplicitGame::from(src, 1);
    const CellSet safe = random_set(s, 1, 0.8, rng);
    const CellSet target = random_set(s, 1, 0.15, rng) & safe;

    const SafeFixpoint fp = safe_fixpoint(t, safe);
    CHECK(to_cells(fp.winning) == g.safety(to_cells(safe)));
    CHECK(fp.controller.domain == fp.winning);
    check_closure(fp.controller, t, fp.winning);
    // Every input keeping the state in the winning set is recorded.
    for (std::size_t k = 0; k < fp.controller.cells.size(); ++k) {
      std::vector<std::uint32_t> expect;
      for (std::uint32_t u = 0; u < g.inputs; ++u)
        if (g.good(fp.controller.cells[k], u, to_cells(fp.winning))) expect.push_back(u);
      CHECK(fp.controller.moves[k] == expect);
    }

    std::map<std::size_t, std::size_t> rank;
    const Cells attr = g.attractor(to_cells(target), to_cells(safe), &rank);
    for (std::size_t chunk : {1, 2, 5}) {
      const ReachOutcome out = reach_inf(t, target, safe, chunk);
      CHECK(to_cells(out.won) == attr);
      REQUIRE(out.controller.cells.size() == rank.size());
      for (std::size_t k = 0; k < out.controller.cells.size(); ++k) {
        const auto c = out.controller.cells[k];
        CHECK(out.controller.ranks[k] == rank.at(c));
        // Successors of every recorded input lie strictly closer to the target.
        for (auto u : out.controller.moves[k])
          for (auto sc : t.lookup(c, u).cells)
            CHECK((target.contains(sc) || (rank.count(sc) && rank.at(sc) < rank.at(c))));
      }
    }
  }
}

TEST_CASE("safe fixpoint edge cases") {
  const LayerStack s = line(6);
  const FnSource blocked(s, 2, [](int, std::size_t, std::size_t) { return Successors{true, {}}; });
  CHECK(safe_fixpoint(full_table(blocked, 1), CellSet::full(1, 6)).winning.empty());

  const FnSource loops(s, 2, [](int, std::size_t c, std::size_t) {
    return Successors{false, {static_cast<CellIndex>(c)}};
  });
  const SafeFixpoint fp = safe_fixpoint(full_table(loops, 1), CellSet::full(1, 6));
  CHECK(fp.winning == CellSet::full(1, 6));
  for (const auto& m : fp.controller.moves) CHECK(m == std::vector<std::uint32_t>{0, 1});

  // Outward drift: only cells that can stay put survive.
  const FnSource drift(s, 1, [](int, std::size_t c, std::size_t) {
    if (c == 2) return Successors{false, {2}};
    return c + 1 < 6 ? Successors{false, {static_cast<CellIndex>(c + 1)}} : Successors{true, {}};
  });
  CHECK(to_cells(safe_fixpoint(full_table(drift, 1), CellSet::full(1, 6)).winning) == Cells{0, 1, 2});
}

TEST_CASE("multi-layer safety agrees with the single-layer fixed point") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int layers = 2 + static_cast<int>(seed % 2);
    auto inst = random_instance(seed + 100, layers);
    const SynthesisResult single = single_layer(inst.source, inst.spec, SpecKind::Safe);
    Synthesizer eager(inst.source, inst.spec);
    eager.populate_all();
    const SynthesisResult e = eager.safe_iteration(false);
    Synthesizer lazy(inst.source, inst.spec);
    const SynthesisResult z = lazy.safe_iteration(true);
    CAPTURE(seed);
    CHECK(e.winning == single.winning);
    CHECK(z.winning == single.winning);
    for (std::size_t i = 1; i < z.history.size(); ++i) CHECK(z.history[i].is_subset_of(z.history[i - 1]));
    for (int l = 1; l <= layers; ++l)
      CHECK(lazy.main_table(l).explored_count() <= eager.main_table(l).explored_count());
    // Controller closure against the final winning set.
    for (const auto& st : z.controller.stages)
      check_closure(st, lazy.main_table(st.layer), gamma_down(inst.stack, z.winning, st.layer));
    CHECK(z.controller.domain_layer1() == z.winning);
  }
}

TEST_CASE("multi-layer reachability agrees with the single-layer attractor") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int layers = 2 + static_cast<int>(seed % 2);
    auto inst = random_instance(seed + 500, layers);
    const SynthesisResult single = single_layer(inst.source, inst.spec, SpecKind::Reach);
    const ExplicitGame g = ExplicitGame::from(inst.source, 1);
    CHECK(to_cells(single.winning) ==
          g.attractor(to_cells(inst.spec.target_at(1)), to_cells(inst.spec.safe_at(1))));
    for (std::size_t m : {1, 2, 3}) {
      SynthesisOptions opt;
      opt.m = m;
      Synthesizer eager(inst.source, inst.spec, opt);
      eager.populate_all();
      const SynthesisResult e = eager.reach_iteration(false);
      Synthesizer lazy(inst.source, inst.spec, opt);
      const SynthesisResult z = lazy.reach_iteration(true);
      CAPTURE(seed);
      CAPTURE(m);
      CHECK(e.winning == single.winning);
      CHECK(z.winning == single.winning);
      for (std::size_t i = 1; i < z.history.size(); ++i) CHECK(z.history[i - 1].is_subset_of(z.history[i]));
      for (int l = 1; l <= layers; ++l)
        CHECK(lazy.main_table(l).explored_count() <= eager.main_table(l).explored_count());
      CHECK((z.controller.domain_layer1() | inst.spec.target_at(1)) == z.winning);
    }
  }
}

TEST_CASE("frontier expansion is confined to the rim of the winning set") {
  // Cooperative spread to both neighbours at every layer.
  const LayerStack s = line(16, 2);
  const FnSource spread(s, 1, [&s](int layer, std::size_t c, std::size_t) {
    const std::size_t n = s.cell_count(layer);
    Successors out;
    for (std::size_t d = c == 0 ? c : c - 1; d <= std::min(c + 1, n - 1); ++d)
      out.cells.push_back(static_cast<CellIndex>(d));
    return out;
  });
  const CellSet safe = CellSet::full(1, 16);
  CellSet won = CellSet::of(s, 1);
  for (std::size_t c = 4; c < 12; ++c) won.insert(c);

  Synthesizer syn(spread, spec_for(s, safe, won));
  CHECK(syn.expand_abstraction_m(CellSet::of(s, 1), 1).empty());
  CHECK(syn.main_table(1).explored_count() == 0);

  SynthesisOptions one;
  one.m = 1;
  Synthesizer rim(spread, spec_for(s, safe, won), one);
  const CellSet w2 = rim.expand_abstraction_m(won, 1);
  CHECK(to_cells(w2) == Cells{2, 3, 12, 13});
  CHECK(rim.main_table(1).explored_count() == 4 * spread.num_inputs());
  CHECK_THROWS_AS(rim.expand_abstraction_m(won, 2), ContractViolation);
}

TEST_CASE("frontier exploration grows with m") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    auto inst = random_instance(seed + 900, 2);
    std::mt19937_64 rng(seed);
    const CellSet won = random_set(inst.stack, 1, 0.2, rng) & inst.spec.safe_at(1);
    std::size_t prev = 0;
    for (std::size_t m = 1; m <= 4; ++m) {
      SynthesisOptions opt;
      opt.m = m;
      Synthesizer syn(inst.source, inst.spec, opt);
      syn.expand_abstraction_m(won, 1);
      CHECK(syn.main_table(1).explored_count() >= prev);
      prev = syn.main_table(1).explored_count();
    }
  }
}

TEST_CASE("containment of cooperative predecessors across layers") {
  std::mt19937_64 rng(31);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto inst = random_instance(seed + 300, 3);
    const auto& s = inst.stack;
    Synthesizer syn(inst.source, inst.spec);
    for (int l = 1; l <= 3; ++l) syn.explore(l, CellSet::full(l, s.cell_count(l)));
    for (int l = 1; l < 3; ++l) {
      const TransitionTable& aux = syn.aux_table(l);
      for (int k = 0; k < 5; ++k) {
        const CellSet ul = random_set(s, l, 0.1, rng);
        const CellSet uL = gamma_up(s, ul, 3) | random_set(s, 3, 0.1, rng);
        for (std::size_t m = 1; m <= 3; ++m)
          CHECK(upre_m(syn.main_table(l), ul, m).is_subset_of(gamma_down(s, upre_m(aux, uL, m), l)));
      }
    }
  }
}

TEST_CASE("degenerate protocols") {
  SUBCASE("empty target") {
    auto inst = random_instance(7, 2);
    inst.spec.target = {CellSet::of(inst.stack, 1), CellSet::of(inst.stack, 2)};
    const SynthesisResult r = lazy_reach(inst.source, inst.spec);
    CHECK(r.winning.empty());
    CHECK(r.controller.stages.empty());
    CHECK_FALSE(r.warnings.empty());
  }
  SUBCASE("one layer behaves like the single-layer solvers") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto inst = random_instance(seed + 40, 1);
      const TransitionTable t = full_table(inst.source, 1);
      const SafeFixpoint fp = safe_fixpoint(t, inst.spec.safe_at(1));
      CHECK(lazy_safe(inst.source, inst.spec).winning == fp.winning);
      CHECK(eager_safe(inst.source, inst.spec).winning == fp.winning);
      const ReachOutcome ro = reach_inf(t, inst.spec.target_at(1), inst.spec.safe_at(1));
      const SynthesisResult lr = lazy_reach(inst.source, inst.spec);
      CHECK(lr.winning == ro.won);
      CHECK(eager_reach(inst.source, inst.spec).winning == ro.won);
      REQUIRE(lr.controller.stages.size() == (ro.controller.cells.empty() ? 0U : 1U));
      if (!ro.controller.cells.empty()) CHECK(lr.controller.stages[0].ranks == ro.controller.ranks);
    }
  }
  SUBCASE("self loops win the whole safe set in one round") {
    const LayerStack s({0.0, 0.0}, {8.0, 8.0}, {1.0, 1.0}, 0.1, 3);
    const FnSource loops(s, 1, [](int, std::size_t c, std::size_t) {
      return Successors{false, {static_cast<CellIndex>(c)}};
    });
    std::mt19937_64 rng(1);
    const CellSet safe = random_set(s, 1, 0.7, rng);
    const SynthesisResult r = lazy_safe(loops, spec_for(s, safe, CellSet::of(s, 1)));
    CHECK(r.winning == safe);
    CHECK(r.stats.rounds == 1);
  }
  SUBCASE("recursion cap") {
    auto inst = random_instance(3, 3);
    SynthesisOptions opt;
    opt.recursion_cap = 1;
    CHECK_THROWS_AS(lazy_reach(inst.source, inst.spec, opt), NonTermination);
    CHECK_THROWS_AS(lazy_safe(inst.source, inst.spec, opt), NonTermination);
  }
  SUBCASE("spec validation") {
    auto inst = random_instance(3, 2);
    SpecSets bad = inst.spec;
    bad.target[0] = CellSet::full(1, inst.stack.cell_count(1));
    if (!(bad.target[0].is_subset_of(bad.safe[0]))) CHECK_THROWS_AS(Synthesizer(inst.source, bad), ContractViolation);
    bad = inst.spec;
    bad.safe.pop_back();
    CHECK_THROWS_AS(Synthesizer(inst.source, bad), ContractViolation);
  }
}

TEST_CASE("spec sets from geometry") {
  const LayerStack s({0.0, 0.0}, {8.0, 8.0}, {1.0, 1.0}, 0.1, 2);
  ProblemGeometry g;
  g.obstacles = {{{3.0, 3.0}, {4.5, 4.5}}};
  g.targets = {{{0.0, 0.0}, {2.0, 3.0}}};
  const SpecSets spec = build_spec_sets(s, g);
  // The closed obstacle box meets layer-1 cells 3 and 4 in each axis.
  CHECK(spec.safe_at(1).count() == 64 - 4);
  CHECK(spec.target_at(1).count() == 6);
  CHECK(spec.target_at(2).count() == 1);
  CHECK(spec.safe_at(2).count() == 16 - 4);
  for (int l = 1; l <= 2; ++l) CHECK(spec.target_at(l).is_subset_of(spec.safe_at(l)));
  CHECK(gamma_down(s, spec.safe_at(2), 1).is_subset_of(spec.safe_at(1)));
  CHECK(spec.obstacle_coarse.count() == 4);
}
