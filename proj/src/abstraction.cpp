#include "msyn/abstraction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include "msyn/error.hpp"

namespace msyn {

GrowthBoundSource::GrowthBoundSource(const ControlSystem& sys, const LayerStack& stack,
                                     int substeps)
    : sys_(&sys), stack_(&stack), substeps_(substeps) {
  sys.validate();
  if (sys.dim != stack.dim())
    throw ContractViolation("growth-bound source: system and grid dimensions differ");
  if (substeps < 1) throw ContractViolation("growth-bound source: substeps must be >= 1");
  growth_.reserve(sys.inputs.size());
  for (const auto& u : sys.inputs) growth_.push_back(sys.growth_matrix(u));
}

Successors GrowthBoundSource::compute(int grid_layer, int time_layer, std::size_t cell,
                                      std::size_t input) const {
  const ReachBox box = over_approx_reach(*sys_, stack_->cell_box(grid_layer, cell),
                                         sys_->inputs.at(input), growth_[input],
                                         stack_->tau(time_layer),
                                         LayerStack::substeps(time_layer, substeps_));
  return successors_of_box(*stack_, grid_layer, box);
}

Successors successors_of_box(const LayerStack& stack, int layer, const ReachBox& box) {
  const std::size_t n = stack.dim();
  const auto& ext = stack.extent(layer);
  const Vector eta = stack.eta(layer);
  Successors out;
  out.blocked = !stack.inside_region(box);
  std::vector<std::uint32_t> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Cell k meets [a, b) iff lower + k eta < b and lower + (k+1) eta > a.
    const double a = (box.lower[i] - stack.lower()[i]) / eta[i];
    const double b = (box.upper[i] - stack.lower()[i]) / eta[i];
    double first = std::floor(a);
    double last = std::ceil(b) - 1.0;
    if (last < first) last = first;  // degenerate box: the cell holding the point
    first = std::max(first, 0.0);
    last = std::min(last, static_cast<double>(ext[i]) - 1.0);
    if (first > last) return out;  // entirely outside Y
    lo[i] = static_cast<std::uint32_t>(first);
    hi[i] = static_cast<std::uint32_t>(last);
  }
  std::vector<std::uint32_t> idx(lo);
  while (true) {
    out.cells.push_back(static_cast<CellIndex>(stack.linearize(layer, idx)));
    std::size_t i = 0;
    for (; i < n; ++i) {
      if (idx[i] < hi[i]) {
        ++idx[i];
        break;
      }
      idx[i] = lo[i];
    }
    if (i == n) break;
  }
  std::sort(out.cells.begin(), out.cells.end());
  return out;
}

// ----------------------------------------------------------------------------

TransitionTable::TransitionTable(const LayerStack& stack, int layer, TableKind kind,
                                 std::size_t num_inputs)
    : layer_(layer),
      grid_layer_(kind == TableKind::Main ? layer : stack.layers()),
      kind_(kind),
      cells_(stack.cell_count(kind == TableKind::Main ? layer : stack.layers())),
      inputs_(num_inputs),
      state_(cells_ * num_inputs, EntryState::Unexplored),
      succ_(cells_ * num_inputs) {
  stack.check_layer(layer);
  if (num_inputs == 0) throw ContractViolation("transition table: no inputs");
}

void TransitionTable::check_cell(std::size_t cell, std::size_t input) const {
  if (cell >= cells_ || input >= inputs_)
    throw ContractViolation("transition table: (cell, input) out of range");
}

Lookup TransitionTable::lookup(std::size_t cell, std::size_t input) const {
  check_cell(cell, input);
  const std::size_t slot = cell * inputs_ + input;
  return {state_[slot], succ_[slot]};
}

void TransitionTable::store(std::size_t slot, Successors&& s) {
  state_[slot] = s.blocked ? EntryState::Blocked : EntryState::Computed;
  succ_[slot] = std::move(s.cells);
  ++explored_;
}

bool TransitionTable::compute_transition(const TransitionSource& source, std::size_t cell,
                                         std::size_t input) {
  check_cell(cell, input);
  const std::size_t slot = cell * inputs_ + input;
  if (state_[slot] != EntryState::Unexplored) return false;
  store(slot, source.compute(grid_layer_, layer_, cell, input));
  return true;
}

std::size_t TransitionTable::compute_transitions(const TransitionSource& source,
                                                 const CellSet& region, unsigned threads) {
  if (region.layer() != grid_layer_ || region.size() != cells_)
    throw ContractViolation("compute_transitions: region is not a cell set of the table's grid");
  if (source.num_inputs() != inputs_)
    throw ContractViolation("compute_transitions: source has a different input count");
  std::vector<std::size_t> todo;
  region.for_each([&](std::size_t cell) {
    for (std::size_t u = 0; u < inputs_; ++u)
      if (state_[cell * inputs_ + u] == EntryState::Unexplored) todo.push_back(cell * inputs_ + u);
  });
  if (todo.empty()) return 0;
  std::vector<Successors> results(todo.size());
  auto work = [&](std::size_t k) {
    const std::size_t slot = todo[k];
    results[k] = source.compute(grid_layer_, layer_, slot / inputs_, slot % inputs_);
  };
  const unsigned workers =
      std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(todo.size() / 64 + 1)));
  if (workers == 1) {
    for (std::size_t k = 0; k < todo.size(); ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        try {
          for (std::size_t k; (k = next.fetch_add(1)) < todo.size();) work(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = todo.size();
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  for (std::size_t k = 0; k < todo.size(); ++k) store(todo[k], std::move(results[k]));
  return todo.size();
}

CellSet TransitionTable::explored_cells() const {
  CellSet out(grid_layer_, cells_);
  for (std::size_t c = 0; c < cells_; ++c)
    for (std::size_t u = 0; u < inputs_; ++u)
      if (state_[c * inputs_ + u] != EntryState::Unexplored) {
        out.insert(c);
        break;
      }
  return out;
}

// ----------------------------------------------------------------------------
// Binary cache format (little-endian host layout):
//   magic "MSYNTT01", u32 layer, u32 kind, u32 dim, u32 layers, f64 tau1,
//   f64 lower[dim], f64 upper[dim], f64 eta1[dim], u64 cells, u64 inputs,
//   u64 entry_count, then per non-unexplored entry:
//   u64 slot, u8 state, u32 count, u32 cells[count].

namespace {

constexpr char kTableMagic[8] = {'M', 'S', 'Y', 'N', 'T', 'T', '0', '1'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("transition table: truncated file");
  return v;
}

}  // namespace

void TransitionTable::dump(std::ostream& out, const LayerStack& stack) const {
  out.write(kTableMagic, sizeof kTableMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layer_));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kind_));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(stack.dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(stack.layers()));
  put<double>(out, stack.tau1());
  for (const Vector* v : {&stack.lower(), &stack.upper(), &stack.eta1()})
    for (double x : *v) put<double>(out, x);
  put<std::uint64_t>(out, cells_);
  put<std::uint64_t>(out, inputs_);
  put<std::uint64_t>(out, explored_);
  for (std::size_t slot = 0; slot < state_.size(); ++slot) {
    if (state_[slot] == EntryState::Unexplored) continue;
    put<std::uint64_t>(out, slot);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(state_[slot]));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(succ_[slot].size()));
    for (CellIndex c : succ_[slot]) put<std::uint32_t>(out, c);
  }
}

TransitionTable TransitionTable::load(std::istream& in, const LayerStack& stack) {
  char magic[sizeof kTableMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kTableMagic, sizeof magic) != 0)
    throw FormatError("transition table: bad header");
  const auto layer = static_cast<int>(get<std::uint32_t>(in));
  const auto kind = get<std::uint32_t>(in);
  const auto dim = get<std::uint32_t>(in);
  const auto layers = get<std::uint32_t>(in);
  if (kind > 1 || dim != stack.dim() || static_cast<int>(layers) != stack.layers() ||
      layer < 1 || layer > stack.layers())
    throw FormatError("transition table: header does not match the layer stack");
  const double tau1 = get<double>(in);
  Vector lower(dim), upper(dim), eta1(dim);
  for (Vector* v : {&lower, &upper, &eta1})
    for (auto& x : *v) x = get<double>(in);
  if (tau1 != stack.tau1() || lower != stack.lower() || upper != stack.upper() ||
      eta1 != stack.eta1())
    throw FormatError("transition table: grid parameters do not match the layer stack");
  const auto cells = get<std::uint64_t>(in);
  const auto inputs = get<std::uint64_t>(in);
  const auto entries = get<std::uint64_t>(in);
  TransitionTable t(stack, layer, static_cast<TableKind>(kind), inputs);
  if (cells != t.cells_) throw FormatError("transition table: cell count mismatch");
  if (entries > t.state_.size()) throw FormatError("transition table: too many entries");
  for (std::uint64_t e = 0; e < entries; ++e) {
    const auto slot = get<std::uint64_t>(in);
    const auto state = get<std::uint8_t>(in);
    const auto count = get<std::uint32_t>(in);
    if (slot >= t.state_.size() || t.state_[slot] != EntryState::Unexplored ||
        (state != static_cast<std::uint8_t>(EntryState::Computed) &&
         state != static_cast<std::uint8_t>(EntryState::Blocked)) ||
        count > t.cells_)
      throw FormatError("transition table: corrupt entry");
    Successors s;
    s.blocked = state == static_cast<std::uint8_t>(EntryState::Blocked);
    s.cells.resize(count);
    for (auto& c : s.cells) {
      c = get<std::uint32_t>(in);
      if (c >= t.cells_) throw FormatError("transition table: successor out of range");
    }
    t.store(slot, std::move(s));
  }
  return t;
}

}  // namespace msyn
