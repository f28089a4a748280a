#include "msyn/controller.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "msyn/error.hpp"

namespace msyn {

std::string to_string(SpecKind kind) { return kind == SpecKind::Safe ? "safe" : "reach"; }

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::TargetReached: return "target_reached";
    case RunStatus::HorizonComplete: return "horizon_complete";
    case RunStatus::LeftDomain: return "left_domain";
    case RunStatus::Violation: return "violation";
  }
  return "unknown";
}

std::optional<std::size_t> LayerController::find(std::size_t cell) const {
  const auto it = std::lower_bound(cells.begin(), cells.end(), cell);
  if (it == cells.end() || *it != cell) return std::nullopt;
  return static_cast<std::size_t>(it - cells.begin());
}

std::uint32_t LayerController::max_rank() const {
  return ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end());
}

void LayerController::add(std::size_t cell, std::vector<std::uint32_t> inputs) {
  if (ranked) throw ContractViolation("layer controller: ranked stage needs a rank");
  if (cell >= domain.size()) throw ContractViolation("layer controller: cell out of range");
  if (!cells.empty() && cells.back() >= cell)
    throw ContractViolation("layer controller: cells must be added in increasing order");
  if (inputs.empty()) throw ContractViolation("layer controller: cell without admissible input");
  domain.insert(cell);
  cells.push_back(static_cast<CellIndex>(cell));
  moves.push_back(std::move(inputs));
}

void LayerController::add(std::size_t cell, std::vector<std::uint32_t> inputs,
                          std::uint32_t rank) {
  ranked = false;
  add(cell, std::move(inputs));
  ranked = true;
  ranks.push_back(rank);
}

CellSet MultiLayeredController::domain_layer1() const {
  CellSet out = CellSet::of(stack, 1);
  for (const auto& s : stages) out |= gamma_down(stack, s.domain, 1);
  return out;
}

std::optional<Selection> quantizer(const MultiLayeredController& mlc, std::span<const double> x) {
  std::optional<Selection> best;
  int best_layer = 0;
  for (std::size_t s = 0; s < mlc.stages.size(); ++s) {
    const auto& stage = mlc.stages[s];
    const auto cell = mlc.stack.quantize(x, stage.layer);
    if (!cell || !stage.domain.contains(*cell)) continue;
    if (mlc.kind == SpecKind::Reach) return Selection{s, *cell};
    if (!best || stage.layer > best_layer) {
      best = Selection{s, *cell};
      best_layer = stage.layer;
    }
  }
  return best;
}

std::optional<StepResult> step_closed_loop(const MultiLayeredController& mlc,
                                           const ControlSystem& sys, std::span<const double> x,
                                           std::mt19937_64& rng, int substeps) {
  const auto sel = quantizer(mlc, x);
  if (!sel) return std::nullopt;
  const auto& stage = mlc.stages[sel->stage];
  const std::size_t pos = *stage.find(sel->cell);
  StepResult r;
  r.entry.state.assign(x.begin(), x.end());
  r.entry.layer = stage.layer;
  r.entry.stage = sel->stage;
  r.entry.input = stage.moves[pos].front();
  r.entry.rank = stage.ranked ? stage.ranks[pos] : 0;
  r.next = sample_disturbed_step(sys, x, sys.inputs.at(r.entry.input), mlc.stack.tau(stage.layer),
                                 rng, LayerStack::substeps(stage.layer, substeps));
  return r;
}

TrajectoryLog simulate(const MultiLayeredController& mlc, const ControlSystem& sys,
                       const ProblemGeometry& geometry, std::span<const double> x0,
                       std::size_t horizon, std::uint64_t seed, int substeps) {
  std::mt19937_64 rng(seed);
  TrajectoryLog log;
  Vector x(x0.begin(), x0.end());
  double t = 0.0;
  const bool reach = mlc.kind == SpecKind::Reach;
  auto finish = [&](RunStatus status, std::string reason) {
    log.final_state = x;
    log.final_time = t;
    log.status = status;
    log.reason = std::move(reason);
    return log;
  };
  for (std::size_t k = 0; k < horizon; ++k) {
    if (reach && geometry.in_target(mlc.stack, x)) return finish(RunStatus::TargetReached, "");
    if (!geometry.in_safe(mlc.stack, x))
      return finish(RunStatus::Violation, "unsafe state at step " + std::to_string(k));
    auto step = step_closed_loop(mlc, sys, x, rng, substeps);
    if (!step)
      return finish(RunStatus::LeftDomain,
                    "state outside the controller domain at step " + std::to_string(k));
    step->entry.time = t;
    if (reach && !log.entries.empty()) {
      const auto& prev = log.entries.back();
      const bool decreased =
          step->entry.stage < prev.stage ||
          (step->entry.stage == prev.stage && step->entry.rank < prev.rank);
      if (!decreased)
        return finish(RunStatus::Violation,
                      "ranking did not decrease at step " + std::to_string(k));
    }
    t += mlc.stack.tau(step->entry.layer);
    log.entries.push_back(std::move(step->entry));
    x = std::move(step->next);
  }
  if (reach) {
    if (geometry.in_target(mlc.stack, x)) return finish(RunStatus::TargetReached, "");
    return finish(RunStatus::HorizonComplete, "target not reached within the step budget");
  }
  if (!geometry.in_safe(mlc.stack, x))
    return finish(RunStatus::Violation, "unsafe state at step " + std::to_string(horizon));
  return finish(RunStatus::HorizonComplete, "");
}

std::size_t reach_step_bound(const MultiLayeredController& mlc) {
  std::size_t sum = 0;
  for (const auto& s : mlc.stages) sum += static_cast<std::size_t>(s.max_rank()) + 1;
  return 2 * sum;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

bool is_failure(SpecKind kind, RunStatus s) {
  if (s == RunStatus::Violation || s == RunStatus::LeftDomain) return true;
  return kind == SpecKind::Reach && s != RunStatus::TargetReached;
}

}  // namespace

ValidationReport validate(const MultiLayeredController& mlc, const ControlSystem& sys,
                          const ProblemGeometry& geometry, std::size_t runs, std::size_t horizon,
                          std::uint64_t seed, int substeps, unsigned threads) {
  ValidationReport rep;
  rep.horizon = mlc.kind == SpecKind::Reach ? reach_step_bound(mlc) : horizon;
  CellSet init = mlc.domain_layer1();
  if (mlc.kind == SpecKind::Reach) {
    // Cells already inside the target are trivially won; start elsewhere.
    init.for_each([&](std::size_t c) {
      const ReachBox b = mlc.stack.cell_box(1, c);
      if (geometry.in_target(mlc.stack, b.center())) init.erase(c);
    });
  }
  const auto cells = init.to_vector();
  if (cells.empty() || runs == 0) return rep;

  std::vector<TrajectoryLog> logs(runs);
  auto run = [&](std::size_t r) {
    std::mt19937_64 rng(splitmix(seed ^ splitmix(r)));
    const std::size_t cell = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
    const ReachBox b = mlc.stack.cell_box(1, cell);
    Vector x0(b.dim());
    for (std::size_t i = 0; i < b.dim(); ++i)
      x0[i] = std::uniform_real_distribution<double>(b.lower[i], b.upper[i])(rng);
    logs[r] = simulate(mlc, sys, geometry, x0, rep.horizon, rng(), substeps);
  };
  const unsigned workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(runs)));
  if (workers == 1) {
    for (std::size_t r = 0; r < runs; ++r) run(r);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex m;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t r = w; r < runs; r += workers) run(r);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  double total = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto& log = logs[r];
    ++rep.runs;
    const std::size_t steps = log.entries.size();
    rep.max_steps = std::max(rep.max_steps, steps);
    total += static_cast<double>(steps);
    if (log.status == RunStatus::TargetReached) ++rep.target_reached;
    if (log.status == RunStatus::HorizonComplete) ++rep.horizon_complete;
    if (is_failure(mlc.kind, log.status)) {
      ++rep.violations;
      if (rep.examples.size() < 5)
        rep.examples.push_back("run " + std::to_string(r) + ": " + to_string(log.status) +
                               (log.reason.empty() ? "" : " (" + log.reason + ")"));
    }
  }
  rep.mean_steps = total / static_cast<double>(rep.runs);
  return rep;
}

// ----------------------------------------------------------------------------
// Text format

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_vec(std::ostream& out, const char* key, const Vector& v) {
  out << key;
  for (double x : v) out << ' ' << fmt(x);
  out << '\n';
}

std::istringstream next_line(std::istream& in, const char* key) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(std::string("controller: missing '") + key + "'");
  std::istringstream ss(line);
  std::string word;
  ss >> word;
  if (word != key)
    throw FormatError(std::string("controller: expected '") + key + "', found '" + word + "'");
  return ss;
}

template <class T>
T read_value(std::istringstream& ss, const char* what) {
  T v{};
  if (!(ss >> v)) throw FormatError(std::string("controller: bad ") + what);
  return v;
}

Vector read_vec(std::istream& in, const char* key, std::size_t n) {
  auto ss = next_line(in, key);
  Vector v(n);
  for (auto& x : v) x = read_value<double>(ss, key);
  return v;
}

}  // namespace

void serialize(std::ostream& out, const MultiLayeredController& mlc) {
  const auto& st = mlc.stack;
  out << "msyn-controller 1\n";
  out << "kind " << to_string(mlc.kind) << '\n';
  out << "dim " << st.dim() << '\n';
  out << "layers " << st.layers() << '\n';
  out << "tau1 " << fmt(st.tau1()) << '\n';
  write_vec(out, "lower", st.lower());
  write_vec(out, "upper", st.upper());
  write_vec(out, "eta1", st.eta1());
  out << "stages " << mlc.stages.size() << '\n';
  for (const auto& s : mlc.stages) {
    out << "stage " << s.layer << ' ' << (s.ranked ? 1 : 0) << ' ' << s.cells.size() << '\n';
    for (std::size_t i = 0; i < s.cells.size(); ++i) {
      out << s.cells[i];
      if (s.ranked) out << ' ' << s.ranks[i];
      out << ' ' << s.moves[i].size();
      for (auto u : s.moves[i]) out << ' ' << u;
      out << '\n';
    }
  }
}

MultiLayeredController deserialize(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "msyn-controller 1")
    throw FormatError("controller: unknown header");
  MultiLayeredController mlc;
  {
    auto ss = next_line(in, "kind");
    const auto k = read_value<std::string>(ss, "kind");
    if (k == "safe") mlc.kind = SpecKind::Safe;
    else if (k == "reach") mlc.kind = SpecKind::Reach;
    else throw FormatError("controller: unknown kind '" + k + "'");
  }
  auto ss_dim = next_line(in, "dim");
  const auto dim = read_value<std::size_t>(ss_dim, "dim");
  auto ss_layers = next_line(in, "layers");
  const auto layers = read_value<int>(ss_layers, "layers");
  auto ss_tau = next_line(in, "tau1");
  const auto tau1 = read_value<double>(ss_tau, "tau1");
  if (dim == 0 || dim > 64 || layers < 1 || layers > 32)
    throw FormatError("controller: implausible dimension or layer count");
  Vector lower = read_vec(in, "lower", dim);
  Vector upper = read_vec(in, "upper", dim);
  Vector eta1 = read_vec(in, "eta1", dim);
  try {
    mlc.stack = LayerStack(std::move(lower), std::move(upper), std::move(eta1), tau1, layers);
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("controller: invalid grid: ") + e.what());
  }
  auto ss_stages = next_line(in, "stages");
  const auto n_stages = read_value<std::size_t>(ss_stages, "stage count");
  for (std::size_t s = 0; s < n_stages; ++s) {
    auto ss = next_line(in, "stage");
    LayerController c;
    c.layer = read_value<int>(ss, "stage layer");
    if (c.layer < 1 || c.layer > layers) throw FormatError("controller: stage layer out of range");
    const int ranked = read_value<int>(ss, "ranked flag");
    const auto count = read_value<std::size_t>(ss, "cell count");
    const std::size_t size = mlc.stack.cell_count(c.layer);
    if (count > size) throw FormatError("controller: too many cells in stage");
    c.stage = s;
    c.domain = CellSet(c.layer, size);
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line)) throw FormatError("controller: truncated stage");
      std::istringstream row(line);
      const auto cell = read_value<std::size_t>(row, "cell");
      std::uint32_t rank = 0;
      if (ranked) rank = read_value<std::uint32_t>(row, "rank");
      const auto k = read_value<std::size_t>(row, "move count");
      if (k > 1'000'000) throw FormatError("controller: implausible move count");
      std::vector<std::uint32_t> moves(k);
      for (auto& u : moves) u = read_value<std::uint32_t>(row, "input");
      try {
        if (ranked) c.add(cell, std::move(moves), rank);
        else c.add(cell, std::move(moves));
      } catch (const ContractViolation& e) {
        throw FormatError(std::string("controller: ") + e.what());
      }
    }
    c.ranked = ranked != 0;
    mlc.stages.push_back(std::move(c));
  }
  return mlc;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log) {
  const std::size_t n = log.final_state.size();
  out << "time";
  for (std::size_t i = 0; i < n; ++i) out << ",x" << i;
  out << ",layer,stage,input,rank\n";
  for (const auto& e : log.entries) {
    out << fmt(e.time);
    for (double v : e.state) out << ',' << fmt(v);
    out << ',' << e.layer << ',' << e.stage << ',' << e.input << ',' << e.rank << '\n';
  }
  out << fmt(log.final_time);
  for (double v : log.final_state) out << ',' << fmt(v);
  out << ",,,,\n";
}

}  // namespace msyn
