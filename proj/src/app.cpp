#include "msyn/app.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "msyn/abstraction.hpp"
#include "msyn/error.hpp"

namespace msyn {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

template <class T>
T field(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    if (!j.contains(key)) throw ConfigError("config: missing field '" + where + key + "'");
    throw ConfigError("config: field '" + where + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("config: unknown field '" + where + key + "'");
}

std::vector<ReachBox> parse_boxes(const json& j, const std::string& key) {
  std::vector<ReachBox> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) throw ConfigError("config: field '" + key + "' must be a list of boxes");
  std::size_t k = 0;
  for (const auto& b : j.at(key)) {
    const std::string where = key + "[" + std::to_string(k++) + "].";
    if (!b.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    reject_unknown(b, {"lower", "upper"}, where);
    ReachBox box{field<Vector>(b, "lower", where), field<Vector>(b, "upper", where)};
    out.push_back(std::move(box));
  }
  return out;
}

void clip_boxes(std::vector<ReachBox>& boxes, const std::string& name, const ProblemConfig& c,
                std::vector<std::string>& warnings) {
  std::vector<ReachBox> kept;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    ReachBox b = boxes[k];
    if (b.lower.size() != c.y_lower.size() || b.upper.size() != c.y_lower.size())
      throw ConfigError("config: " + name + "[" + std::to_string(k) +
                        "] has the wrong dimension");
    bool clipped = false, empty = false;
    for (std::size_t i = 0; i < b.dim(); ++i) {
      if (b.lower[i] > b.upper[i])
        throw ConfigError("config: " + name + "[" + std::to_string(k) + "] has lower > upper");
      if (b.lower[i] < c.y_lower[i]) b.lower[i] = c.y_lower[i], clipped = true;
      if (b.upper[i] > c.y_upper[i]) b.upper[i] = c.y_upper[i], clipped = true;
      if (b.lower[i] > b.upper[i]) empty = true;
    }
    if (empty) {
      warnings.push_back(name + "[" + std::to_string(k) + "] lies outside Y and was dropped");
      continue;
    }
    if (clipped) warnings.push_back(name + "[" + std::to_string(k) + "] was clipped to Y");
    kept.push_back(std::move(b));
  }
  boxes = std::move(kept);
}

std::size_t benchmark_dim(const std::string& id) { return id == "dcdc" ? 2 : 3; }

json box_json(const ReachBox& b) { return {{"lower", b.lower}, {"upper", b.upper}}; }

void write_file(const std::filesystem::path& p, const std::string& text,
                std::vector<std::filesystem::path>& files) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("failed writing " + p.string());
  files.push_back(p);
}

}  // namespace

const std::vector<std::string>& algorithm_ids() {
  static const std::vector<std::string> ids{"eager-safe", "lazy-safe", "eager-reach", "lazy-reach",
                                            "single-layer"};
  return ids;
}

LayerStack ProblemConfig::stack() const {
  return LayerStack(y_lower, y_upper, eta1, tau1, layers);
}

ProblemGeometry ProblemConfig::geometry() const {
  return ProblemGeometry{safe_boxes, obstacles, targets};
}

ControlSystem ProblemConfig::system() const {
  if (benchmark == "dcdc") return msyn::dcdc(dcdc);
  if (benchmark == "unicycle") return msyn::unicycle(unicycle);
  throw ConfigError("config: unknown benchmark '" + benchmark +
                    "'; registered ids: " + join(benchmark_ids()));
}

ProblemConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(j,
                 {"description", "benchmark", "params", "layers", "eta1", "tau1", "y_lower",
                  "y_upper", "spec", "safe_boxes", "obstacles", "targets", "m", "seed",
                  "algorithm", "substeps", "output_dir", "threads", "recursion_cap"},
                 "");
  ProblemConfig c;
  c.benchmark = field<std::string>(j, "benchmark", "");
  const auto& ids = benchmark_ids();
  if (std::find(ids.begin(), ids.end(), c.benchmark) == ids.end())
    throw ConfigError("config: unknown benchmark '" + c.benchmark +
                      "'; registered ids: " + join(ids));
  if (j.contains("params")) {
    const json& p = j.at("params");
    if (!p.is_object()) throw ConfigError("config: field 'params' must be an object");
    if (c.benchmark == "dcdc") {
      reject_unknown(p, {"r0", "vs", "rl", "rc", "xl", "xc", "w"}, "params.");
      auto& d = c.dcdc;
      d.r0 = field_or(p, "r0", d.r0, "params.");
      d.vs = field_or(p, "vs", d.vs, "params.");
      d.rl = field_or(p, "rl", d.rl, "params.");
      d.rc = field_or(p, "rc", d.rc, "params.");
      d.xl = field_or(p, "xl", d.xl, "params.");
      d.xc = field_or(p, "xc", d.xc, "params.");
      d.w = field_or(p, "w", d.w, "params.");
    } else {
      reject_unknown(p, {"speeds", "turn_rates", "w"}, "params.");
      auto& u = c.unicycle;
      u.speeds = field_or(p, "speeds", u.speeds, "params.");
      u.turn_rates = field_or(p, "turn_rates", u.turn_rates, "params.");
      u.w = field_or(p, "w", u.w, "params.");
    }
  }
  c.layers = field<int>(j, "layers", "");
  c.eta1 = field<Vector>(j, "eta1", "");
  c.tau1 = field<double>(j, "tau1", "");
  c.y_lower = field<Vector>(j, "y_lower", "");
  c.y_upper = field<Vector>(j, "y_upper", "");
  const auto spec = field<std::string>(j, "spec", "");
  if (spec == "safe") c.spec = SpecKind::Safe;
  else if (spec == "reach") c.spec = SpecKind::Reach;
  else throw ConfigError("config: field 'spec' must be \"safe\" or \"reach\"");
  c.safe_boxes = parse_boxes(j, "safe_boxes");
  c.obstacles = parse_boxes(j, "obstacles");
  c.targets = parse_boxes(j, "targets");
  const auto m = field_or<long long>(j, "m", 2, "");
  if (m < 1) throw ConfigError("config: field 'm' must be >= 1");
  c.m = static_cast<std::size_t>(m);
  c.seed = field_or<std::uint64_t>(j, "seed", 0, "");
  c.algorithm = field_or<std::string>(
      j, "algorithm", c.spec == SpecKind::Safe ? "lazy-safe" : "lazy-reach", "");
  c.substeps = field_or(j, "substeps", 5, "");
  c.output_dir = field_or<std::string>(j, "output_dir", "out", "");
  const auto threads = field_or<long long>(j, "threads", 1, "");
  if (threads < 1) throw ConfigError("config: field 'threads' must be >= 1");
  c.threads = static_cast<unsigned>(threads);
  const auto cap = field_or<long long>(j, "recursion_cap", 1'000'000, "");
  if (cap < 1) throw ConfigError("config: field 'recursion_cap' must be >= 1");
  c.recursion_cap = static_cast<std::size_t>(cap);
  check_config(c);
  return c;
}

void check_config(ProblemConfig& c) {
  const std::size_t n = benchmark_dim(c.benchmark);
  if (c.eta1.size() != n || c.y_lower.size() != n || c.y_upper.size() != n)
    throw ConfigError("config: 'eta1', 'y_lower' and 'y_upper' need " + std::to_string(n) +
                      " components for benchmark '" + c.benchmark + "'");
  if (c.layers < 1 || c.layers > 16) throw ConfigError("config: field 'layers' must be in [1, 16]");
  if (!(c.tau1 > 0.0)) throw ConfigError("config: field 'tau1' must be positive");
  if (c.substeps < 1) throw ConfigError("config: field 'substeps' must be >= 1");
  if (c.m < 1) throw ConfigError("config: field 'm' must be >= 1");
  const auto& algs = algorithm_ids();
  if (std::find(algs.begin(), algs.end(), c.algorithm) == algs.end())
    throw ConfigError("config: unknown algorithm '" + c.algorithm + "'; expected one of " +
                      join(algs));
  if ((c.algorithm.ends_with("-safe") && c.spec != SpecKind::Safe) ||
      (c.algorithm.ends_with("-reach") && c.spec != SpecKind::Reach))
    throw ConfigError("config: algorithm '" + c.algorithm + "' does not match spec '" +
                      to_string(c.spec) + "'");
  try {
    (void)c.stack();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config: invalid grid: ") + e.what());
  }
  c.warnings.clear();
  clip_boxes(c.safe_boxes, "safe_boxes", c, c.warnings);
  clip_boxes(c.obstacles, "obstacles", c, c.warnings);
  clip_boxes(c.targets, "targets", c, c.warnings);
  if (c.spec == SpecKind::Reach && c.targets.empty())
    c.warnings.push_back("reach specification without target boxes");
}

ProblemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

SynthesisRun run_synthesis(const ProblemConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const LayerStack stack = config.stack();
  const ControlSystem sys = config.system();
  const ProblemGeometry geometry = config.geometry();
  const GrowthBoundSource source(sys, stack, config.substeps);
  SpecSets spec = build_spec_sets(stack, geometry);
  Synthesizer syn(source, spec, {config.m, config.threads, config.recursion_cap});

  SynthesisRun run;
  const std::string& alg = config.algorithm;
  if (alg == "single-layer") {
    run.result = syn.single_layer(config.spec);
  } else {
    const bool lazy = alg.starts_with("lazy");
    if (!lazy) syn.populate_all();
    run.result = config.spec == SpecKind::Safe ? syn.safe_iteration(lazy)
                                               : syn.reach_iteration(lazy);
  }
  auto& r = run.result;
  r.warnings.insert(r.warnings.begin(), config.warnings.begin(), config.warnings.end());

  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_csv(csv, stack, r.winning);
  write_file(dir / "winning.csv", csv.str(), run.files);

  const int L = stack.layers();
  json per_layer = json::array();
  json timing_layers = json::array();
  for (int l = 1; l <= L; ++l) {
    CellSet domain = CellSet::of(stack, l);
    for (const auto& s : r.controller.stages)
      if (s.layer == l) domain |= s.domain;
    const CellSet explored = syn.main_table(l).explored_cells();
    std::ostringstream d, e;
    write_csv(d, stack, domain);
    write_csv(e, stack, explored);
    write_file(dir / ("domain_layer" + std::to_string(l) + ".csv"), d.str(), run.files);
    write_file(dir / ("explored_layer" + std::to_string(l) + ".csv"), e.str(), run.files);
    const auto& st = r.stats.layers[static_cast<std::size_t>(l - 1)];
    per_layer.push_back({{"layer", l},
                         {"transitions", st.transitions},
                         {"exhaustive_transitions", spec.safe_at(l).count() * sys.inputs.size()},
                         {"aux_transitions", st.aux_transitions},
                         {"cpre_evaluations", st.cpre_evaluations},
                         {"iterations", st.iterations},
                         {"domain_cells", domain.count()},
                         {"explored_cells", explored.count()},
                         {"safe_cells", spec.safe_at(l).count()},
                         {"target_cells", spec.target_at(l).count()}});
    timing_layers.push_back({{"layer", l},
                             {"abstraction_seconds", st.abstraction_seconds},
                             {"synthesis_seconds", st.synthesis_seconds}});
  }

  std::ostringstream ctrl;
  serialize(ctrl, r.controller);
  write_file(dir / "controller.txt", ctrl.str(), run.files);

  json stages = json::array();
  for (const auto& s : r.controller.stages)
    stages.push_back({{"stage", s.stage},
                      {"layer", s.layer},
                      {"cells", s.cells.size()},
                      {"max_rank", s.ranked ? json(s.max_rank()) : json(nullptr)}});
  json trace = json::array();
  for (const auto& t : r.stats.trace)
    trace.push_back({{"layer", t.layer},
                     {"iterations", t.iterations},
                     {"added", t.added},
                     {"fixed_point", t.fixed_point},
                     {"explored", t.explored}});
  json geometry_json = {{"safe_boxes", json::array()}, {"obstacles", json::array()},
                        {"targets", json::array()}};
  for (const auto& b : geometry.safe) geometry_json["safe_boxes"].push_back(box_json(b));
  for (const auto& b : geometry.obstacles) geometry_json["obstacles"].push_back(box_json(b));
  for (const auto& b : geometry.targets) geometry_json["targets"].push_back(box_json(b));

  const json stats = {{"benchmark", config.benchmark},
                      {"algorithm", alg},
                      {"spec", to_string(config.spec)},
                      {"layers", L},
                      {"m", config.m},
                      {"seed", config.seed},
                      {"winning_cells", r.winning.count()},
                      {"total_transitions", r.stats.total_transitions()},
                      {"rounds", r.stats.rounds},
                      {"frontier_checks", r.stats.frontier_checks},
                      {"per_layer", per_layer},
                      {"stages", stages},
                      {"trace", trace},
                      {"geometry", geometry_json},
                      {"warnings", r.warnings}};
  write_file(dir / "stats.json", stats.dump(2) + "\n", run.files);

  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json timing = {{"synthesis_seconds", r.stats.total_seconds},
                       {"total_seconds", total},
                       {"per_layer", timing_layers}};
  write_file(dir / "timing.json", timing.dump(2) + "\n", run.files);
  return run;
}

ValidationReport run_validation(const std::filesystem::path& controller,
                                const ProblemConfig& config, std::size_t runs,
                                std::size_t horizon, std::uint64_t seed,
                                const std::filesystem::path& report) {
  std::ifstream in(controller);
  if (!in) throw ConfigError("cannot open controller file " + controller.string());
  const MultiLayeredController mlc = deserialize(in);
  if (!(mlc.stack == config.stack()))
    throw ConfigError("controller grid does not match the configuration");
  if (mlc.kind != config.spec)
    throw ConfigError("controller kind does not match the configured specification");
  const ControlSystem sys = config.system();
  const ValidationReport rep = validate(mlc, sys, config.geometry(), runs, horizon, seed,
                                        config.substeps, config.threads);
  const json j = {{"controller", controller.string()},
                  {"spec", to_string(mlc.kind)},
                  {"seed", seed},
                  {"runs", rep.runs},
                  {"horizon", rep.horizon},
                  {"violations", rep.violations},
                  {"target_reached", rep.target_reached},
                  {"horizon_complete", rep.horizon_complete},
                  {"max_steps", rep.max_steps},
                  {"mean_steps", rep.mean_steps},
                  {"examples", rep.examples}};
  if (!report.empty()) {
    if (report.has_parent_path()) std::filesystem::create_directories(report.parent_path());
    std::ofstream out(report);
    if (!out) throw Error("cannot write " + report.string());
    out << j.dump(2) << '\n';
  }
  return rep;
}

std::string format_stats(const std::filesystem::path& dir) {
  std::ifstream in(dir / "stats.json");
  if (!in) throw ConfigError("no stats.json in " + dir.string());
  json s;
  try {
    s = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("stats.json: ") + e.what());
  }
  json timing;
  if (std::ifstream t(dir / "timing.json"); t) {
    try {
      timing = json::parse(t);
    } catch (const json::exception&) {
      timing = nullptr;
    }
  }
  std::ostringstream out;
  char buf[256];
  out << "benchmark " << s.value("benchmark", "?") << ", algorithm " << s.value("algorithm", "?")
      << ", spec " << s.value("spec", "?") << ", L = " << s.value("layers", 0)
      << ", m = " << s.value("m", 0) << "\n";
  out << "winning cells (layer 1): " << s.value("winning_cells", 0) << "\n";
  out << "transitions computed:    " << s.value("total_transitions", 0) << "\n";
  std::snprintf(buf, sizeof buf, "%5s %12s %12s %10s %10s %8s %10s %10s\n", "layer", "computed",
                "exhaustive", "aux", "cpre", "visits", "domain", "explored");
  out << buf;
  for (const auto& l : s.at("per_layer")) {
    std::snprintf(buf, sizeof buf, "%5d %12zu %12zu %10zu %10zu %8zu %10zu %10zu\n",
                  l.value("layer", 0), l.value("transitions", std::size_t{0}),
                  l.value("exhaustive_transitions", std::size_t{0}),
                  l.value("aux_transitions", std::size_t{0}),
                  l.value("cpre_evaluations", std::size_t{0}),
                  l.value("iterations", std::size_t{0}), l.value("domain_cells", std::size_t{0}),
                  l.value("explored_cells", std::size_t{0}));
    out << buf;
  }
  if (timing.is_object()) {
    std::snprintf(buf, sizeof buf, "wall time: %.3f s (synthesis %.3f s)\n",
                  timing.value("total_seconds", 0.0), timing.value("synthesis_seconds", 0.0));
    out << buf;
  }
  for (const auto& w : s.value("warnings", json::array()))
    out << "warning: " << w.get<std::string>() << "\n";
  return out.str();
}

}  // namespace msyn
