#include "cohsync/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "cohsync/io.hpp"
#include "cohsync/reference_models.hpp"
#include "detail_json.hpp"

namespace cohsync::experiment {

using detail::Json;
using io::ConfigError;

namespace {

void reject_unknown(const Json& node, const std::string& path, std::initializer_list<const char*> keys) {
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : node.items()) {
    if (!allowed.count(key)) throw ConfigError(path + key + ": unknown field");
  }
}

double get_number(const Json& node, const std::string& path) {
  if (!node.is_number()) throw ConfigError(path + ": expected a number");
  const double v = node.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + ": must be finite");
  return v;
}

double get_positive(const Json& node, const std::string& path) {
  const double v = get_number(node, path);
  if (!(v > 0.0)) throw ConfigError(path + ": must be positive");
  return v;
}

int get_int(const Json& node, const std::string& path, int lo) {
  if (!node.is_number_integer()) throw ConfigError(path + ": expected an integer");
  const auto v = node.get<long long>();
  if (v < lo || v > std::numeric_limits<int>::max()) {
    throw ConfigError(path + ": must be at least " + std::to_string(lo));
  }
  return static_cast<int>(v);
}

std::uint64_t get_seed(const Json& node, const std::string& path) {
  if (!node.is_number_unsigned() && !(node.is_number_integer() && node.get<long long>() >= 0)) {
    throw ConfigError(path + ": expected a nonnegative integer");
  }
  return node.get<std::uint64_t>();
}

std::string get_string(const Json& node, const std::string& path) {
  if (!node.is_string()) throw ConfigError(path + ": expected a string");
  return node.get<std::string>();
}

bool get_bool(const Json& node, const std::string& path) {
  if (!node.is_boolean()) throw ConfigError(path + ": expected true or false");
  return node.get<bool>();
}

std::vector<int> get_int_list(const Json& node, const std::string& path, int lo) {
  if (!node.is_array() || node.empty()) throw ConfigError(path + ": expected a nonempty array");
  std::vector<int> out;
  for (std::size_t k = 0; k < node.size(); ++k) {
    out.push_back(get_int(node[k], path + "[" + std::to_string(k) + "]", lo));
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& file) {
  std::filesystem::path p(file);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

model::AgentModel reference_model(const std::string& name) {
  if (name == "noncollab") return reference::noncollab_model();
  if (name == "collab") return reference::collab_model();
  if (name == "double_integrator") return reference::double_integrator();
  if (name == "scalar_integrator") return reference::scalar_integrator();
  throw ConfigError("model: unknown reference model '" + name + "'");
}

GraphSpec parse_graph(const Json& node, const std::filesystem::path& base) {
  if (!node.is_object()) throw ConfigError("graph: expected an object");
  GraphSpec g;
  if (!node.contains("generator")) throw ConfigError("graph.generator: missing");
  g.generator = get_string(node["generator"], "graph.generator");
  if (g.generator == "vicsek") {
    reject_unknown(node, "graph.", {"generator", "generation", "directed"});
    if (!node.contains("generation")) throw ConfigError("graph.generation: missing");
    g.generation = get_int(node["generation"], "graph.generation", 1);
    if (g.generation > 3) throw ConfigError("graph.generation: must be 1, 2 or 3");
    if (node.contains("directed")) g.directed = get_bool(node["directed"], "graph.directed");
  } else if (g.generator == "circulant") {
    reject_unknown(node, "graph.", {"generator", "nodes", "offsets", "directed"});
    if (!node.contains("nodes")) throw ConfigError("graph.nodes: missing");
    g.nodes = get_int(node["nodes"], "graph.nodes", 2);
    if (node.contains("offsets")) g.offsets = get_int_list(node["offsets"], "graph.offsets", 1);
    if (node.contains("directed")) g.directed = get_bool(node["directed"], "graph.directed");
  } else if (g.generator == "disconnected") {
    reject_unknown(node, "graph.", {"generator", "sizes", "seed"});
    if (!node.contains("sizes")) throw ConfigError("graph.sizes: missing");
    g.sizes = get_int_list(node["sizes"], "graph.sizes", 1);
    if (node.contains("seed")) g.seed = get_seed(node["seed"], "graph.seed");
  } else if (g.generator == "strongly_connected") {
    reject_unknown(node, "graph.", {"generator", "nodes", "seed"});
    if (!node.contains("nodes")) throw ConfigError("graph.nodes: missing");
    g.nodes = get_int(node["nodes"], "graph.nodes", 1);
    if (node.contains("seed")) g.seed = get_seed(node["seed"], "graph.seed");
  } else if (g.generator == "file") {
    reject_unknown(node, "graph.", {"generator", "file"});
    if (!node.contains("file")) throw ConfigError("graph.file: missing");
    g.file = resolve(base, get_string(node["file"], "graph.file"));
    if (!std::filesystem::exists(g.file)) {
      throw ConfigError("graph.file: " + g.file.string() + " does not exist");
    }
  } else {
    throw ConfigError("graph.generator: unknown generator '" + g.generator + "'");
  }
  return g;
}

sim::DisturbanceSpec parse_disturbance(const Json& node) {
  sim::DisturbanceSpec spec;
  std::string kind;
  if (node.is_string()) {
    kind = node.get<std::string>();
  } else if (node.is_object()) {
    reject_unknown(node, "disturbance.", {"kind", "times", "values"});
    if (!node.contains("kind")) throw ConfigError("disturbance.kind: missing");
    kind = get_string(node["kind"], "disturbance.kind");
  } else {
    throw ConfigError("disturbance: expected a string or an object");
  }
  if (kind == "chirp") {
    spec.kind = sim::DisturbanceKind::chirp;
  } else if (kind == "sawtooth") {
    spec.kind = sim::DisturbanceKind::sawtooth;
  } else if (kind == "zero") {
    spec.kind = sim::DisturbanceKind::zero;
  } else if (kind == "table") {
    spec.kind = sim::DisturbanceKind::table;
    if (!node.is_object() || !node.contains("times") || !node.contains("values")) {
      throw ConfigError("disturbance: the table kind needs times and values");
    }
    const Json& times = node["times"];
    if (!times.is_array() || times.size() < 2) {
      throw ConfigError("disturbance.times: expected at least two samples");
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double t = get_number(times[k], "disturbance.times[" + std::to_string(k) + "]");
      if (!spec.table_times.empty() && !(t > spec.table_times.back())) {
        throw ConfigError("disturbance.times: must be strictly increasing");
      }
      spec.table_times.push_back(t);
    }
    spec.table_values = detail::matrix_from_json(node["values"], "disturbance.values");
    if (spec.table_values.rows() != static_cast<Eigen::Index>(spec.table_times.size())) {
      throw ConfigError("disturbance.values: need one row per time sample");
    }
  } else {
    throw ConfigError("disturbance.kind: unknown kind '" + kind + "'");
  }
  if (kind != "table" && node.is_object() && (node.contains("times") || node.contains("values"))) {
    throw ConfigError("disturbance: times and values only apply to the table kind");
  }
  return spec;
}

}  // namespace

ExperimentManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
  const Json root = detail::parse_json(json_text, "manifest");
  if (!root.is_object()) throw ConfigError("manifest: expected an object");
  reject_unknown(root, "",
                 {"name", "protocol", "model", "model_file", "graph", "d", "delta", "overrides",
                  "disturbance", "dt", "t_end", "stride", "seed", "threads", "x0", "initial",
                  "output", "acceptance"});
  ExperimentManifest m;
  if (!root.contains("name")) throw ConfigError("name: missing");
  m.name = get_string(root["name"], "name");
  if (m.name.empty()) throw ConfigError("name: must not be empty");

  if (!root.contains("protocol")) throw ConfigError("protocol: missing");
  const std::string protocol = get_string(root["protocol"], "protocol");
  if (protocol == "noncollaborative") {
    m.protocol = Protocol::noncollaborative;
  } else if (protocol == "collaborative") {
    m.protocol = Protocol::collaborative;
  } else {
    throw ConfigError("protocol: expected noncollaborative or collaborative");
  }

  if (root.contains("model") == root.contains("model_file")) {
    throw ConfigError("model: give exactly one of model and model_file");
  }
  if (root.contains("model")) {
    const Json& node = root["model"];
    if (node.is_string()) {
      m.model = reference_model(node.get<std::string>());
    } else {
      if (!node.is_object()) throw ConfigError("model: expected an object or a reference name");
      reject_unknown(node, "model.", {"A", "B", "C", "E"});
      m.model = io::parse_model(node.dump());
    }
  } else {
    const auto path = resolve(base_dir, get_string(root["model_file"], "model_file"));
    if (!std::filesystem::exists(path)) {
      throw ConfigError("model_file: " + path.string() + " does not exist");
    }
    m.model = io::read_model_file(path);
  }

  if (!root.contains("graph")) throw ConfigError("graph: missing");
  m.graph = parse_graph(root["graph"], base_dir);

  if (root.contains("d")) m.d = get_positive(root["d"], "d");
  if (root.contains("delta")) m.delta = get_positive(root["delta"], "delta");
  if (!m.d && !m.delta) throw ConfigError("d: give d, delta or both");

  if (root.contains("overrides")) {
    const Json& ov = root["overrides"];
    if (!ov.is_object()) throw ConfigError("overrides: expected an object");
    reject_unknown(ov, "overrides.", {"S", "T", "H1", "eta"});
    if (m.protocol == Protocol::noncollaborative && ov.contains("eta")) {
      throw ConfigError("overrides.eta: only applies to the collaborative protocol");
    }
    if (m.protocol == Protocol::collaborative &&
        (ov.contains("S") || ov.contains("T") || ov.contains("H1"))) {
      throw ConfigError("overrides: S, T and H1 only apply to the noncollaborative protocol");
    }
    if (ov.contains("S")) m.S = detail::matrix_from_json(ov["S"], "overrides.S");
    if (ov.contains("T")) m.T = detail::matrix_from_json(ov["T"], "overrides.T");
    if (ov.contains("H1")) m.H1 = detail::matrix_from_json(ov["H1"], "overrides.H1");
    if (ov.contains("eta")) m.eta = get_positive(ov["eta"], "overrides.eta");
  }

  if (root.contains("disturbance")) m.disturbance = parse_disturbance(root["disturbance"]);
  if (m.disturbance.kind == sim::DisturbanceKind::table &&
      m.disturbance.table_values.cols() != m.model.w()) {
    throw ConfigError("disturbance.values: need one column per disturbance channel");
  }
  if (root.contains("dt")) m.dt = get_positive(root["dt"], "dt");
  if (root.contains("t_end")) m.t_end = get_positive(root["t_end"], "t_end");
  if (m.t_end < m.dt) throw ConfigError("t_end: must be at least dt");
  if (root.contains("stride")) m.stride = get_int(root["stride"], "stride", 1);
  if (root.contains("seed")) m.seed = get_seed(root["seed"], "seed");
  if (root.contains("threads")) m.threads = get_int(root["threads"], "threads", 1);
  if (root.contains("x0")) {
    m.x0 = detail::matrix_from_json(root["x0"], "x0");
    if (m.x0->rows() != m.model.n()) throw ConfigError("x0: need one row per state");
  }
  if (root.contains("initial")) {
    const Json& init = root["initial"];
    if (!init.is_object()) throw ConfigError("initial: expected an object");
    reject_unknown(init, "initial.", {"rho", "alpha"});
    if (init.contains("rho")) m.rho0 = get_number(init["rho"], "initial.rho");
    if (init.contains("alpha")) m.alpha0 = get_number(init["alpha"], "initial.alpha");
    if (m.rho0 < 0.0) throw ConfigError("initial.rho: must be nonnegative");
    if (m.alpha0 < 0.0) throw ConfigError("initial.alpha: must be nonnegative");
  }
  m.output = root.contains("output") ? std::filesystem::path(get_string(root["output"], "output"))
                                     : std::filesystem::path(m.name);
  if (root.contains("acceptance")) {
    const Json& acc = root["acceptance"];
    if (!acc.is_object()) throw ConfigError("acceptance: expected an object");
    reject_unknown(acc, "acceptance.",
                   {"threshold_factor", "trailing_window", "flat_fraction", "flat_tolerance"});
    auto& a = m.acceptance;
    if (acc.contains("threshold_factor")) {
      a.threshold_factor = get_positive(acc["threshold_factor"], "acceptance.threshold_factor");
    }
    if (acc.contains("trailing_window")) {
      a.trailing_window = get_number(acc["trailing_window"], "acceptance.trailing_window");
      if (a.trailing_window < 0.0) throw ConfigError("acceptance.trailing_window: must be nonnegative");
    }
    if (acc.contains("flat_fraction")) {
      a.flat_fraction = get_positive(acc["flat_fraction"], "acceptance.flat_fraction");
      if (a.flat_fraction > 1.0) throw ConfigError("acceptance.flat_fraction: must be at most 1");
    }
    if (acc.contains("flat_tolerance")) {
      a.flat_tolerance = get_positive(acc["flat_tolerance"], "acceptance.flat_tolerance");
    }
  }
  if (m.acceptance.trailing_window > m.t_end) {
    throw ConfigError("acceptance.trailing_window: longer than t_end");
  }
  return m;
}

ExperimentManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(io::read_text_file(path), path.parent_path());
}

graph::DirectedWeightedGraph build_graph(const GraphSpec& spec) {
  if (spec.generator == "vicsek") return graph::generate_vicsek_fractal(spec.generation, spec.directed);
  if (spec.generator == "circulant") {
    return graph::generate_circulant(spec.nodes, spec.offsets, spec.directed);
  }
  if (spec.generator == "disconnected") {
    return graph::generate_disconnected_composite(spec.sizes, spec.seed);
  }
  if (spec.generator == "strongly_connected") {
    return graph::generate_strongly_connected(spec.nodes, spec.seed);
  }
  if (spec.generator == "file") {
    std::ifstream in(spec.file);
    if (!in) throw ConfigError("graph.file: cannot read " + spec.file.string());
    try {
      return graph::read_edge_list(in);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("graph.file: ") + e.what());
    }
  }
  throw ConfigError("graph.generator: unknown generator '" + spec.generator + "'");
}

sim::Design build_design(const ExperimentManifest& m) {
  if (m.protocol == Protocol::noncollaborative) {
    protocol::NoncollabOverrides ov{m.S, m.T, m.H1, std::nullopt};
    if (!m.delta) return protocol::design_noncollab_for_d(m.model, *m.d, ov);
    ov.d = m.d;
    return protocol::design_noncollab(m.model, *m.delta, ov);
  }
  protocol::CollabOptions opts{std::nullopt, m.eta};
  if (!m.delta) return protocol::design_collab_for_d(m.model, *m.d, opts);
  opts.d = m.d;
  return protocol::design_collab(m.model, *m.delta, opts);
}

sim::SimConfig build_sim_config(const ExperimentManifest& m) {
  sim::SimConfig cfg;
  cfg.model = m.model;
  cfg.graph = build_graph(m.graph);
  cfg.design = build_design(m);
  cfg.disturbance = m.disturbance;
  cfg.dt = m.dt;
  cfg.t_end = m.t_end;
  cfg.stride = m.stride;
  cfg.seed = m.seed;
  cfg.x0 = m.x0;
  cfg.rho0 = m.rho0;
  cfg.alpha0 = m.alpha0;
  cfg.threads = m.threads;
  if (cfg.x0 && cfg.x0->cols() != cfg.graph.node_count()) {
    throw ConfigError("x0: need one column per agent");
  }
  return cfg;
}

namespace {

struct GainCheck {
  double change = 0.0;
  bool monotone = true;
};

GainCheck check_gain(const std::vector<double>& t, const std::vector<double>& g, double fraction) {
  GainCheck out;
  for (std::size_t s = 1; s < g.size(); ++s) {
    if (g[s] < g[s - 1]) out.monotone = false;
  }
  const double t0 = t.back() - fraction * (t.back() - t.front());
  const auto first = std::lower_bound(t.begin(), t.end(), t0) - t.begin();
  out.change = g.back() - g[static_cast<std::size_t>(first)];
  return out;
}

double max_after(const std::vector<double>& t, const std::vector<double>& v, double from) {
  double out = 0.0;
  for (std::size_t s = 0; s < t.size(); ++s) {
    if (t[s] >= from) out = std::max(out, v[s]);
  }
  return out;
}

}  // namespace

Assessment assess(const sim::SimulationRun& run, double d, const AcceptanceSpec& spec) {
  Assessment out;
  out.threshold = spec.threshold_factor * d;
  out.all_pass = run.N > 0 && run.samples() > 0;
  for (int i = 0; i < run.N; ++i) {
    AgentVerdict v;
    v.agent = i + 1;
    const auto proxy = run.agent_series(run.coherency_proxy, i);
    std::vector<double> trigger = proxy;
    std::vector<double> output_proxy;
    if (run.collaborative) {
      output_proxy = run.agent_series(run.output_proxy, i);
      for (std::size_t s = 0; s < trigger.size(); ++s) {
        trigger[s] = std::max(trigger[s], output_proxy[s]);
      }
    }
    v.settling_time = sim::detect_settling(run.t, trigger, out.threshold, spec.trailing_window);

    const auto rho = run.agent_series(run.rho, i);
    const auto rho_check = check_gain(run.t, rho, spec.flat_fraction);
    v.final_rho = rho.back();
    v.rho_change = rho_check.change;
    v.gains_monotone = rho_check.monotone;
    bool flat = rho_check.change < spec.flat_tolerance;
    if (run.collaborative) {
      const auto alpha = run.agent_series(run.alpha, i);
      const auto alpha_check = check_gain(run.t, alpha, spec.flat_fraction);
      v.final_alpha = alpha.back();
      v.alpha_change = alpha_check.change;
      v.gains_monotone = v.gains_monotone && alpha_check.monotone;
      flat = flat && alpha_check.change < spec.flat_tolerance;
    }
    if (v.settling_time) {
      v.max_proxy_after = max_after(run.t, proxy, *v.settling_time);
      if (run.collaborative) v.max_output_proxy_after = max_after(run.t, output_proxy, *v.settling_time);
      v.max_norm_after = max_after(run.t, run.agent_series(run.coherency_norm, i), *v.settling_time);
    } else {
      v.max_proxy_after = v.max_output_proxy_after = v.max_norm_after =
          std::numeric_limits<double>::quiet_NaN();
    }
    v.pass = v.settling_time.has_value() && v.gains_monotone && flat;
    out.all_pass = out.all_pass && v.pass;
    out.agents.push_back(v);
  }
  return out;
}

std::filesystem::path default_output_root() {
  if (const char* env = std::getenv("COHSYNC_OUT_ROOT"); env != nullptr && *env != '\0') {
    return env;
  }
  return "cohsync-out";
}

namespace {

double design_d(const sim::Design& design) {
  return std::visit([](const auto& x) { return x.d; }, design);
}

Json summary_json(const ExperimentManifest& m, const sim::SimConfig& cfg, const Assessment& a) {
  Json root;
  root["name"] = m.name;
  root["protocol"] = m.protocol == Protocol::collaborative ? "collaborative" : "noncollaborative";
  root["agents_count"] = cfg.graph.node_count();
  root["d"] = design_d(cfg.design);
  root["threshold"] = a.threshold;
  root["trailing_window"] = m.acceptance.trailing_window;
  root["flat_fraction"] = m.acceptance.flat_fraction;
  root["flat_tolerance"] = m.acceptance.flat_tolerance;
  root["dt"] = m.dt;
  root["t_end"] = m.t_end;
  const auto dec = graph::basic_bicomponents(cfg.graph);
  Json comps = Json::array();
  for (const auto& c : dec.basic_components) {
    Json nodes = Json::array();
    for (int k : c) nodes.push_back(k + 1);
    comps.push_back(std::move(nodes));
  }
  root["basic_components"] = std::move(comps);
  root["nonbasic_nodes"] = dec.nonbasic_block_size;
  Json agents = Json::array();
  for (const auto& v : a.agents) {
    Json j;
    j["agent"] = v.agent;
    j["settling_time"] = v.settling_time ? Json(*v.settling_time) : Json(nullptr);
    j["final_rho"] = v.final_rho;
    j["rho_change"] = v.rho_change;
    if (m.protocol == Protocol::collaborative) {
      j["final_alpha"] = v.final_alpha;
      j["alpha_change"] = v.alpha_change;
    }
    j["max_proxy_after"] = v.max_proxy_after;
    if (m.protocol == Protocol::collaborative) j["max_output_proxy_after"] = v.max_output_proxy_after;
    j["max_coherency_norm_after"] = v.max_norm_after;
    j["gains_monotone"] = v.gains_monotone;
    j["pass"] = v.pass;
    agents.push_back(std::move(j));
  }
  root["agents"] = std::move(agents);
  root["status"] = a.all_pass ? "pass" : "fail";
  return root;
}

template <class F>
Outcome guarded(const std::filesystem::path& output_dir, F&& body) {
  Outcome out;
  out.output_dir = output_dir;
  try {
    return body();
  } catch (const model::AssumptionError& e) {
    out.exit_code = 2;
    out.message = std::string("design error: assumption '") + e.assumption() + "' fails: " + e.what();
  } catch (const ConfigError& e) {
    out.exit_code = 2;
    out.message = std::string("configuration error: ") + e.what();
  } catch (const std::invalid_argument& e) {
    out.exit_code = 2;
    out.message = std::string("design error: ") + e.what();
  } catch (const NumericalError& e) {
    out.exit_code = 2;
    out.message = std::string("design error: ") + e.what();
  }
  return out;
}

}  // namespace

Outcome run_design(const ExperimentManifest& manifest, const std::filesystem::path& output_dir) {
  return guarded(output_dir, [&] {
    const sim::Design design = build_design(manifest);
    io::write_text_file(output_dir / "design.json", io::design_to_json(design));
    return Outcome{0, "design written to " + (output_dir / "design.json").string(), output_dir};
  });
}

Outcome run_experiment(const ExperimentManifest& manifest, const std::filesystem::path& output_dir) {
  return guarded(output_dir, [&]() -> Outcome {
    const sim::SimConfig cfg = build_sim_config(manifest);
    io::write_text_file(output_dir / "design.json", io::design_to_json(cfg.design));
    sim::SimulationRun run;
    try {
      run = sim::simulate(cfg);
    } catch (const sim::SimulationError& e) {
      Json root;
      root["name"] = manifest.name;
      root["status"] = "blow-up";
      root["error"] = e.what();
      io::write_text_file(output_dir / "summary.json", root.dump(2) + "\n");
      return Outcome{1, std::string("simulation aborted: ") + e.what(), output_dir};
    }
    std::ostringstream csv;
    sim::write_trajectory_csv(csv, run);
    io::write_text_file(output_dir / "trajectory.csv", csv.str());
    const Assessment a = assess(run, design_d(cfg.design), manifest.acceptance);
    io::write_text_file(output_dir / "summary.json", summary_json(manifest, cfg, a).dump(2) + "\n");
    int failed = 0;
    for (const auto& v : a.agents) failed += v.pass ? 0 : 1;
    std::ostringstream msg;
    msg << manifest.name << ": " << (a.all_pass ? "PASS" : "FAIL") << " (" << a.agents.size() - failed
        << "/" << a.agents.size() << " agents pass, threshold " << a.threshold << ")";
    return Outcome{a.all_pass ? 0 : 1, msg.str(), output_dir};
  });
}

}  // namespace cohsync::experiment
