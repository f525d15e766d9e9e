#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cohsync/experiment.hpp"
#include "cohsync/graph.hpp"
#include "cohsync/io.hpp"
#include "cohsync/verification.hpp"

namespace fs = std::filesystem;
using namespace cohsync;

namespace {

struct RunFlags {
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<int> threads;
};

fs::path output_dir(const RunFlags& f, const experiment::ExperimentManifest& m) {
  if (!f.out.empty()) return f.out;
  if (m.output.is_absolute()) return m.output;
  return experiment::default_output_root() / m.output;
}

experiment::ExperimentManifest load(const RunFlags& f) {
  auto m = experiment::load_manifest(f.manifest);
  if (f.seed) m.seed = *f.seed;
  if (f.dt) m.dt = *f.dt;
  if (f.t_end) m.t_end = *f.t_end;
  if (f.threads) m.threads = *f.threads;
  if (!(m.dt > 0.0) || m.t_end < m.dt) throw io::ConfigError("--dt/--t-end: need 0 < dt <= t_end");
  if (m.acceptance.trailing_window > m.t_end) {
    throw io::ConfigError("--t-end: shorter than the acceptance trailing window");
  }
  return m;
}

int report(const experiment::Outcome& o) {
  (o.exit_code == 0 ? std::cout : std::cerr) << o.message << "\n";
  return o.exit_code;
}

void add_run_flags(CLI::App* cmd, RunFlags& f, bool sim_flags) {
  cmd->add_option("--manifest", f.manifest, "Experiment manifest (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory (default: $COHSYNC_OUT_ROOT/<output>)");
  if (!sim_flags) return;
  cmd->add_option("--seed", f.seed, "Seed of the random initial states");
  cmd->add_option("--dt", f.dt, "Integration step [s]");
  cmd->add_option("--t-end", f.t_end, "Horizon [s]");
  cmd->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
}

struct GraphFlags {
  std::string generator = "vicsek";
  int generation = 1;
  bool undirected = false;
  int nodes = 25;
  std::vector<int> offsets{1, 2};
  std::vector<int> sizes{8, 8, 8};
  std::uint64_t seed = 0;
  std::string out;
  bool summary = false;
};

int run_graph(const GraphFlags& f) {
  experiment::GraphSpec spec;
  spec.generator = f.generator;
  spec.generation = f.generation;
  spec.directed = !f.undirected;
  spec.nodes = f.nodes;
  spec.offsets = f.offsets;
  spec.sizes = f.sizes;
  spec.seed = f.seed;
  const auto g = experiment::build_graph(spec);
  std::ostringstream text;
  graph::write_edge_list(text, g);
  if (f.summary) {
    const auto dec = graph::basic_bicomponents(g);
    text << "# strongly connected components: " << graph::strongly_connected_components(g).size()
         << "\n# basic bi-components: " << dec.basic_components.size()
         << "\n# non-basic nodes: " << dec.nonbasic_block_size << "\n";
  }
  if (f.out.empty()) {
    std::cout << text.str();
  } else {
    io::write_text_file(f.out, text.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale-free adaptive delta-level coherent output synchronization"};
  app.require_subcommand(1);

  RunFlags design_flags;
  auto* design = app.add_subcommand("design", "Compute protocol constants and write design.json");
  add_run_flags(design, design_flags, false);

  RunFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "Run a manifest: design, simulate, judge");
  add_run_flags(simulate, sim_flags, true);

  GraphFlags graph_flags;
  auto* graph_cmd = app.add_subcommand("graph", "Emit a generated graph as an edge list");
  graph_cmd->add_option("--generator", graph_flags.generator, "vicsek|circulant|disconnected|strongly_connected")
      ->check(CLI::IsMember({"vicsek", "circulant", "disconnected", "strongly_connected"}));
  graph_cmd->add_option("--generation", graph_flags.generation, "Vicsek generation")->check(CLI::Range(1, 3));
  graph_cmd->add_flag("--undirected", graph_flags.undirected, "Symmetric edges");
  graph_cmd->add_option("--nodes", graph_flags.nodes, "Node count")->check(CLI::PositiveNumber);
  graph_cmd->add_option("--offsets", graph_flags.offsets, "Circulant offsets");
  graph_cmd->add_option("--sizes", graph_flags.sizes, "Component sizes");
  graph_cmd->add_option("--seed", graph_flags.seed, "Generator seed");
  graph_cmd->add_option("--out", graph_flags.out, "Output file (default: stdout)");
  graph_cmd->add_flag("--summary", graph_flags.summary, "Append component statistics as comments");

  std::uint64_t verify_seed = 1;
  bool self_test = false;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "Run the numerical property suite");
  verify->add_option("--seed", verify_seed, "Suite seed");
  verify->add_flag("--self-test", self_test, "Corrupt the stored Riccati solution (negative control)");
  verify->add_option("--out", verify_out, "Report file (default: stdout only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*design) {
      const auto m = load(design_flags);
      return report(experiment::run_design(m, output_dir(design_flags, m)));
    }
    if (*simulate) {
      const auto m = load(sim_flags);
      return report(experiment::run_experiment(m, output_dir(sim_flags, m)));
    }
    if (*graph_cmd) return run_graph(graph_flags);
    if (*verify) {
      const auto rep = verify::run_verification_suite(verify_seed, self_test);
      const std::string text = rep.to_text();
      std::cout << text;
      if (!verify_out.empty()) io::write_text_file(verify_out, text);
      return rep.all_pass() ? 0 : 1;
    }
  } catch (const io::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
