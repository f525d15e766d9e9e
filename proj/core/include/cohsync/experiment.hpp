#pragma once

// Manifest-driven experiments: parse, design, simulate, judge, write artifacts.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cohsync/simulation.hpp"

namespace cohsync::experiment {

enum class Protocol { noncollaborative, collaborative };

struct GraphSpec {
  /// vicsek | circulant | disconnected | strongly_connected | file
  std::string generator = "vicsek";
  int generation = 1;
  bool directed = true;
  int nodes = 0;
  std::vector<int> offsets{1, 2};
  std::vector<int> sizes;
  std::uint64_t seed = 0;
  std::filesystem::path file;
};

struct AcceptanceSpec {
  /// Proxies must stay below threshold_factor * d.
  double threshold_factor = 2.0;
  double trailing_window = 5.0;
  /// Gains must change by less than flat_tolerance over the final fraction.
  double flat_fraction = 0.1;
  double flat_tolerance = 1e-2;
};

struct ExperimentManifest {
  std::string name;
  model::AgentModel model;
  GraphSpec graph;
  Protocol protocol = Protocol::noncollaborative;
  std::optional<double> d;
  std::optional<double> delta;
  std::optional<Matrix> S;
  std::optional<Matrix> T;
  std::optional<Matrix> H1;
  std::optional<double> eta;
  sim::DisturbanceSpec disturbance;
  double dt = 1e-3;
  double t_end = 30.0;
  int stride = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  std::optional<Matrix> x0;
  double rho0 = 0.0;
  double alpha0 = 0.0;
  /// Output directory; relative paths resolve against the output root.
  std::filesystem::path output;
  AcceptanceSpec acceptance;
};

/// Throws io::ConfigError with a field path on any schema violation.
ExperimentManifest parse_manifest(const std::string& json_text,
                                  const std::filesystem::path& base_dir = {});
ExperimentManifest load_manifest(const std::filesystem::path& path);

graph::DirectedWeightedGraph build_graph(const GraphSpec& spec);

/// Applies the d / delta rules of the chosen protocol.
sim::Design build_design(const ExperimentManifest& manifest);

sim::SimConfig build_sim_config(const ExperimentManifest& manifest);

struct AgentVerdict {
  int agent = 0;
  std::optional<double> settling_time;
  double final_rho = 0.0;
  double final_alpha = 0.0;
  double rho_change = 0.0;
  double alpha_change = 0.0;
  double max_proxy_after = 0.0;
  double max_output_proxy_after = 0.0;
  /// max |zeta_i| after the settling time.
  double max_norm_after = 0.0;
  bool gains_monotone = true;
  bool pass = false;
};

struct Assessment {
  double threshold = 0.0;
  std::vector<AgentVerdict> agents;
  bool all_pass = false;
};

/// Per agent: the proxies (both, for the collaborative protocol) settle
/// below the threshold with the trailing window, the gains never decrease
/// and are flat over the final fraction of the horizon.
Assessment assess(const sim::SimulationRun& run, double d, const AcceptanceSpec& spec);

/// COHSYNC_OUT_ROOT if set, else "cohsync-out".
std::filesystem::path default_output_root();

struct Outcome {
  /// 0 pass, 1 property failure or blow-up, 2 configuration or design error.
  int exit_code = 2;
  std::string message;
  std::filesystem::path output_dir;
};

/// Writes design.json, trajectory.csv and summary.json into `output_dir`.
Outcome run_experiment(const ExperimentManifest& manifest, const std::filesystem::path& output_dir);

/// Writes design.json only.
Outcome run_design(const ExperimentManifest& manifest, const std::filesystem::path& output_dir);

}  // namespace cohsync::experiment
