#pragma once

// Fixed-step RK4 integration of the networked agents and their protocols.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "cohsync/agent_model.hpp"
#include "cohsync/collab.hpp"
#include "cohsync/graph.hpp"
#include "cohsync/noncollab.hpp"

namespace cohsync::sim {

enum class DisturbanceKind { chirp, sawtooth, zero, table };

struct DisturbanceSpec {
  DisturbanceKind kind = DisturbanceKind::chirp;
  /// Sample times (strictly increasing) and values (one row per time, one
  /// column per disturbance channel) for the table kind. Shared by all agents.
  std::vector<double> table_times;
  Matrix table_values;
};

/// w_i(t) for agent i (1-based) with `channels` components. Chirp and sawtooth
/// repeat the same scalar on every channel.
Vector disturbance_value(const DisturbanceSpec& spec, int agent, double t, int channels);

/// zeta_i = sum_j l_ij y_j for the columns y_j of `outputs` (p x N).
Matrix network_signals(const graph::DirectedWeightedGraph& g, const Matrix& outputs);

/// zeta~_i = sum_j l_ij x^_j for the columns of `protocol_states` (n x N).
Matrix protocol_exchange(const graph::DirectedWeightedGraph& g, const Matrix& protocol_states);

using Design = std::variant<protocol::NoncollabDesign, protocol::CollabDesign>;

struct SimConfig {
  model::AgentModel model;
  graph::DirectedWeightedGraph graph;
  Design design;
  DisturbanceSpec disturbance;
  double dt = 1e-3;
  double t_end = 30.0;
  int stride = 1;
  /// Seed of the uniform [-1, 1]^n initial agent states (ignored when x0 is set).
  std::uint64_t seed = 1;
  /// Explicit initial agent states, n x N.
  std::optional<Matrix> x0;
  double rho0 = 0.0;
  double alpha0 = 0.0;
  /// Disturbance index of each agent (1-based); defaults to 1..N.
  std::vector<int> agent_labels;
  /// Worker threads for per-agent evaluation; results do not depend on it.
  int threads = 1;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Samples are stored agent-major inside each sample: value(s, i, k) lives at
/// ((s * N) + i) * dim + k.
struct SimulationRun {
  bool collaborative = false;
  int N = 0;
  int n = 0;
  int p = 0;
  int m = 0;
  int protocol_dim = 0;
  std::vector<double> t;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> u;
  std::vector<double> protocol_state;
  std::vector<double> zeta;
  std::vector<double> coherency_norm;
  /// xi^T P xi (noncollaborative) or e~^T e~ (collaborative).
  std::vector<double> coherency_proxy;
  /// zeta~^T C^T C zeta~ (collaborative only).
  std::vector<double> output_proxy;
  std::vector<double> rho;
  std::vector<double> alpha;

  std::size_t samples() const { return t.size(); }
  double at(const std::vector<double>& series, std::size_t sample, int agent, int dim = 1,
            int k = 0) const {
    return series[(sample * static_cast<std::size_t>(N) + agent) * dim + k];
  }
  /// Time series of a scalar per-agent quantity.
  std::vector<double> agent_series(const std::vector<double>& series, int agent) const;
};

SimulationRun simulate(const SimConfig& config);

/// Seeded uniform [-1, 1]^n initial states (n x N).
Matrix initial_states(int n, int agents, std::uint64_t seed);

/// Smallest recorded T with values <= threshold on [T, t_end] and
/// t_end - T >= trailing_window.
std::optional<double> detect_settling(const std::vector<double>& times,
                                      const std::vector<double>& values, double threshold,
                                      double trailing_window);

/// Writes the trajectory table (one row per sample and agent).
void write_trajectory_csv(std::ostream& out, const SimulationRun& run);

}  // namespace cohsync::sim
