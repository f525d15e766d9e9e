#pragma once

// Sampled numerical checks of the graph and Riccati lemmas the protocols rely
// on, and the report format shared with the CLI.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cohsync/agent_model.hpp"
#include "cohsync/collab.hpp"
#include "cohsync/graph.hpp"

namespace cohsync::verify {

/// One line of a verification report. `worst_margin` >= 0 means the check
/// held with that much room.
struct CheckResult {
  std::string check;
  std::string params;
  double worst_margin = 0.0;
  bool pass = false;
};

struct Report {
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;

  bool all_pass() const;
  /// check=<name> params=<...> worst_margin=<%.6e> status=PASS|FAIL per line.
  std::string to_text() const;
};

struct QRhoProbe {
  Matrix L;
  graph::HWeights weights;
  Vector rho;
  double mu = 0.0;
  /// H rho^-1 - mu (rho^-1 h)(rho^-1 h)^T.
  Matrix Q_rho;
};

QRhoProbe build_q_rho(const Matrix& laplacian, const graph::HWeights& weights, const Vector& rho);

struct MonotoneReport {
  int evaluations = 0;
  int violations = 0;
  /// Largest offending value (finite difference or negative eigenvalue).
  double worst = -std::numeric_limits<double>::infinity();
};

/// Central differences (relative step 1e-6) of z^T Q_rho z in every rho_i;
/// a difference above 1e-8 is a violation.
MonotoneReport verify_qrho_monotone(const QRhoProbe& probe, const std::vector<Vector>& samples);

struct ScalingReport {
  /// max over samples of max(lambda_max(M), 1 / lambda_min(M)) for the
  /// rescaled P_alpha.
  double c = 0.0;
  /// Least-squares slope of log |P_alpha|_2 against log alpha.
  double slope = 0.0;
  bool norms_decreasing = false;
  std::vector<double> alphas;
  std::vector<double> norms;
  int chain_length = 0;
};

/// Rescales P_alpha (shift epsilon) by the block weights alpha^-1/2 on the
/// zero dynamics and alpha^-(2j-1)/(4 r) on the j-th derivative of the
/// output, r being the chain length. Supports square models of relative
/// degree one and square models without zero dynamics.
ScalingReport verify_palpha_scaling(const model::AgentModel& model, double epsilon,
                                    const std::vector<double>& alphas);

/// For consecutive grid points alpha_1 < alpha_2 checks P_1 - P_2 >= -1e-9 I
/// (`scaled` false) or alpha_2 P_2 - alpha_1 P_1 >= -1e-9 I (`scaled` true).
MonotoneReport verify_palpha_order(protocol::PAlphaCache& cache, int first_index, int last_index,
                                   bool scaled);

/// X solving A^T X + X A + W = 0 through an eigendecomposition of A; assumes
/// A is diagonalizable.
Matrix spectral_lyapunov(const Matrix& a, const Matrix& w);

/// The full property suite. With `corrupt_reference` the stored Riccati
/// solution is perturbed by 10% before its residual check (negative control).
Report run_verification_suite(std::uint64_t seed, bool corrupt_reference = false);

}  // namespace cohsync::verify
