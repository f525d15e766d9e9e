#pragma once

// Adaptive noncollaborative protocol: offline design and per-agent dynamics.

#include <optional>

#include "cohsync/agent_model.hpp"

namespace cohsync::protocol {

struct NoncollabOverrides {
  std::optional<Matrix> S;
  std::optional<Matrix> T;
  std::optional<Matrix> H1;
  std::optional<double> d;
};

struct NoncollabDesign {
  model::OutputTransform transform;
  Matrix H1;
  /// Stabilizing solution of A~^T P + P A~ - P B~ B~^T P + I = 0.
  Matrix P;
  Matrix B_tilde;
  /// B~^T P (m x n): u = -rho * gain_row * xi_hat.
  Matrix gain_row;
  /// P B~ B~^T P, the quadratic form driving rho.
  Matrix rho_kernel;
  double delta = 0.0;
  double delta_1 = 0.0;
  double delta_bar = 0.0;
  double d = 0.0;
  /// |C S^-1|_2.
  double output_norm = 0.0;

  /// Exclusive upper bound on admissible d.
  double d_upper_bound() const { return delta_bar / output_norm; }
  int n() const { return static_cast<int>(P.rows()); }
  int n1() const { return transform.n1; }
  int m() const { return transform.m; }
  int p() const { return static_cast<int>(transform.T.rows()); }
};

/// Throws model::AssumptionError naming the first failed requirement and
/// std::invalid_argument for inconsistent overrides.
NoncollabDesign design_noncollab(const model::AgentModel& model, double delta,
                                 const NoncollabOverrides& overrides = {});

/// Chooses delta so that the default construction yields exactly `d`, then
/// designs with d as the parameter.
NoncollabDesign design_noncollab_for_d(const model::AgentModel& model, double d,
                                       NoncollabOverrides overrides = {});

struct NoncollabRates {
  Vector dxi1_hat;
  double drho = 0.0;
  Vector u;
  /// xi_hat^T P xi_hat.
  double proxy = 0.0;
};

/// xi_hat = [xi1_hat; zeta_2] where T zeta = (zeta_1, zeta_2).
Vector assemble_xi_hat(const NoncollabDesign& design, const Vector& xi1_hat,
                       const Vector& zeta);

NoncollabRates noncollab_derivatives(const NoncollabDesign& design, const Vector& xi1_hat,
                                     double rho, const Vector& zeta);

double coherency_proxy(const NoncollabDesign& design, const Vector& xi_hat);

}  // namespace cohsync::protocol
