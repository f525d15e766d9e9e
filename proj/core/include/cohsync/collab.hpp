#pragma once

// Adaptive collaborative protocol: the shifted dual Riccati observer gain,
// the alpha-parameterized Riccati family and the per-agent dynamics.

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "cohsync/agent_model.hpp"

namespace cohsync::protocol {

/// Solutions P_alpha of (A + eps I)^T P + P (A + eps I) - alpha P B B^T P + C^T C = 0
/// on the geometric grid alpha_k = 1.05^k. Entries are immutable once
/// inserted; readers share a lock and never see partial writes.
class PAlphaCache {
 public:
  static constexpr double kRatio = 1.05;
  static constexpr int kMinIndex = -400;
  static constexpr int kMaxIndex = 1000;

  PAlphaCache(Matrix a_shifted, Matrix b, Matrix state_weight);

  /// Largest k with alpha_k <= alpha, clamped to [kMinIndex, kMaxIndex].
  static int grid_index(double alpha);
  static double grid_alpha(int k);

  /// P at grid point k. Missing points are solved along the chain from
  /// k = 0, each warm-started from its neighbour nearer to alpha = 1, so the
  /// stored value depends only on k.
  std::shared_ptr<const Matrix> at_index(int k);
  std::shared_ptr<const Matrix> for_alpha(double alpha) { return at_index(grid_index(alpha)); }

  /// Solves from scratch, bypassing the cache.
  Matrix solve_fresh(double alpha) const;

  std::vector<int> cached_indices() const;

 private:
  std::shared_ptr<const Matrix> find(int k) const;

  Matrix a_;
  Matrix b_;
  Matrix w_;
  mutable std::shared_mutex mutex_;
  std::map<int, std::shared_ptr<const Matrix>> entries_;
};

struct CollabOptions {
  std::optional<double> d;
  std::optional<double> eta;
};

struct CollabDesign {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix Q;
  /// Q C^T, the observer injection direction.
  Matrix QCt;
  double eta = 0.0;
  double epsilon = 0.0;
  double d = 0.0;
  double delta = 0.0;
  std::shared_ptr<PAlphaCache> cache;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }
};

/// Without an eta override, tries eta = 1, 2, 4, ... up to 2^30 and keeps the
/// first that admits a positive definite Q.
CollabDesign design_collab(const model::AgentModel& model, double delta,
                           const CollabOptions& options = {});

/// Uses delta = sqrt(8 d), the value for which the default d equals `d`.
CollabDesign design_collab_for_d(const model::AgentModel& model, double d,
                                 CollabOptions options = {});

/// min(0.1, half the stability margin of the invariant zeros, half the
/// margin of the uncontrollable modes).
double collab_epsilon(const model::AgentModel& model, const model::AssumptionReport& report);

/// P_alpha at exactly this alpha (no quantization). The controller itself
/// uses the cached grid values.
Matrix solve_p_alpha(const CollabDesign& design, double alpha);

struct CollabRates {
  Vector dx_hat;
  double drho = 0.0;
  double dalpha = 0.0;
  Vector u;
  /// e~^T e~ with e~ = C zeta~ - zeta.
  double observer_proxy = 0.0;
  /// zeta~^T C^T C zeta~.
  double output_proxy = 0.0;
};

CollabRates collab_derivatives(const CollabDesign& design, const Vector& x_hat, double rho,
                               double alpha, const Vector& zeta, const Vector& zeta_tilde);

}  // namespace cohsync::protocol
