#include "cohsync/collab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

namespace cohsync::protocol {

PAlphaCache::PAlphaCache(Matrix a_shifted, Matrix b, Matrix state_weight)
    : a_(std::move(a_shifted)), b_(std::move(b)), w_(std::move(state_weight)) {}

int PAlphaCache::grid_index(double alpha) {
  if (!(alpha > 0.0)) return kMinIndex;
  if (!std::isfinite(alpha)) return kMaxIndex;
  int k = static_cast<int>(std::floor(std::log(alpha) / std::log(kRatio)));
  k = std::clamp(k, kMinIndex, kMaxIndex);
  while (k > kMinIndex && grid_alpha(k) > alpha) --k;
  while (k < kMaxIndex && grid_alpha(k + 1) <= alpha) ++k;
  return k;
}

double PAlphaCache::grid_alpha(int k) { return std::pow(kRatio, k); }

std::shared_ptr<const Matrix> PAlphaCache::find(int k) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(k);
  return it == entries_.end() ? nullptr : it->second;
}

Matrix PAlphaCache::solve_fresh(double alpha) const {
  return linalg::solve_care(a_, b_, w_, alpha);
}

std::shared_ptr<const Matrix> PAlphaCache::at_index(int k) {
  k = std::clamp(k, kMinIndex, kMaxIndex);
  if (auto hit = find(k)) return hit;

  auto insert = [this](int j, Matrix value) {
    std::unique_lock lock(mutex_);
    return entries_.emplace(j, std::make_shared<const Matrix>(std::move(value))).first->second;
  };
  std::shared_ptr<const Matrix> seed = find(0);
  if (!seed) seed = insert(0, solve_fresh(1.0));
  if (k == 0) return seed;

  // Entries always form a contiguous run around 0; extend it up to k.
  const int step = k > 0 ? 1 : -1;
  int j = 0;
  while (j != k) {
    auto next = find(j + step);
    if (!next) break;
    seed = std::move(next);
    j += step;
  }
  while (j != k) {
    j += step;
    seed = insert(j, linalg::solve_care(a_, b_, w_, grid_alpha(j), *seed));
  }
  return seed;
}

std::vector<int> PAlphaCache::cached_indices() const {
  std::shared_lock lock(mutex_);
  std::vector<int> out;
  out.reserve(entries_.size());
  for (const auto& entry : entries_) out.push_back(entry.first);
  return out;
}

double collab_epsilon(const model::AgentModel& model, const model::AssumptionReport& report) {
  double eps = 0.1;
  for (const Complex& z : report.invariant_zeros) eps = std::min(eps, -0.5 * z.real());
  for (const Complex& mode : linalg::uncontrollable_modes(model.A, model.B)) {
    eps = std::min(eps, -0.5 * mode.real());
  }
  if (!(eps > 0.0)) {
    throw model::AssumptionError("minimum-phase", "no positive epsilon shift is admissible");
  }
  return eps;
}

CollabDesign design_collab(const model::AgentModel& model, double delta,
                           const CollabOptions& options) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("delta must be positive and finite");
  }
  const auto report = model::check_assumptions(model);
  if (const auto failure = report.collab_failure()) {
    throw model::AssumptionError(*failure, "collaborative design requires it");
  }
  CollabDesign design;
  design.A = model.A;
  design.B = model.B;
  design.C = model.C;
  design.delta = delta;

  if (options.eta) {
    design.eta = *options.eta;
    design.Q = linalg::solve_dual_care_shifted(model.A, model.C, design.eta);
  } else {
    for (int k = 0; k <= 30 && design.Q.size() == 0; ++k) {
      const double eta = std::ldexp(1.0, k);
      try {
        design.Q = linalg::solve_dual_care_shifted(model.A, model.C, eta);
        design.eta = eta;
      } catch (const NumericalError&) {
      }
    }
    if (design.Q.size() == 0) {
      throw NumericalError("design_collab: no eta in 1, 2, ..., 2^30 admits a positive definite Q");
    }
  }
  design.QCt = design.Q * model.C.transpose();

  design.epsilon = collab_epsilon(model, report);
  if (options.d) {
    const double d = *options.d;
    if (!(d > 0.0) || !(4.0 * d < delta * delta)) {
      throw std::invalid_argument("d = " + std::to_string(d) + " violates 0 < 4d < delta^2");
    }
    design.d = d;
  } else {
    design.d = delta * delta / 8.0;
  }
  const int n = model.n();
  design.cache = std::make_shared<PAlphaCache>(
      model.A + design.epsilon * Matrix::Identity(n, n), model.B,
      Matrix(model.C.transpose() * model.C));
  design.cache->at_index(0);
  return design;
}

CollabDesign design_collab_for_d(const model::AgentModel& model, double d, CollabOptions options) {
  if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("d must be positive");
  options.d = d;
  return design_collab(model, std::sqrt(8.0 * d), options);
}

Matrix solve_p_alpha(const CollabDesign& design, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("solve_p_alpha: alpha must be positive");
  return design.cache->solve_fresh(alpha);
}

CollabRates collab_derivatives(const CollabDesign& design, const Vector& x_hat, double rho,
                               double alpha, const Vector& zeta, const Vector& zeta_tilde) {
  if (x_hat.size() != design.n() || zeta_tilde.size() != design.n() ||
      zeta.size() != design.p()) {
    throw std::invalid_argument("collab_derivatives: dimension mismatch");
  }
  CollabRates out;
  const Vector c_tilde = design.C * zeta_tilde;
  const Vector e = c_tilde - zeta;
  out.observer_proxy = e.squaredNorm();
  out.output_proxy = c_tilde.squaredNorm();
  out.drho = out.observer_proxy >= design.d ? out.observer_proxy : 0.0;
  if (out.output_proxy >= 1.0) {
    out.dalpha = 1.0;
  } else if (out.output_proxy >= design.d) {
    out.dalpha = out.output_proxy;
  }
  if (alpha > 0.0) {
    const auto p = design.cache->for_alpha(alpha);
    out.u = -alpha * (design.B.transpose() * (*p * (x_hat + zeta_tilde)));
  } else {
    out.u = Vector::Zero(design.m());
  }
  out.dx_hat = design.A * x_hat + design.B * out.u - rho * (design.QCt * e);
  return out;
}

}  // namespace cohsync::protocol
