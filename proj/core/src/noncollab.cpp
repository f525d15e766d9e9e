#include "cohsync/noncollab.hpp"

#include <cmath>
#include <string>

namespace cohsync::protocol {
namespace {

constexpr double kDeltaBarFraction = 0.9;
constexpr double kDefaultDFraction = 0.9;

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(what) + " must be positive and finite");
  }
}

// Everything that does not depend on delta.
NoncollabDesign design_core(const model::AgentModel& model, const NoncollabOverrides& overrides) {
  const auto report = model::check_assumptions(model);
  if (const auto failure = report.noncollab_failure()) {
    throw model::AssumptionError(*failure, "noncollaborative design requires it");
  }
  NoncollabDesign design;
  design.transform = model::build_output_transform(model, overrides.S, overrides.T);
  const auto& tr = design.transform;

  if (overrides.H1) {
    design.H1 = *overrides.H1;
    if (design.H1.rows() != tr.n1 || design.H1.cols() != tr.C1.rows()) {
      throw std::invalid_argument("H1 override has the wrong shape");
    }
    if (tr.n1 > 0 && !linalg::eigenvalues(tr.A11 + design.H1 * tr.C1).is_hurwitz) {
      throw std::invalid_argument("H1 override does not make A11 + H1 C1 Hurwitz");
    }
  } else {
    design.H1 = model::design_observer_gain(tr.A11, tr.C1);
  }

  const int n = model.n();
  design.B_tilde = tr.B_tilde;
  design.P = linalg::solve_care(tr.A_tilde, tr.B_tilde, Matrix::Identity(n, n), 1.0);
  design.gain_row = design.B_tilde.transpose() * design.P;
  design.rho_kernel = design.gain_row.transpose() * design.gain_row;
  design.output_norm = linalg::operator_norm_2(model.C * tr.S_inv);
  return design;
}

void finish(NoncollabDesign& design, double delta, const std::optional<double>& d_override) {
  require_positive(delta, "delta");
  design.delta = delta;
  design.delta_1 = delta * delta * linalg::min_eigenvalue_sym(design.P);
  design.delta_bar = kDeltaBarFraction * design.delta_1;
  if (d_override) {
    const double d = *d_override;
    if (!(d > 0.0) || !(d < design.d_upper_bound())) {
      throw std::invalid_argument("d = " + std::to_string(d) + " violates 0 < d < " +
                                  std::to_string(design.d_upper_bound()));
    }
    design.d = d;
  } else {
    design.d = kDefaultDFraction * design.d_upper_bound();
  }
}

}  // namespace

NoncollabDesign design_noncollab(const model::AgentModel& model, double delta,
                                 const NoncollabOverrides& overrides) {
  NoncollabDesign design = design_core(model, overrides);
  finish(design, delta, overrides.d);
  return design;
}

NoncollabDesign design_noncollab_for_d(const model::AgentModel& model, double d,
                                       NoncollabOverrides overrides) {
  require_positive(d, "d");
  NoncollabDesign design = design_core(model, overrides);
  // Invert d = 0.9 * 0.9 * delta^2 * lambda_min(P) / |C S^-1|.
  const double lambda = linalg::min_eigenvalue_sym(design.P);
  const double delta = std::sqrt(d * design.output_norm /
                                 (kDeltaBarFraction * kDefaultDFraction * lambda));
  finish(design, delta, d);
  return design;
}

Vector assemble_xi_hat(const NoncollabDesign& design, const Vector& xi1_hat,
                       const Vector& zeta) {
  const int n1 = design.n1();
  const int m = design.m();
  Vector xi(n1 + m);
  xi.head(n1) = xi1_hat;
  xi.tail(m) = design.transform.T.bottomRows(m) * zeta;
  return xi;
}

NoncollabRates noncollab_derivatives(const NoncollabDesign& design, const Vector& xi1_hat,
                                     double rho, const Vector& zeta) {
  const auto& tr = design.transform;
  if (xi1_hat.size() != tr.n1 || zeta.size() != design.p()) {
    throw std::invalid_argument("noncollab_derivatives: dimension mismatch");
  }
  const Vector split = tr.T * zeta;
  const int p1 = design.p() - design.m();
  const Vector zeta1 = split.head(p1);
  const Vector zeta2 = split.tail(design.m());

  NoncollabRates out;
  out.dxi1_hat = tr.A11 * xi1_hat + tr.A12 * zeta2 + design.H1 * (tr.C1 * xi1_hat - zeta1);

  Vector xi(design.n());
  xi.head(tr.n1) = xi1_hat;
  xi.tail(design.m()) = zeta2;
  out.proxy = xi.dot(design.P * xi);
  const Vector g = design.gain_row * xi;
  out.drho = out.proxy >= design.d ? g.squaredNorm() : 0.0;
  out.u = -rho * g;
  return out;
}

double coherency_proxy(const NoncollabDesign& design, const Vector& xi_hat) {
  if (xi_hat.size() != design.n()) {
    throw std::invalid_argument("coherency_proxy: dimension mismatch");
  }
  return xi_hat.dot(design.P * xi_hat);
}

}  // namespace cohsync::protocol
