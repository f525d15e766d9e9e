#include <gtest/gtest.h>

#include <random>

#include "cohsync/agent_model.hpp"
#include "cohsync/reference_models.hpp"
#include "oracles.hpp"

using namespace cohsync;
using namespace cohsync::model;

namespace {

AgentModel siso(const Matrix& a, const Matrix& b, const Matrix& c) {
  return AgentModel{a, b, c, Matrix(a.rows(), 0)};
}

// Zeros of a SISO system as roots of det [[sI - A, -B], [C, 0]]: sample the
// determinant at n points, interpolate, take roots.
std::vector<oracle::cd> siso_zeros(const AgentModel& m) {
  const int n = m.n();
  auto det_at = [&](double s) {
    oracle::Dense rosen(n + 1, std::vector<double>(n + 1, 0.0));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) rosen[i][j] = (i == j ? s : 0.0) - m.A(i, j);
      rosen[i][n] = -m.B(i, 0);
      rosen[n][i] = m.C(0, i);
    }
    // determinant by elimination
    double det = 1.0;
    for (int k = 0; k <= n; ++k) {
      int piv = k;
      for (int i = k + 1; i <= n; ++i)
        if (std::abs(rosen[i][k]) > std::abs(rosen[piv][k])) piv = i;
      if (rosen[piv][k] == 0.0) return 0.0;
      if (piv != k) {
        std::swap(rosen[piv], rosen[k]);
        det = -det;
      }
      det *= rosen[k][k];
      for (int i = k + 1; i <= n; ++i) {
        const double f = rosen[i][k] / rosen[k][k];
        for (int j = k; j <= n; ++j) rosen[i][j] -= f * rosen[k][j];
      }
    }
    return det;
  };
  // degree n - 1 numerator: n samples
  oracle::Dense vander(n, std::vector<double>(n));
  std::vector<double> vals(n);
  for (int k = 0; k < n; ++k) {
    const double s = -1.0 + 2.0 * k / std::max(1, n - 1);
    double pw = 1.0;
    for (int j = 0; j < n; ++j, pw *= s) vander[k][j] = pw;
    vals[k] = det_at(s);
  }
  auto coeffs = oracle::gauss_solve(vander, vals);
  const double lead = coeffs.back();
  for (double& c : coeffs) c /= lead;
  if (coeffs.size() == 1) return {};
  return oracle::poly_roots(coeffs);
}

}  // namespace

TEST(Model, ValidateDimensions) {
  AgentModel m = reference::double_integrator();
  EXPECT_NO_THROW(m.validate());
  m.C = Matrix::Ones(1, 3);
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = reference::double_integrator();
  m.B = Matrix::Zero(2, 1);
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(Assumptions, NoncollabReferenceModelPasses) {
  const auto r = check_assumptions(reference::noncollab_model());
  EXPECT_TRUE(r.stabilizable);
  EXPECT_TRUE(r.detectable);
  EXPECT_TRUE(r.image_E_in_image_B);
  EXPECT_TRUE(r.relative_degree_one);
  EXPECT_TRUE(r.left_invertible);
  EXPECT_TRUE(r.minimum_phase);
  EXPECT_FALSE(r.noncollab_failure().has_value());
}

TEST(Assumptions, CollabReferenceModelPasses) {
  const auto r = check_assumptions(reference::collab_model());
  EXPECT_TRUE(r.observable);
  EXPECT_TRUE(r.right_invertible);
  EXPECT_TRUE(r.minimum_phase);
  EXPECT_EQ(r.uniform_rank, TriState::yes);
  EXPECT_FALSE(r.collab_failure().has_value());
  // single zero of (s + 2)(s + 3) + ... checked against the determinant oracle
  EXPECT_LT(oracle::match_distance(r.invariant_zeros, siso_zeros(reference::collab_model())), 1e-8);
}

TEST(Assumptions, NonMinimumPhaseIsNamed) {
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << 0, 1, 0, 0;
  b << 0, 1;
  c << -1, 1;  // (s - 1) / s^2
  const auto r = check_assumptions(siso(a, b, c));
  ASSERT_EQ(r.invariant_zeros.size(), 1u);
  EXPECT_NEAR(r.invariant_zeros[0].real(), 1.0, 1e-10);
  EXPECT_FALSE(r.minimum_phase);
  EXPECT_EQ(r.noncollab_failure().value_or(""), "minimum-phase");
  EXPECT_EQ(r.collab_failure().value_or(""), "minimum-phase");
}

TEST(Assumptions, UnstabilizableAndUnobservable) {
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << 1, 0, 0, -1;
  b << 0, 1;
  c << 1, 1;
  EXPECT_EQ(check_assumptions(siso(a, b, c)).noncollab_failure().value_or(""), "stabilizability");
  b << 1, 1;
  c << 0, 1;
  const auto r = check_assumptions(siso(a, b, c));
  EXPECT_FALSE(r.detectable);
  EXPECT_FALSE(r.observable);
}

TEST(Assumptions, UniformRankFailsForMixedOrders) {
  // two chains of different length: y1 = x1 (order 1), y2 = x2 with x2'' = u2
  Matrix a = Matrix::Zero(3, 3), b = Matrix::Zero(3, 2), c = Matrix::Zero(2, 3);
  a(1, 2) = 1.0;
  b(0, 0) = 1.0;
  b(2, 1) = 1.0;
  c(0, 0) = 1.0;
  c(1, 1) = 1.0;
  const auto r = check_assumptions(AgentModel{a, b, c, Matrix(3, 0)});
  EXPECT_EQ(r.uniform_rank, TriState::no);
  EXPECT_EQ(r.collab_failure().value_or(""), "uniform rank");
}

TEST(Zeros, PencilMatchesDeterminantOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 4;
    const Matrix a = oracle::random_matrix(rng, n, n);
    const Matrix b = oracle::random_matrix(rng, n, 1);
    Matrix c = oracle::random_matrix(rng, 1, n);
    const auto m = siso(a, b, c);
    EXPECT_LT(oracle::match_distance(invariant_zeros(m), siso_zeros(m)), 1e-7) << trial;
  }
}

TEST(Zeros, TransformAgreesWithPencil) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 3;
    const int m = 1 + trial % 2;
    const Matrix a = oracle::random_matrix(rng, n, n);
    const Matrix b = oracle::random_matrix(rng, n, m);
    const Matrix c = oracle::random_matrix(rng, m, n);
    const AgentModel model{a, b, c, Matrix(n, 0)};
    const auto tr = build_output_transform(model);
    EXPECT_LT(linalg::multiset_distance(invariant_zeros(model), zeros_from_transform(tr)), 1e-8);
  }
}

TEST(Transform, StructureOfTransformedModel) {
  const AgentModel m = reference::noncollab_model();
  const auto tr = build_output_transform(m);
  EXPECT_EQ(tr.n1, 3);
  EXPECT_EQ(tr.m, 1);
  EXPECT_LT((tr.S * tr.S_inv - Matrix::Identity(4, 4)).norm(), 1e-12);
  EXPECT_LT((tr.A_tilde - tr.S * m.A * tr.S_inv).norm(), 1e-12);
  EXPECT_LT((tr.B_tilde.topRows(3)).norm(), 1e-12);
  EXPECT_NEAR(tr.B_tilde(3, 0), 1.0, 1e-12);
  EXPECT_LT((tr.C_tilde - tr.T * m.C * tr.S_inv).norm(), 1e-12);
  // T C S^-1 = [[C1, 0], [0, I]]
  EXPECT_LT(tr.C_tilde.block(0, 3, 1, 1).norm(), 1e-12);
  EXPECT_LT(tr.C_tilde.block(1, 0, 1, 3).norm(), 1e-12);
  EXPECT_NEAR(tr.C_tilde(1, 3), 1.0, 1e-12);
}

TEST(Transform, PublishedOverridesReproducePrintedMatrices) {
  const auto ov = reference::noncollab_published_overrides();
  const auto tr = build_output_transform(reference::noncollab_model(), ov.S, ov.T);
  Matrix a11(3, 3);
  a11 << 0, 0, 1, -1, -2, 1, 0, -1, 0;
  // the printed observer matrix is A11 (before H1 C1 injection)
  EXPECT_LT((tr.A11 - a11).cwiseAbs().maxCoeff(), 1e-12);
  Matrix c(2, 4);
  c << 1, 0, 0, 0, 0, 0, 0, 1;
  EXPECT_LT((tr.C_tilde - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Transform, RejectsBadOverride) {
  const AgentModel m = reference::noncollab_model();
  EXPECT_THROW(build_output_transform(m, Matrix::Zero(4, 4)), std::invalid_argument);
  EXPECT_THROW(build_output_transform(m, Matrix::Identity(4, 4)), std::invalid_argument);
}

TEST(Transform, RelativeDegreeTwoThrows) {
  EXPECT_THROW(build_output_transform(reference::double_integrator()), AssumptionError);
}

TEST(ObserverGain, MakesA11Hurwitz) {
  const auto tr = build_output_transform(reference::noncollab_model());
  const Matrix h = design_observer_gain(tr.A11, tr.C1);
  for (const auto& z : oracle::eigenvalues(tr.A11 + h * tr.C1)) EXPECT_LT(z.real(), 0.0);
}
