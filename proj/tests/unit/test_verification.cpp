#include <gtest/gtest.h>

#include <random>

#include "cohsync/reference_models.hpp"
#include "cohsync/verification.hpp"
#include "oracles.hpp"

using namespace cohsync;
using namespace cohsync::verify;

namespace {

std::vector<Vector> samples(std::mt19937_64& rng, int n, int count) {
  std::vector<Vector> out;
  for (int k = 0; k < count; ++k) out.push_back(oracle::random_matrix(rng, n, 1));
  return out;
}

}  // namespace

TEST(QRho, KernelAndMonotone) {
  std::mt19937_64 rng(2);
  for (int n : {3, 10}) {
    const auto g = graph::generate_strongly_connected(n, 7);
    const Matrix l = graph::laplacian(g);
    const auto hw = graph::compute_h_weights(l);
    Vector rho = (oracle::random_matrix(rng, n, 1).array() + 2.0).matrix();
    const auto probe = build_q_rho(l, hw, rho);
    EXPECT_LT((probe.Q_rho * Vector::Ones(n)).norm(), 1e-10);
    EXPECT_GE(linalg::min_eigenvalue_sym(probe.Q_rho), -1e-10);
    // mu = 1 / sum h_i / rho_i
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += hw.h(i) / rho(i);
    EXPECT_NEAR(probe.mu, 1.0 / s, 1e-14);
    const auto rep = verify_qrho_monotone(probe, samples(rng, n, 100));
    EXPECT_EQ(rep.violations, 0);
    EXPECT_EQ(rep.evaluations, 100 * n);
  }
}

TEST(SpectralLyapunov, AgreesWithKronecker) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 4;
    const Matrix a = oracle::random_hurwitz(rng, n);
    const Matrix w = Matrix::Identity(n, n);
    EXPECT_LT((spectral_lyapunov(a, w) - oracle::kron_lyapunov(a, w)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(PAlpha, DoubleIntegratorSlope) {
  std::vector<double> alphas;
  for (double a = 1e2; a <= 1e6 * 1.0001; a *= std::sqrt(10.0)) alphas.push_back(a);
  const auto rep = verify_palpha_scaling(reference::double_integrator(), 0.0, alphas);
  EXPECT_NEAR(rep.slope, -0.25, 0.02);
  EXPECT_TRUE(rep.norms_decreasing);
  EXPECT_EQ(rep.chain_length, 2);
  EXPECT_GE(rep.c, 1.0);
  EXPECT_LT(rep.c, 1e3);
}

TEST(PAlpha, ScalarClosedFormSlope) {
  const auto rep = verify_palpha_scaling(reference::scalar_integrator(), 0.0, {1.0, 10.0, 100.0});
  EXPECT_NEAR(rep.slope, -0.5, 1e-9);
  EXPECT_NEAR(rep.c, 1.0, 1e-9);
}

TEST(PAlpha, OrderOnCollabGrid) {
  const auto cd = protocol::design_collab_for_d(reference::collab_model(), 0.5);
  EXPECT_EQ(verify_palpha_order(*cd.cache, -40, 80, false).violations, 0);
  EXPECT_EQ(verify_palpha_order(*cd.cache, -40, 80, true).violations, 0);
}

TEST(Suite, PassesAndIsDeterministic) {
  const auto a = run_verification_suite(1);
  EXPECT_TRUE(a.all_pass()) << a.to_text();
  EXPECT_GE(a.checks.size(), 15u);
  EXPECT_EQ(a.to_text(), run_verification_suite(1).to_text());
  EXPECT_NE(a.to_text().find("check=lyapunov_oracle"), std::string::npos);
}

TEST(Suite, CorruptedSolutionIsCaught) {
  const auto rep = run_verification_suite(1, true);
  EXPECT_FALSE(rep.all_pass());
  bool care_failed = false;
  for (const auto& c : rep.checks)
    if (c.check == "care_residual") care_failed = !c.pass;
  EXPECT_TRUE(care_failed);
}
