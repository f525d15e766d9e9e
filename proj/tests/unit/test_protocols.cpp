#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "cohsync/collab.hpp"
#include "cohsync/noncollab.hpp"
#include "cohsync/reference_models.hpp"
#include "oracles.hpp"

using namespace cohsync;
using namespace cohsync::protocol;

namespace {

const double kPrintedP[4][4] = {{3.0498, -0.7942, 2.0169, 0.8943},
                                {-0.7942, 0.9875, -1.7544, -0.7475},
                                {2.0169, -1.7544, 4.8899, 2.5890},
                                {0.8943, -0.7475, 2.5890, 2.2308}};

NoncollabDesign published(double d = 0.5) {
  auto ov = reference::noncollab_published_overrides();
  return design_noncollab_for_d(reference::noncollab_model(), d, ov);
}

}  // namespace

TEST(Noncollab, PrintedRiccatiSolution) {
  const auto nd = published();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(nd.P(i, j), kPrintedP[i][j], 1e-3) << i << "," << j;
  EXPECT_LT(linalg::care_residual(nd.transform.A_tilde, nd.B_tilde, Matrix::Identity(4, 4), 1.0, nd.P),
            1e-10);
}

TEST(Noncollab, GainRowAndKernel) {
  const auto nd = published();
  const double row[4] = {0.8943, -0.7475, 2.5890, 2.2308};
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(nd.gain_row(0, j), row[j], 1e-3);
  EXPECT_NEAR(nd.rho_kernel(2, 2), 6.7030, 1e-3);
  EXPECT_NEAR(nd.rho_kernel(0, 3), 1.9950, 1e-3);
  EXPECT_LT((nd.rho_kernel - nd.rho_kernel.transpose()).norm(), 1e-14);
}

TEST(Noncollab, DeltaBookkeeping) {
  const auto nd = published(0.5);
  EXPECT_DOUBLE_EQ(nd.d, 0.5);
  EXPECT_LT(nd.d, nd.d_upper_bound());
  EXPECT_NEAR(nd.delta_1, nd.delta * nd.delta * linalg::min_eigenvalue_sym(nd.P), 1e-14);
  EXPECT_NEAR(nd.delta_bar, 0.9 * nd.delta_1, 1e-14);
  EXPECT_NEAR(nd.output_norm,
              oracle::power_norm2(reference::noncollab_model().C * nd.transform.S_inv), 1e-9);

  const auto free = design_noncollab(reference::noncollab_model(), 2.0);
  EXPECT_NEAR(free.d, 0.9 * free.d_upper_bound(), 1e-14);
  NoncollabOverrides too_big;
  too_big.d = 10.0;
  EXPECT_THROW(design_noncollab(reference::noncollab_model(), 1.0, too_big), std::invalid_argument);
}

TEST(Noncollab, RejectsNonMinimumPhase) {
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << 0, 1, 0, 0;
  b << 0, 1;
  c << -1, 1;  // zero at s = 1
  try {
    design_noncollab(model::AgentModel{a, b, c, Matrix(2, 0)}, 1.0);
    FAIL() << "expected an assumption error";
  } catch (const model::AssumptionError& e) {
    EXPECT_EQ(e.assumption(), "minimum-phase");
  }
}

TEST(Noncollab, DerivativesFollowTheLaw) {
  const auto nd = published();
  const auto& tr = nd.transform;
  Vector xi1(3), zeta(2);
  xi1 << 0.3, -0.2, 0.5;
  zeta << 0.1, -0.4;
  const auto r = noncollab_derivatives(nd, xi1, 2.0, zeta);
  const Vector xi = assemble_xi_hat(nd, xi1, zeta);
  EXPECT_DOUBLE_EQ(xi(3), zeta(1));
  const Vector expect_dxi = tr.A11 * xi1 + tr.A12 * zeta.tail(1) + nd.H1 * (tr.C1 * xi1 - zeta.head(1));
  EXPECT_LT((r.dxi1_hat - expect_dxi).norm(), 1e-14);
  EXPECT_NEAR(r.proxy, coherency_proxy(nd, xi), 1e-14);
  EXPECT_NEAR(r.u(0), -2.0 * (nd.gain_row * xi)(0), 1e-14);
  if (r.proxy >= nd.d) {
    EXPECT_NEAR(r.drho, xi.dot(nd.rho_kernel * xi), 1e-13);
  }
  // inside the dead zone the gain is frozen
  const auto quiet = noncollab_derivatives(nd, 1e-3 * xi1, 2.0, 1e-3 * zeta);
  EXPECT_LT(quiet.proxy, nd.d);
  EXPECT_EQ(quiet.drho, 0.0);
}

TEST(Noncollab, DefaultTransformAlsoWorks) {
  const auto nd = design_noncollab_for_d(reference::noncollab_model(), 0.3);
  EXPECT_NEAR(nd.d, 0.3, 1e-15);
  for (const auto& z : oracle::eigenvalues(nd.transform.A_tilde - nd.B_tilde * nd.gain_row))
    EXPECT_LT(z.real(), 0.0);
}

TEST(Collab, DualRiccatiOnReferenceModel) {
  const auto cd = design_collab_for_d(reference::collab_model(), 0.5);
  EXPECT_GT(linalg::min_eigenvalue_sym(cd.Q), 0.0);
  EXPECT_LT(linalg::dual_care_residual(cd.A, cd.C, cd.eta, cd.Q), 1e-9);
  // the eta search doubles from 1 and stops at the first admissible value
  EXPECT_DOUBLE_EQ(cd.eta, 8.0);
  EXPECT_THROW(linalg::solve_dual_care_shifted(cd.A, cd.C, 4.0), NumericalError);
}

TEST(Collab, ParametersFromD) {
  const auto cd = design_collab_for_d(reference::collab_model(), 0.2);
  EXPECT_DOUBLE_EQ(cd.d, 0.2);
  EXPECT_NEAR(cd.delta * cd.delta / 8.0, 0.2, 1e-15);
  EXPECT_GT(cd.epsilon, 0.0);
  EXPECT_LE(cd.epsilon, 0.1);
  CollabOptions opts;
  opts.d = 1.0;
  EXPECT_THROW(design_collab(reference::collab_model(), 1.0, opts), std::invalid_argument);
}

TEST(Collab, ScalarPAlphaClosedForm) {
  // (0 + eps) p * 2 - alpha p^2 + 1 = 0 with eps = 0
  PAlphaCache cache(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  for (double alpha : {0.25, 1.0, 4.0, 100.0}) {
    EXPECT_NEAR(cache.solve_fresh(alpha)(0, 0), 1.0 / std::sqrt(alpha), 1e-12);
  }
  for (int k : {-20, 0, 37}) {
    EXPECT_NEAR((*cache.at_index(k))(0, 0), 1.0 / std::sqrt(PAlphaCache::grid_alpha(k)), 1e-12);
  }
}

TEST(Collab, GridIndexing) {
  EXPECT_EQ(PAlphaCache::grid_index(1.0), 0);
  EXPECT_EQ(PAlphaCache::grid_index(1.05), 1);
  EXPECT_EQ(PAlphaCache::grid_index(1.0499), 0);
  EXPECT_EQ(PAlphaCache::grid_index(0.99), -1);
  EXPECT_EQ(PAlphaCache::grid_index(1e-300), PAlphaCache::kMinIndex);
  EXPECT_EQ(PAlphaCache::grid_index(1e300), PAlphaCache::kMaxIndex);
  for (int k = -50; k <= 50; ++k) EXPECT_EQ(PAlphaCache::grid_index(PAlphaCache::grid_alpha(k)), k);
}

TEST(Collab, CacheIsOrderIndependentAndThreadSafe) {
  const auto a = design_collab_for_d(reference::collab_model(), 0.5);
  const auto b = design_collab_for_d(reference::collab_model(), 0.5);
  // different request orders give bitwise-equal entries
  const Matrix pa = *a.cache->at_index(60);
  b.cache->at_index(-10);
  b.cache->at_index(30);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t) pool.emplace_back([&b, t] { b.cache->at_index(20 + 15 * t); });
  for (auto& th : pool) th.join();
  EXPECT_EQ(pa, *b.cache->at_index(60));
  const Matrix fresh = solve_p_alpha(a, PAlphaCache::grid_alpha(60));
  EXPECT_LT((fresh - pa).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, pa.norm()));
}

TEST(Collab, DerivativesFollowTheLaw) {
  const auto cd = design_collab_for_d(reference::collab_model(), 0.5);
  Vector x_hat(3), zt(3), zeta(1);
  x_hat << 0.1, 0.2, -0.3;
  zt << 1.0, -0.5, 0.7;
  zeta << 0.2;
  const auto r = collab_derivatives(cd, x_hat, 1.5, 2.0, zeta, zt);
  const double ct = (cd.C * zt)(0);
  EXPECT_NEAR(r.output_proxy, ct * ct, 1e-14);
  EXPECT_NEAR(r.observer_proxy, (ct - 0.2) * (ct - 0.2), 1e-14);
  const Matrix p = *cd.cache->for_alpha(2.0);
  const Vector u = -2.0 * cd.B.transpose() * p * (x_hat + zt);
  EXPECT_LT((r.u - u).norm(), 1e-14);
  const Vector dx = cd.A * x_hat + cd.B * u - 1.5 * cd.QCt * (cd.C * zt - zeta);
  EXPECT_LT((r.dx_hat - dx).norm(), 1e-13);
  // alpha = 0 means no control
  const auto idle = collab_derivatives(cd, x_hat, 0.0, 0.0, zeta, zt);
  EXPECT_EQ(idle.u.norm(), 0.0);
  // dead zones
  const auto quiet = collab_derivatives(cd, x_hat, 1.0, 1.0, zeta * 0.0, zt * 0.0);
  EXPECT_EQ(quiet.drho, 0.0);
  EXPECT_EQ(quiet.dalpha, 0.0);
}

TEST(Collab, RejectsNonMinimumPhase) {
  Matrix a(2, 2), b(2, 1), c(1, 2);
  a << 0, 1, 0, 0;
  b << 0, 1;
  c << -1, 1;
  try {
    design_collab(model::AgentModel{a, b, c, Matrix(2, 0)}, 1.0);
    FAIL();
  } catch (const model::AssumptionError& e) {
    EXPECT_EQ(e.assumption(), "minimum-phase");
  }
}
