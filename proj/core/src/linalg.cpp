#include "cohsync/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace cohsync::linalg {
namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + ": matrix must be square");
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  const double scale = std::max(1.0, max_abs(m));
  return max_abs(m - m.transpose()) <= rel_tol * scale;
}

Matrix newton_kleinman(const Matrix& a, const Matrix& b, const Matrix& w,
                       double g, Matrix gain, const CareOptions& options) {
  Matrix p_prev;
  double prev_diff = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    const Matrix closed = a - b * gain;
    if (!eigenvalues(closed).is_hurwitz) {
      throw NumericalError("solve_care: Newton iterate lost closed-loop stability");
    }
    const Matrix p = symmetrize(
        solve_lyapunov(closed, w + gain.transpose() * gain / g));
    const double scale = std::max(1.0, max_abs(p));
    if (min_eigenvalue_sym(p) < -1e-8 * scale) {
      throw NumericalError("solve_care: indefinite intermediate iterate");
    }
    if (it > 0) {
      const double diff = max_abs(p - p_prev);
      if (diff <= options.tolerance * scale) return p;
      // Quadratic convergence has stalled at roundoff level.
      if (it > 5 && diff >= prev_diff && diff <= 1e-9 * scale) return p;
      prev_diff = diff;
    }
    p_prev = p;
    gain = g * b.transpose() * p;
  }
  throw NumericalError("solve_care: Newton-Kleinman iteration did not converge");
}

}  // namespace

SpectrumReport eigenvalues(const Matrix& m) {
  require_square(m, "eigenvalues");
  require_finite(m, "eigenvalues");
  SpectrumReport report;
  if (m.rows() == 0) {
    report.max_real_part = -std::numeric_limits<double>::infinity();
    report.is_hurwitz = true;
    return report;
  }
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigenvalues: QR iteration failed to converge");
  }
  const auto& values = solver.eigenvalues();
  report.eigenvalues.assign(values.data(), values.data() + values.size());
  report.eigenvalues = sorted(std::move(report.eigenvalues));
  report.max_real_part = -std::numeric_limits<double>::infinity();
  for (const auto& v : report.eigenvalues) {
    report.max_real_part = std::max(report.max_real_part, v.real());
  }
  report.is_hurwitz = report.max_real_part < 0.0;
  return report;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& w) {
  require_square(a, "solve_lyapunov");
  require_square(w, "solve_lyapunov");
  if (a.rows() != w.rows()) {
    throw std::invalid_argument("solve_lyapunov: dimension mismatch");
  }
  require_finite(a, "solve_lyapunov");
  require_finite(w, "solve_lyapunov");
  if (!eigenvalues(a).is_hurwitz) {
    throw NumericalError("solve_lyapunov: A is not Hurwitz");
  }
  const Eigen::Index n = a.rows();
  // Column-major vec: vec(A^T X) = (I (x) A^T) vec X, vec(X A) = (A^T (x) I) vec X.
  Matrix kron = Matrix::Zero(n * n, n * n);
  for (Eigen::Index blk = 0; blk < n; ++blk) {
    kron.block(blk * n, blk * n, n, n) += a.transpose();
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      kron.block(r * n, c * n, n, n).diagonal().array() += a(c, r);
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(Matrix(w).data(), n * n);
  const Vector x = kron.partialPivLu().solve(rhs);
  return symmetrize(Eigen::Map<const Matrix>(x.data(), n, n));
}

Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& w_state,
                  double gain_scale, const std::optional<Matrix>& warm_start,
                  const CareOptions& options) {
  require_square(a, "solve_care");
  require_square(w_state, "solve_care");
  if (b.rows() != a.rows() || w_state.rows() != a.rows()) {
    throw std::invalid_argument("solve_care: dimension mismatch");
  }
  if (!(gain_scale > 0.0) || !std::isfinite(gain_scale)) {
    throw std::invalid_argument("solve_care: gain_scale must be positive");
  }
  if (!is_symmetric(w_state, 1e-12)) {
    throw std::invalid_argument("solve_care: state weight must be symmetric");
  }
  if (!is_stabilizable(a, b)) {
    throw NumericalError("solve_care: (A, B) is not stabilizable");
  }
  const Eigen::Index n = a.rows();
  const Matrix w = symmetrize(w_state);

  auto finish = [&](const Matrix& p) {
    const double res = care_residual(a, b, w, gain_scale, p);
    if (res > 1e-8 * (1.0 + p.squaredNorm())) {
      throw NumericalError("solve_care: residual check failed");
    }
    if (!eigenvalues(a - gain_scale * b * b.transpose() * p).is_hurwitz) {
      throw NumericalError("solve_care: solution is not stabilizing");
    }
    return p;
  };

  if (warm_start) {
    const Matrix gain = gain_scale * b.transpose() * (*warm_start);
    if (eigenvalues(a - b * gain).is_hurwitz) {
      try {
        return finish(newton_kleinman(a, b, w, gain_scale, gain, options));
      } catch (const NumericalError&) {
        // fall through to the cold start
      }
    }
  }

  const double max_re = eigenvalues(a).max_real_part;
  // Eigenvalues on the imaginary axis can come back with a tiny negative
  // real part, so only a clear margin counts as Hurwitz here.
  double sigma = max_re < stability_threshold(a) ? 0.0 : std::max(max_re, 0.0) + 1.0;
  Matrix gain = Matrix::Zero(b.cols(), n);
  for (int stage = 0; stage < options.max_stages; ++stage) {
    const Matrix shifted = a - sigma * Matrix::Identity(n, n);
    const Matrix p = newton_kleinman(shifted, b, w, gain_scale, gain, options);
    gain = gain_scale * b.transpose() * p;
    if (sigma == 0.0) return finish(p);
    const double margin = -eigenvalues(shifted - b * gain).max_real_part;
    sigma = std::max(0.0, sigma - 0.9 * margin);
    if (sigma < 1e-12) sigma = 0.0;
  }
  throw NumericalError("solve_care: shift continuation did not reach sigma = 0");
}

double care_residual(const Matrix& a, const Matrix& b, const Matrix& w_state,
                     double gain_scale, const Matrix& p) {
  return (a.transpose() * p + p * a - gain_scale * p * b * b.transpose() * p + w_state)
      .norm();
}

Matrix solve_dual_care_shifted(const Matrix& a, const Matrix& c, double eta) {
  require_square(a, "solve_dual_care_shifted");
  if (c.cols() != a.cols()) {
    throw std::invalid_argument("solve_dual_care_shifted: dimension mismatch");
  }
  if (!(eta > 0.0)) {
    throw std::invalid_argument("solve_dual_care_shifted: eta must be positive");
  }
  const Eigen::Index n = a.rows();
  // Observability of (C, A) via the stacked observability matrix.
  Matrix obs(c.rows() * n, n);
  Matrix block = c;
  for (Eigen::Index k = 0; k < n; ++k) {
    obs.middleRows(k * c.rows(), c.rows()) = block;
    block = block * a;
  }
  if (numerical_rank(obs) < n) {
    throw NumericalError("solve_dual_care_shifted: (C, A) is not observable");
  }
  // With X = Q^{-1}: X (A + eta/2 I) + (A + eta/2 I)^T X = C^T C.
  const Matrix anti = -(a + 0.5 * eta * Matrix::Identity(n, n));
  if (!eigenvalues(anti).is_hurwitz) {
    throw NumericalError(
        "solve_dual_care_shifted: no positive definite solution for this eta "
        "(A + eta/2 I must have all eigenvalues in the open right half plane)");
  }
  const Matrix x = solve_lyapunov(anti, c.transpose() * c);
  if (min_eigenvalue_sym(x) <= 0.0) {
    throw NumericalError("solve_dual_care_shifted: inverse solution not positive definite");
  }
  const Matrix q = symmetrize(x.ldlt().solve(Matrix::Identity(n, n)));
  if (dual_care_residual(a, c, eta, q) > 1e-8 * (1.0 + q.squaredNorm())) {
    throw NumericalError("solve_dual_care_shifted: residual check failed");
  }
  return q;
}

double dual_care_residual(const Matrix& a, const Matrix& c, double eta,
                          const Matrix& q) {
  return (a * q + q * a.transpose() - q * c.transpose() * c * q + eta * q).norm();
}

double operator_norm_2(const Matrix& m) {
  require_finite(m, "operator_norm_2");
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double min_eigenvalue_sym(const Matrix& m) {
  require_square(m, "min_eigenvalue_sym");
  require_finite(m, "min_eigenvalue_sym");
  if (!is_symmetric(m, 1e-12)) {
    throw std::invalid_argument("min_eigenvalue_sym: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

double max_eigenvalue_sym(const Matrix& m) {
  require_square(m, "max_eigenvalue_sym");
  if (!is_symmetric(m, 1e-12)) {
    throw std::invalid_argument("max_eigenvalue_sym: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(solver.eigenvalues().size() - 1);
}

int numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++rank;
  }
  return rank;
}

int numerical_rank(const ComplexMatrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++rank;
  }
  return rank;
}

Matrix null_space(const Matrix& m, double rel_tol) {
  if (m.rows() == 0) return Matrix::Identity(m.cols(), m.cols());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const int rank = numerical_rank(m, rel_tol);
  return svd.matrixV().rightCols(m.cols() - rank);
}

Matrix range_space(const Matrix& m, double rel_tol) {
  if (m.cols() == 0) return Matrix(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  const int rank = numerical_rank(m, rel_tol);
  return svd.matrixU().leftCols(rank);
}

Matrix ones_complement_basis(int n) {
  if (n < 1) throw std::invalid_argument("ones_complement_basis: n must be >= 1");
  const Vector ones = Vector::Ones(n);
  Eigen::HouseholderQR<Matrix> qr{Matrix(ones)};
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - 1);
}

std::vector<Complex> sorted(std::vector<Complex> values) {
  std::sort(values.begin(), values.end(), [](const Complex& x, const Complex& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  return values;
}

double multiset_distance(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<Complex> pool = sorted(b);
  double worst = 0.0;
  for (const Complex& x : sorted(a)) {
    auto best = pool.begin();
    for (auto it = pool.begin(); it != pool.end(); ++it) {
      if (std::abs(*it - x) < std::abs(*best - x)) best = it;
    }
    worst = std::max(worst, std::abs(*best - x));
    pool.erase(best);
  }
  return worst;
}

std::vector<Complex> uncontrollable_modes(const Matrix& a, const Matrix& b) {
  const auto n = a.rows();
  std::vector<Complex> out;
  for (const Complex& lambda : eigenvalues(a).eigenvalues) {
    ComplexMatrix pencil(n, n + b.cols());
    pencil.leftCols(n) = a.cast<Complex>() - lambda * ComplexMatrix::Identity(n, n);
    pencil.rightCols(b.cols()) = b.cast<Complex>();
    if (numerical_rank(pencil) < n) out.push_back(lambda);
  }
  return out;
}

bool is_stabilizable(const Matrix& a, const Matrix& b) {
  const double threshold = stability_threshold(a);
  for (const Complex& lambda : uncontrollable_modes(a, b)) {
    if (lambda.real() >= threshold) return false;
  }
  return true;
}

namespace {

template <typename M>
RankInfo rank_info_impl(const M& m, double rel_tol) {
  RankInfo info;
  if (m.size() == 0) return info;
  Eigen::JacobiSVD<M> svd(m);
  const auto& sv = svd.singularValues();
  const double top = sv.size() > 0 ? sv(0) : 0.0;
  if (top == 0.0) return info;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) > rel_tol * top) ++info.rank;
    if (sv(k) > 1e-12 * top && sv(k) < 1e-6 * top) info.ambiguous = true;
  }
  return info;
}

}  // namespace

RankInfo rank_info(const Matrix& m, double rel_tol) { return rank_info_impl(m, rel_tol); }
RankInfo rank_info(const ComplexMatrix& m, double rel_tol) { return rank_info_impl(m, rel_tol); }

}  // namespace cohsync::linalg
