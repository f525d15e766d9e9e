#pragma once

// Dense real linear algebra used throughout cohsync: spectra, Lyapunov and
// Riccati solvers, norms and rank decisions. All functions are pure.

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cohsync {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

/// Raised when an iterative method fails or an equation has no admissible
/// solution for the given data.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace linalg {

struct SpectrumReport {
  std::vector<Complex> eigenvalues;
  double max_real_part = 0.0;
  bool is_hurwitz = false;
};

/// All eigenvalues of a square matrix, sorted by (real, imag) ascending.
SpectrumReport eigenvalues(const Matrix& m);

/// Solves A^T X + X A + W = 0 for symmetric X by Kronecker vectorization.
/// Throws NumericalError when A is not Hurwitz.
Matrix solve_lyapunov(const Matrix& a, const Matrix& w);

struct CareOptions {
  /// Stop when successive Newton iterates differ by less than
  /// tolerance * max(1, |P|_max) in max-norm.
  double tolerance = 1e-12;
  int max_iterations = 200;
  /// Upper bound on the number of shift-continuation stages.
  int max_stages = 200;
};

/// Stabilizing solution of A^T P + P A - g P B B^T P + W = 0 (g = gain_scale)
/// by Newton-Kleinman iteration. Without a warm start the initial stabilizing
/// gain comes from a shift continuation sigma -> 0 on A - sigma I. A warm start
/// is used only if the gain it induces is stabilizing.
Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& w_state,
                  double gain_scale, const std::optional<Matrix>& warm_start = {},
                  const CareOptions& options = {});

/// Frobenius norm of A^T P + P A - g P B B^T P + W.
double care_residual(const Matrix& a, const Matrix& b, const Matrix& w_state,
                     double gain_scale, const Matrix& p);

/// Positive definite Q with A Q + Q A^T - Q C^T C Q + eta Q = 0.
/// Such a Q exists iff (C, A) is observable and every eigenvalue of
/// A + (eta/2) I has positive real part; otherwise NumericalError.
Matrix solve_dual_care_shifted(const Matrix& a, const Matrix& c, double eta);

double dual_care_residual(const Matrix& a, const Matrix& c, double eta,
                          const Matrix& q);

/// Largest singular value.
double operator_norm_2(const Matrix& m);

/// Smallest eigenvalue of a symmetric matrix. Rejects inputs whose
/// asymmetry exceeds 1e-12 relative to max(1, |M|_max).
double min_eigenvalue_sym(const Matrix& m);
double max_eigenvalue_sym(const Matrix& m);

// Helpers shared by the modelling modules.

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Singular values at or below rel_tol * sigma_max count as zero.
constexpr double kRankTolerance = 1e-9;

int numerical_rank(const Matrix& m, double rel_tol = kRankTolerance);
int numerical_rank(const ComplexMatrix& m, double rel_tol = kRankTolerance);

/// Rank together with a flag raised when some singular value falls in the
/// grey band (1e-12, 1e-6) relative to the largest one.
struct RankInfo {
  int rank = 0;
  bool ambiguous = false;
};
RankInfo rank_info(const Matrix& m, double rel_tol = kRankTolerance);
RankInfo rank_info(const ComplexMatrix& m, double rel_tol = kRankTolerance);

/// Real part below which an eigenvalue of `a` counts as strictly stable.
inline double stability_threshold(const Matrix& a) { return -1e-8 * (1.0 + max_abs(a)); }

/// Eigenvalues of A that fail the Hautus test rank [A - lambda I, B] = n.
std::vector<Complex> uncontrollable_modes(const Matrix& a, const Matrix& b);

/// Hautus test at every eigenvalue that is not clearly stable.
bool is_stabilizable(const Matrix& a, const Matrix& b);

/// Orthonormal basis (columns) of the null space of m.
Matrix null_space(const Matrix& m, double rel_tol = kRankTolerance);

/// Orthonormal basis (columns) of the column space of m.
Matrix range_space(const Matrix& m, double rel_tol = kRankTolerance);

/// Orthonormal basis (columns) of the orthogonal complement of span{1}.
Matrix ones_complement_basis(int n);

/// Sorts complex numbers by (real, imag) and returns them.
std::vector<Complex> sorted(std::vector<Complex> values);

/// Greedy multiset distance: the largest |a_i - b_pi(i)| under nearest
/// matching; infinity when sizes differ.
double multiset_distance(const std::vector<Complex>& a,
                         const std::vector<Complex>& b);

}  // namespace linalg
}  // namespace cohsync
