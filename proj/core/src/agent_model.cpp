#include "cohsync/agent_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "detail_random.hpp"

namespace cohsync::model {
namespace {

constexpr std::uint64_t kSquareDownSeed = 0x5eed2024ULL;

double unit_draw(std::mt19937_64& engine) { return detail::uniform_symmetric(engine); }

Matrix random_matrix(int rows, int cols, std::mt19937_64& engine) {
  Matrix out(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) out(r, c) = unit_draw(engine);
  }
  return out;
}

ComplexMatrix rosenbrock(const Matrix& a, const Matrix& b, const Matrix& c, Complex s) {
  const auto n = a.rows();
  const auto m = b.cols();
  const auto p = c.rows();
  ComplexMatrix out = ComplexMatrix::Zero(n + p, n + m);
  out.topLeftCorner(n, n) = a.cast<Complex>() - s * ComplexMatrix::Identity(n, n);
  out.topRightCorner(n, m) = b.cast<Complex>();
  out.bottomLeftCorner(p, n) = c.cast<Complex>();
  return out;
}

struct ZeroAnalysis {
  int normal_rank = 0;
  std::vector<Complex> zeros;
  bool ambiguous = false;
};

ZeroAnalysis analyse_zeros(const AgentModel& model) {
  const Matrix& a = model.A;
  const Matrix& b = model.B;
  const Matrix& c = model.C;
  const int n = model.n();
  const int m = model.m();
  const int p = model.p();
  ZeroAnalysis out;

  std::mt19937_64 engine(kSquareDownSeed);
  const double radius = 1.0 + linalg::max_abs(a);
  for (int k = 0; k < 3; ++k) {
    const Complex s(radius * unit_draw(engine), radius * unit_draw(engine));
    const auto info = linalg::rank_info(rosenbrock(a, b, c, s));
    out.normal_rank = std::max(out.normal_rank, info.rank);
  }
  const int k = std::min(m, p);
  if (out.normal_rank < n + k) return out;

  Matrix bs = b;
  Matrix cs = c;
  if (p > m) cs = random_matrix(m, p, engine) * c;
  if (m > p) bs = b * random_matrix(m, p, engine);

  Matrix pencil = Matrix::Zero(n + k, n + k);
  pencil.topLeftCorner(n, n) = a;
  pencil.topRightCorner(n, k) = bs;
  pencil.bottomLeftCorner(k, n) = cs;
  Matrix mass = Matrix::Zero(n + k, n + k);
  mass.topLeftCorner(n, n).setIdentity();

  Eigen::GeneralizedEigenSolver<Matrix> solver(pencil, mass, false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("invariant_zeros: QZ iteration failed");
  }
  const auto alphas = solver.alphas();
  const auto betas = solver.betas();
  // Infinite eigenvalues come back with beta at roundoff level; anything far
  // beyond the data scale is treated as infinite.
  const double cutoff = 1e6 * (1.0 + linalg::max_abs(pencil));
  const bool squared_down = (p != m);
  for (Eigen::Index idx = 0; idx < alphas.size(); ++idx) {
    const double beta = betas(idx);
    if (beta == 0.0 || std::abs(alphas(idx)) > cutoff * std::abs(beta)) continue;
    const Complex z = alphas(idx) / beta;
    if (squared_down) {
      Eigen::JacobiSVD<ComplexMatrix> svd(rosenbrock(a, b, c, z));
      const auto& sv = svd.singularValues();
      if (sv(out.normal_rank - 1) > 1e-7 * sv(0)) continue;
    }
    out.zeros.push_back(z);
  }
  // Make conjugate pairs exact.
  for (auto& z : out.zeros) {
    if (std::abs(z.imag()) <= 1e-12 * (1.0 + std::abs(z))) z = Complex(z.real(), 0.0);
  }
  out.zeros = linalg::sorted(std::move(out.zeros));
  return out;
}

struct HautusResult {
  bool ok = true;
  bool ambiguous = false;
};

// rank [A - lambda I, B] = n at each eigenvalue; with `all_modes` false only
// the modes that are not clearly stable are tested.
HautusResult hautus(const Matrix& a, const Matrix& b, bool all_modes) {
  HautusResult out;
  const auto n = a.rows();
  const double threshold = linalg::stability_threshold(a);
  for (const Complex& lambda : linalg::eigenvalues(a).eigenvalues) {
    if (!all_modes && lambda.real() < threshold) continue;
    ComplexMatrix pencil(n, n + b.cols());
    pencil.leftCols(n) = a.cast<Complex>() - lambda * ComplexMatrix::Identity(n, n);
    pencil.rightCols(b.cols()) = b.cast<Complex>();
    const auto info = linalg::rank_info(pencil);
    out.ambiguous = out.ambiguous || info.ambiguous;
    if (info.rank < n) out.ok = false;
  }
  return out;
}

TriState uniform_rank_check(const AgentModel& model, bool& ambiguous) {
  if (model.m() != model.p()) return TriState::undetermined;
  const double na = 1.0 + linalg::max_abs(model.A);
  const double scale = (1.0 + linalg::max_abs(model.B)) * (1.0 + linalg::max_abs(model.C));
  Matrix propagated = model.B;
  double growth = 1.0;
  for (int k = 0; k < model.n(); ++k) {
    const Matrix markov = model.C * propagated;
    if (linalg::max_abs(markov) > 1e-10 * scale * growth) {
      const auto info = linalg::rank_info(markov);
      ambiguous = ambiguous || info.ambiguous;
      return info.rank == model.m() ? TriState::yes : TriState::no;
    }
    propagated = model.A * propagated;
    growth *= na;
  }
  return TriState::no;
}

void require_close(const Matrix& actual, const Matrix& expected, const char* what) {
  const double scale = std::max(1.0, linalg::max_abs(expected));
  if (actual.rows() != expected.rows() || actual.cols() != expected.cols() ||
      linalg::max_abs(actual - expected) > 1e-10 * scale) {
    throw std::invalid_argument(std::string("build_output_transform: ") + what);
  }
}

}  // namespace

void AgentModel::validate() const {
  if (A.rows() < 1 || A.rows() != A.cols()) {
    throw std::invalid_argument("model: A must be square and nonempty");
  }
  if (B.rows() != A.rows() || B.cols() < 1) {
    throw std::invalid_argument("model: B must have n rows and at least one column");
  }
  if (C.cols() != A.rows() || C.rows() < 1) {
    throw std::invalid_argument("model: C must have n columns and at least one row");
  }
  if (E.rows() != A.rows()) throw std::invalid_argument("model: E must have n rows");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !E.allFinite()) {
    throw std::invalid_argument("model: non-finite entry");
  }
  if (linalg::numerical_rank(B) < m()) {
    throw std::invalid_argument("model: B must have full column rank");
  }
  if (linalg::numerical_rank(C) < p()) {
    throw std::invalid_argument("model: C must have full row rank");
  }
}

const char* to_string(TriState value) {
  switch (value) {
    case TriState::yes:
      return "yes";
    case TriState::no:
      return "no";
    case TriState::undetermined:
      break;
  }
  return "undetermined";
}

std::optional<std::string> AssumptionReport::noncollab_failure() const {
  if (!stabilizable) return "stabilizability";
  if (!detectable) return "detectability";
  if (!image_E_in_image_B) return "image E in image B";
  if (!relative_degree_one) return "relative degree one";
  if (!left_invertible) return "left-invertibility";
  if (!minimum_phase) return "minimum-phase";
  return std::nullopt;
}

std::optional<std::string> AssumptionReport::collab_failure() const {
  if (!stabilizable) return "stabilizability";
  if (!observable) return "observability";
  if (!right_invertible) return "right-invertibility";
  if (!minimum_phase) return "minimum-phase";
  if (uniform_rank == TriState::no) return "uniform rank";
  if (uniform_rank == TriState::undetermined) return "uniform rank (undetermined)";
  return std::nullopt;
}

std::vector<Complex> invariant_zeros(const AgentModel& model) {
  model.validate();
  return analyse_zeros(model).zeros;
}

AssumptionReport check_assumptions(const AgentModel& model) {
  model.validate();
  AssumptionReport report;
  const auto stab = hautus(model.A, model.B, false);
  const auto det = hautus(model.A.transpose(), model.C.transpose(), false);
  const auto obs = hautus(model.A.transpose(), model.C.transpose(), true);
  report.stabilizable = stab.ok;
  report.detectable = det.ok;
  report.observable = obs.ok;
  report.rank_ambiguous = stab.ambiguous || det.ambiguous || obs.ambiguous;

  if (model.w() == 0) {
    report.image_E_in_image_B = true;
  } else {
    const Matrix z = model.B.completeOrthogonalDecomposition().solve(model.E);
    const double residual = linalg::max_abs(model.B * z - model.E);
    report.image_E_in_image_B = residual < 1e-10 * std::max(1.0, linalg::max_abs(model.E));
  }

  const auto cb = linalg::rank_info(Matrix(model.C * model.B));
  report.relative_degree_one = cb.rank == model.m();
  report.rank_ambiguous = report.rank_ambiguous || cb.ambiguous;

  const ZeroAnalysis zeros = analyse_zeros(model);
  report.left_invertible = zeros.normal_rank == model.n() + model.m();
  report.right_invertible = zeros.normal_rank == model.n() + model.p();
  report.invariant_zeros = zeros.zeros;
  const double threshold = linalg::stability_threshold(model.A);
  report.minimum_phase =
      (report.left_invertible || report.right_invertible) &&
      std::all_of(zeros.zeros.begin(), zeros.zeros.end(),
                  [threshold](const Complex& z) { return z.real() < threshold; });
  bool ambiguous = false;
  report.uniform_rank = uniform_rank_check(model, ambiguous);
  report.rank_ambiguous = report.rank_ambiguous || ambiguous;
  return report;
}

OutputTransform build_output_transform(const AgentModel& model,
                                       const std::optional<Matrix>& s_override,
                                       const std::optional<Matrix>& t_override) {
  model.validate();
  const int n = model.n();
  const int m = model.m();
  const int p = model.p();
  const Matrix cb = model.C * model.B;
  if (linalg::numerical_rank(cb) < m) {
    throw AssumptionError("relative degree one", "CB does not have full column rank");
  }

  OutputTransform out;
  out.n1 = n - m;
  out.m = m;
  if (s_override) {
    out.S = *s_override;
    if (out.S.rows() != n || out.S.cols() != n || linalg::numerical_rank(out.S) < n) {
      throw std::invalid_argument("build_output_transform: S must be invertible n x n");
    }
  } else {
    const Matrix left_null_b = linalg::null_space(model.B.transpose()).transpose();
    out.S.resize(n, n);
    out.S.topRows(n - m) = left_null_b;
    out.S.bottomRows(m) = cb.completeOrthogonalDecomposition().pseudoInverse() * model.C;
  }
  out.S_inv = out.S.inverse();

  // T is induced by the output columns that x2 drives.
  const Matrix c_s = model.C * out.S_inv;
  if (t_override) {
    out.T = *t_override;
    if (out.T.rows() != p || out.T.cols() != p || linalg::numerical_rank(out.T) < p) {
      throw std::invalid_argument("build_output_transform: T must be invertible p x p");
    }
  } else {
    const Matrix cb_s = c_s.rightCols(m);
    out.T.resize(p, p);
    out.T.topRows(p - m) = linalg::null_space(cb_s.transpose()).transpose();
    out.T.bottomRows(m) = cb_s.completeOrthogonalDecomposition().pseudoInverse();
  }

  out.A_tilde = out.S * model.A * out.S_inv;
  out.B_tilde = out.S * model.B;
  out.C_tilde = out.T * c_s;
  out.E_tilde = out.S * model.E;

  const int n1 = out.n1;
  require_close(out.B_tilde.topRows(n1), Matrix::Zero(n1, m), "S B must vanish on the top block");
  out.B2 = out.B_tilde.bottomRows(m);
  if (linalg::numerical_rank(out.B2) < m) {
    throw std::invalid_argument("build_output_transform: B2 is singular");
  }
  require_close(out.C_tilde.topRightCorner(p - m, m), Matrix::Zero(p - m, m),
                "T C S^-1 must have a zero upper-right block");
  require_close(out.C_tilde.bottomLeftCorner(m, n1), Matrix::Zero(m, n1),
                "T C S^-1 must have a zero lower-left block");
  require_close(out.C_tilde.bottomRightCorner(m, m), Matrix::Identity(m, m),
                "T C S^-1 must have an identity lower-right block");

  out.A11 = out.A_tilde.topLeftCorner(n1, n1);
  out.A12 = out.A_tilde.topRightCorner(n1, m);
  out.A21 = out.A_tilde.bottomLeftCorner(m, n1);
  out.A22 = out.A_tilde.bottomRightCorner(m, m);
  out.C1 = out.C_tilde.topLeftCorner(p - m, n1);
  out.E2 = out.E_tilde.bottomRows(m);
  return out;
}

std::vector<Complex> zeros_from_transform(const OutputTransform& transform) {
  const Matrix& a11 = transform.A11;
  const Matrix& c1 = transform.C1;
  const auto n1 = a11.rows();
  if (n1 == 0) return {};
  if (c1.rows() == 0) return linalg::eigenvalues(a11).eigenvalues;
  Matrix obs(c1.rows() * n1, n1);
  Matrix block = c1;
  for (Eigen::Index k = 0; k < n1; ++k) {
    obs.middleRows(k * c1.rows(), c1.rows()) = block;
    block = block * a11;
  }
  const Matrix basis = linalg::null_space(obs);
  if (basis.cols() == 0) return {};
  return linalg::eigenvalues(basis.transpose() * a11 * basis).eigenvalues;
}

Matrix design_observer_gain(const Matrix& a11, const Matrix& c1) {
  const auto n1 = a11.rows();
  if (c1.cols() != n1) throw std::invalid_argument("design_observer_gain: dimension mismatch");
  if (n1 == 0) return Matrix(0, c1.rows());
  if (c1.rows() == 0) {
    if (linalg::eigenvalues(a11).max_real_part >= linalg::stability_threshold(a11)) {
      throw AssumptionError("detectability of (C1, A11)", "A11 is not Hurwitz and C1 is empty");
    }
    return Matrix(n1, 0);
  }
  if (!linalg::is_stabilizable(a11.transpose(), c1.transpose())) {
    throw AssumptionError("detectability of (C1, A11)", "Hautus test failed");
  }
  const Matrix y = linalg::solve_care(a11.transpose(), c1.transpose(),
                                      Matrix::Identity(n1, n1), 1.0);
  const Matrix h1 = -y * c1.transpose();
  if (!linalg::eigenvalues(a11 + h1 * c1).is_hurwitz) {
    throw NumericalError("design_observer_gain: closed loop is not Hurwitz");
  }
  return h1;
}

}  // namespace cohsync::model
