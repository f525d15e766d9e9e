#include "cohsync/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "cohsync/noncollab.hpp"
#include "cohsync/reference_models.hpp"
#include "detail_random.hpp"

namespace cohsync::verify {
namespace {

constexpr double kPsdTolerance = 1e-9;

Matrix random_matrix(int rows, int cols, std::mt19937_64& engine) {
  Matrix out(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) out(r, c) = detail::uniform_symmetric(engine);
  }
  return out;
}

int draw_int(std::mt19937_64& engine, int lo, int hi) {
  return lo + static_cast<int>(engine() % static_cast<std::uint64_t>(hi - lo + 1));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

Matrix random_hurwitz(int n, std::mt19937_64& engine) {
  Matrix a = random_matrix(n, n, engine);
  const double shift = linalg::eigenvalues(a).max_real_part + 0.5 +
                       0.5 * (detail::uniform_symmetric(engine) + 1.0);
  return a - shift * Matrix::Identity(n, n);
}

Matrix random_symmetric(int n, std::mt19937_64& engine) {
  return linalg::symmetrize(random_matrix(n, n, engine));
}

// Square relative-degree-one model with prescribed stable zero dynamics,
// expressed in a random basis.
model::AgentModel random_minimum_phase(int n, int m, std::mt19937_64& engine) {
  const int n1 = n - m;
  Matrix at = random_matrix(n, n, engine);
  if (n1 > 0) at.topLeftCorner(n1, n1) = random_hurwitz(n1, engine);
  Matrix bt = Matrix::Zero(n, m);
  bt.bottomRows(m).setIdentity();
  Matrix ct = Matrix::Zero(m, n);
  ct.rightCols(m).setIdentity();
  Matrix s = random_matrix(n, n, engine) + 2.0 * Matrix::Identity(n, n);
  while (linalg::numerical_rank(s) < n) s = random_matrix(n, n, engine) + 2.0 * Matrix::Identity(n, n);
  const Matrix s_inv = s.inverse();
  model::AgentModel out;
  out.A = s_inv * at * s;
  out.B = s_inv * bt;
  out.C = ct * s;
  out.E = out.B;
  return out;
}

double psd_min_eig(const Matrix& m) { return linalg::min_eigenvalue_sym(linalg::symmetrize(m)); }

}  // namespace

bool Report::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::string Report::to_text() const {
  std::ostringstream out;
  out << "# cohsync verification report seed=" << seed << '\n';
  int passed = 0;
  for (const auto& c : checks) {
    out << "check=" << c.check << " params=" << c.params << " worst_margin=" << fmt(c.worst_margin)
        << " status=" << (c.pass ? "PASS" : "FAIL") << '\n';
    if (c.pass) ++passed;
  }
  out << "# summary passed=" << passed << " failed=" << (checks.size() - passed) << '\n';
  return out.str();
}

QRhoProbe build_q_rho(const Matrix& laplacian, const graph::HWeights& weights, const Vector& rho) {
  const auto n = laplacian.rows();
  if (weights.h.size() != n || rho.size() != n) {
    throw std::invalid_argument("build_q_rho: dimension mismatch");
  }
  if ((rho.array() <= 0.0).any()) throw std::invalid_argument("build_q_rho: rho must be positive");
  QRhoProbe probe;
  probe.L = laplacian;
  probe.weights = weights;
  probe.rho = rho;
  const Vector inv = rho.cwiseInverse();
  const Vector scaled_h = weights.h.cwiseProduct(inv);
  probe.mu = 1.0 / scaled_h.sum();
  probe.Q_rho = Matrix(scaled_h.asDiagonal()) - probe.mu * scaled_h * scaled_h.transpose();
  return probe;
}

MonotoneReport verify_qrho_monotone(const QRhoProbe& probe, const std::vector<Vector>& samples) {
  MonotoneReport report;
  const auto n = probe.rho.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = 1e-6 * probe.rho(i);
    Vector up = probe.rho;
    Vector down = probe.rho;
    up(i) += step;
    down(i) -= step;
    const Matrix q_up = build_q_rho(probe.L, probe.weights, up).Q_rho;
    const Matrix q_down = build_q_rho(probe.L, probe.weights, down).Q_rho;
    for (const Vector& z : samples) {
      const double derivative = (z.dot(q_up * z) - z.dot(q_down * z)) / (2.0 * step);
      ++report.evaluations;
      report.worst = std::max(report.worst, derivative);
      if (derivative > 1e-8) ++report.violations;
    }
  }
  return report;
}

ScalingReport verify_palpha_scaling(const model::AgentModel& model, double epsilon,
                                    const std::vector<double>& alphas) {
  model.validate();
  const int n = model.n();
  const int m = model.m();
  if (m != model.p()) throw std::invalid_argument("verify_palpha_scaling: model must be square");
  if (alphas.size() < 2) throw std::invalid_argument("verify_palpha_scaling: need >= 2 samples");

  // Gamma_s^-1 maps x to (zero dynamics, y, y', ..., y^(r-1)).
  Matrix gamma_inv;
  int zero_dim = 0;
  int r = 0;
  if (linalg::numerical_rank(Matrix(model.C * model.B)) == m) {
    gamma_inv = model::build_output_transform(model).S;
    zero_dim = n - m;
    r = 1;
  } else {
    Matrix block = model.C;
    Matrix stacked(0, n);
    for (int k = 0; k < n; ++k) {
      stacked.conservativeResize(stacked.rows() + m, n);
      stacked.bottomRows(m) = block;
      if (linalg::numerical_rank(Matrix(block * model.B)) == m) {
        r = k + 1;
        break;
      }
      if (linalg::max_abs(block * model.B) > 1e-10 * (1.0 + linalg::max_abs(block))) break;
      block = block * model.A;
    }
    if (r == 0 || r * m != n) {
      throw std::invalid_argument(
          "verify_palpha_scaling: only relative degree one or pure chains are supported");
    }
    gamma_inv = stacked;
  }
  const Matrix gamma = gamma_inv.inverse();

  ScalingReport report;
  report.chain_length = r;
  const Matrix shifted = model.A + epsilon * Matrix::Identity(n, n);
  const Matrix weight = model.C.transpose() * model.C;
  std::optional<Matrix> warm;
  for (double alpha : alphas) {
    const Matrix p = linalg::solve_care(shifted, model.B, weight, alpha, warm);
    warm = p;
    Vector d_inv(n);
    const double beta0 = std::pow(alpha, -0.5);
    const double beta1 = std::pow(alpha, -1.0 / (4.0 * r));
    for (int k = 0; k < zero_dim; ++k) d_inv(k) = 1.0 / beta0;
    for (int j = 0; j < r; ++j) {
      const double scale = std::pow(beta1, 2 * j + 1);
      for (int k = 0; k < m; ++k) d_inv(zero_dim + j * m + k) = 1.0 / scale;
    }
    const Matrix rescaled =
        linalg::symmetrize(d_inv.asDiagonal() * gamma.transpose() * p * gamma * d_inv.asDiagonal());
    const double lo = linalg::min_eigenvalue_sym(rescaled);
    const double hi = linalg::max_eigenvalue_sym(rescaled);
    const double c = lo > 0.0 ? std::max(hi, 1.0 / lo) : std::numeric_limits<double>::infinity();
    report.c = std::max(report.c, c);
    report.alphas.push_back(alpha);
    report.norms.push_back(linalg::operator_norm_2(p));
  }
  report.norms_decreasing = true;
  for (std::size_t k = 1; k < report.norms.size(); ++k) {
    if (!(report.norms[k] < report.norms[k - 1])) report.norms_decreasing = false;
  }
  const auto count = static_cast<double>(alphas.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const double x = std::log(report.alphas[k]);
    const double y = std::log(report.norms[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  report.slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return report;
}

MonotoneReport verify_palpha_order(protocol::PAlphaCache& cache, int first_index, int last_index,
                                   bool scaled) {
  MonotoneReport report;
  auto previous = cache.at_index(first_index);
  for (int k = first_index + 1; k <= last_index; ++k) {
    auto current = cache.at_index(k);
    const double a1 = protocol::PAlphaCache::grid_alpha(k - 1);
    const double a2 = protocol::PAlphaCache::grid_alpha(k);
    const Matrix diff = scaled ? Matrix(a2 * *current - a1 * *previous)
                               : Matrix(*previous - *current);
    const double lowest = psd_min_eig(diff);
    ++report.evaluations;
    report.worst = std::max(report.worst, -lowest);
    if (lowest < -kPsdTolerance) ++report.violations;
    previous = current;
  }
  return report;
}

Matrix spectral_lyapunov(const Matrix& a, const Matrix& w) {
  Eigen::EigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("spectral_lyapunov: eigensolver failed");
  const ComplexMatrix v = solver.eigenvectors();
  const auto lambda = solver.eigenvalues();
  const ComplexMatrix rhs = v.transpose() * w.cast<Complex>() * v;
  ComplexMatrix y(rhs.rows(), rhs.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) = -rhs(i, j) / (lambda(i) + lambda(j));
  }
  const ComplexMatrix v_inv = v.inverse();
  return linalg::symmetrize((v_inv.transpose() * y * v_inv).real());
}

Report run_verification_suite(std::uint64_t seed, bool corrupt_reference) {
  Report report;
  report.seed = seed;
  std::mt19937_64 engine(seed);
  auto add = [&](std::string check, std::string params, double margin) {
    report.checks.push_back({std::move(check), std::move(params), margin, margin >= 0.0});
  };

  {
    // Riccati solution of the transformed noncollaborative model.
    const auto design = protocol::design_noncollab(reference::noncollab_model(), 1.0,
                                                   reference::noncollab_published_overrides());
    Matrix p = design.P;
    if (corrupt_reference) p *= 1.1;
    const auto& tr = design.transform;
    const double res = linalg::care_residual(tr.A_tilde, tr.B_tilde, Matrix::Identity(4, 4), 1.0, p);
    add("care_residual", corrupt_reference ? "model=noncollab,corrupted=10%" : "model=noncollab",
        1e-8 * (1.0 + p.squaredNorm()) - res);
  }

  {
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 50; ++k) {
      const int n = draw_int(engine, 1, 6);
      const Matrix a = random_hurwitz(n, engine);
      const Matrix w = random_symmetric(n, engine);
      const Matrix x = linalg::solve_lyapunov(a, w);
      const Matrix oracle = spectral_lyapunov(a, w);
      const double scale = std::max(1.0, linalg::max_abs(oracle));
      worst = std::min(worst, 1e-9 - linalg::max_abs(x - oracle) / scale);
    }
    add("lyapunov_oracle", "cases=50,n<=6,tol=1e-9", worst);
  }

  {
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 20; ++k) {
      const int n = draw_int(engine, 2, 6);
      const int m = draw_int(engine, 1, std::min(3, n - 1));
      const auto mdl = random_minimum_phase(n, m, engine);
      const auto pencil = model::invariant_zeros(mdl);
      const auto transformed = model::zeros_from_transform(model::build_output_transform(mdl));
      worst = std::min(worst, 1e-8 - linalg::multiset_distance(pencil, transformed));
    }
    add("zeros_crosscheck", "models=20,tol=1e-8", worst);
  }

  {
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 20; ++k) {
      const int n = 3 + k % 10;
      const auto g = graph::generate_strongly_connected(n, engine());
      const Matrix l = graph::laplacian(g);
      const auto hw = graph::compute_h_weights(l);
      worst = std::min(worst, graph::h_weights_margin(l, hw) + 1e-10);
    }
    add("h_weights", "graphs=20,N=3..12,tol=1e-10", worst);
  }

  for (int n : {3, 10}) {
    const auto g = n == 3 ? graph::generate_circulant(3, {1}, true)
                          : graph::generate_strongly_connected(n, engine());
    const Matrix l = graph::laplacian(g);
    const auto hw = graph::compute_h_weights(l);
    Vector rho(n);
    for (int i = 0; i < n; ++i) rho(i) = 0.5 + 2.25 * (detail::uniform_symmetric(engine) + 1.0);
    const auto probe = build_q_rho(l, hw, rho);
    std::vector<Vector> samples;
    for (int s = 0; s < 100; ++s) samples.push_back(random_matrix(n, 1, engine));
    const auto mono = verify_qrho_monotone(probe, samples);
    add("qrho_monotone", "N=" + std::to_string(n) + ",samples=100",
        mono.violations == 0 ? 1e-8 - mono.worst : -static_cast<double>(mono.violations));
    const double kernel = (probe.Q_rho * Vector::Ones(n)).cwiseAbs().maxCoeff();
    add("qrho_kernel", "N=" + std::to_string(n), 1e-10 - kernel);
    const Matrix basis = linalg::ones_complement_basis(n);
    add("qrho_psd", "N=" + std::to_string(n),
        psd_min_eig(basis.transpose() * probe.Q_rho * basis) + 1e-10);
  }

  {
    std::vector<double> alphas;
    for (int k = 0; k <= 16; ++k) alphas.push_back(std::pow(10.0, 2.0 + 0.25 * k));
    const auto scaling = verify_palpha_scaling(reference::double_integrator(), 0.0, alphas);
    add("palpha_slope", "model=double_integrator,alpha=1e2..1e6,target=-0.25+-0.02",
        0.02 - std::abs(scaling.slope + 0.25));
    add("palpha_sandwich", "model=double_integrator,c<=1e3", 1e3 - scaling.c);
  }

  const auto collab = protocol::design_collab_for_d(reference::collab_model(), 0.5);
  {
    std::vector<double> alphas;
    for (int k = 0; k <= 16; ++k) alphas.push_back(std::pow(10.0, 1.0 + 0.25 * k));
    const auto scaling = verify_palpha_scaling(reference::collab_model(), collab.epsilon, alphas);
    add("palpha_sandwich", "model=collab,alpha=1e1..1e5,c<=1e3", 1e3 - scaling.c);
    add("palpha_decay", "model=collab,alpha=1e1..1e5",
        scaling.norms_decreasing ? 1.0 - scaling.norms.back() / scaling.norms.front() : -1.0);
  }
  {
    const int lo = -100;
    const int hi = 200;
    const auto order = verify_palpha_order(*collab.cache, lo, hi, false);
    add("palpha_psd_order", "model=collab,grid=-100..200",
        order.violations == 0 ? kPsdTolerance - order.worst : -static_cast<double>(order.violations));
    const auto scaled = verify_palpha_order(*collab.cache, lo, hi, true);
    add("alpha_palpha_psd_order", "model=collab,grid=-100..200",
        scaled.violations == 0 ? kPsdTolerance - scaled.worst : -static_cast<double>(scaled.violations));
    double worst = std::numeric_limits<double>::infinity();
    for (int k = lo; k <= hi; k += 25) {
      const Matrix fresh = collab.cache->solve_fresh(protocol::PAlphaCache::grid_alpha(k));
      worst = std::min(worst, 1e-9 - linalg::max_abs(fresh - *collab.cache->at_index(k)) /
                                         std::max(1.0, linalg::max_abs(fresh)));
    }
    add("palpha_cache_fresh", "model=collab,grid=-100..200/25", worst);
    const Matrix q = collab.Q;
    add("dual_care_residual", "model=collab,eta=" + fmt(collab.eta),
        1e-8 * (1.0 + q.squaredNorm()) -
            linalg::dual_care_residual(collab.A, collab.C, collab.eta, q));
  }
  {
    const auto mdl = random_minimum_phase(3, 1, engine);
    const auto rep = model::check_assumptions(mdl);
    const double eps = protocol::collab_epsilon(mdl, rep);
    protocol::PAlphaCache cache(mdl.A + eps * Matrix::Identity(3, 3), mdl.B,
                                Matrix(mdl.C.transpose() * mdl.C));
    const auto scaled = verify_palpha_order(cache, -60, 120, true);
    add("alpha_palpha_psd_order", "model=random_minimum_phase_3,grid=-60..120",
        scaled.violations == 0 ? kPsdTolerance - scaled.worst : -static_cast<double>(scaled.violations));
  }
  return report;
}

}  // namespace cohsync::verify
