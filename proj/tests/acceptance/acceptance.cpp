// Acceptance checks, one per criterion. Prints one PASS/FAIL line per
// criterion run; exit status is nonzero if any of them failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cohsync/experiment.hpp"
#include "cohsync/io.hpp"
#include "cohsync/reference_models.hpp"
#include "cohsync/verification.hpp"
#include "oracles.hpp"

using namespace cohsync;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path manifest(const std::string& name) {
  return fs::path(COHSYNC_MANIFEST_DIR) / (name + ".json");
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "cohsync_acceptance" / name;
  fs::remove_all(p);
  return p;
}

double max_deviation(const Matrix& got, const std::vector<std::vector<double>>& printed) {
  double worst = 0.0;
  for (std::size_t i = 0; i < printed.size(); ++i)
    for (std::size_t j = 0; j < printed[i].size(); ++j)
      worst = std::max(worst, std::abs(got(static_cast<int>(i), static_cast<int>(j)) - printed[i][j]));
  return worst;
}

const std::vector<std::vector<double>> kPrintedP = {{3.0498, -0.7942, 2.0169, 0.8943},
                                                    {-0.7942, 0.9875, -1.7544, -0.7475},
                                                    {2.0169, -1.7544, 4.8899, 2.5890},
                                                    {0.8943, -0.7475, 2.5890, 2.2308}};

protocol::NoncollabDesign published_design() {
  return protocol::design_noncollab_for_d(reference::noncollab_model(), 0.5,
                                          reference::noncollab_published_overrides());
}

Verdict criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto nd = published_design();
  const Matrix p = linalg::solve_care(nd.transform.A_tilde, nd.B_tilde, Matrix::Identity(4, 4), 1.0);
  const double elapsed = seconds_since(t0);
  const double dev = max_deviation(p, kPrintedP);
  return {dev <= 1e-3 && elapsed < 1.0,
          "max |P - printed| = " + fmt("%.3e", dev) + " (tol 1e-3), runtime " + fmt("%.3f", elapsed) + " s"};
}

Verdict criterion2() {
  const auto model = reference::collab_model();
  const std::vector<std::vector<double>> printed = {
      {0.4117, 0.1136, 0.0086}, {0.1136, 0.2997, 0.0553}, {0.0086, 0.0553, 0.1792}};
  Matrix q_printed(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) q_printed(i, j) = printed[i][j];
  const double printed_residual = linalg::dual_care_residual(model.A, model.C, 1.0, q_printed);
  // The printed matrix against the unshifted dual equation A^T Q + Q A - Q C^T C Q + I = 0.
  const Matrix r = model.A.transpose() * q_printed + q_printed * model.A -
                   q_printed * model.C.transpose() * model.C * q_printed + Matrix::Identity(3, 3);
  std::string tail = "; printed Q has shifted residual " + fmt("%.3e", printed_residual) +
                     " and residual " + fmt("%.3e", r.norm()) + " in A^T Q + Q A - Q C^T C Q + I";
  try {
    const Matrix q = linalg::solve_dual_care_shifted(model.A, model.C, 1.0);
    const double dev = max_deviation(q, printed);
    return {dev <= 1e-3, "max |Q - printed| = " + fmt("%.3e", dev) + " (tol 1e-3)" + tail};
  } catch (const NumericalError& e) {
    return {false, std::string("no positive definite solution at eta = 1: ") + e.what() + tail};
  }
}

Verdict criterion3() {
  const auto nd = published_design();
  const std::vector<std::vector<double>> row = {{0.8943, -0.7475, 2.5890, 2.2308}};
  const std::vector<std::vector<double>> kernel = {{0.7998, -0.6685, 2.3154, 1.9950},
                                                   {-0.6685, 0.5588, -1.9353, -1.6676},
                                                   {2.3154, -1.9353, 6.7030, 5.7756},
                                                   {1.9950, -1.6676, 5.7756, 4.9766}};
  const double d_row = max_deviation(nd.gain_row, row);
  const double d_kernel = max_deviation(nd.rho_kernel, kernel);
  return {d_row <= 1e-3 && d_kernel <= 1e-3,
          "gain row dev " + fmt("%.3e", d_row) + ", kernel dev " + fmt("%.3e", d_kernel) + " (tol 1e-3)"};
}

struct RunCheck {
  bool pass = false;
  std::string line;
};

// Runs a bundled manifest and judges it with the acceptance rule; `extra`
// may tighten the verdict.
RunCheck run_manifest(const std::string& name, double time_limit = 0.0) {
  const auto m = experiment::load_manifest(manifest(name));
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = experiment::build_sim_config(m);
  const auto run = sim::simulate(cfg);
  const double elapsed = seconds_since(t0);
  const double d = std::visit([](const auto& x) { return x.d; }, cfg.design);
  const auto a = experiment::assess(run, d, m.acceptance);
  int failed = 0;
  double worst_rho = 0.0, worst_alpha = 0.0, worst_settle = 0.0;
  bool unsettled = false, monotone = true;
  for (const auto& v : a.agents) {
    failed += v.pass ? 0 : 1;
    worst_rho = std::max(worst_rho, v.rho_change);
    worst_alpha = std::max(worst_alpha, v.alpha_change);
    if (v.settling_time) worst_settle = std::max(worst_settle, *v.settling_time);
    else unsettled = true;
    monotone = monotone && v.gains_monotone;
  }
  bool pass = a.all_pass;
  std::ostringstream line;
  line << name << ": " << (a.agents.size() - failed) << "/" << a.agents.size() << " agents pass"
       << ", max rho change " << fmt("%.3e", worst_rho);
  if (run.collaborative) line << ", max alpha change " << fmt("%.3e", worst_alpha);
  line << " (tol " << m.acceptance.flat_tolerance << ")"
       << ", latest settling " << (unsettled ? std::string("none") : fmt("%.2f", worst_settle))
       << ", gains monotone " << (monotone ? "yes" : "no") << ", " << fmt("%.1f", elapsed) << " s";
  if (time_limit > 0.0 && elapsed > time_limit) {
    pass = false;
    line << " exceeds " << time_limit << " s";
  }
  return {pass, line.str()};
}

Verdict all_of(const std::vector<RunCheck>& checks) {
  Verdict v{true, ""};
  for (const auto& c : checks) {
    v.pass = v.pass && c.pass;
    v.detail += (v.detail.empty() ? "" : "; ") + c.line;
  }
  return v;
}

Verdict criterion4() {
  return all_of({run_manifest("noncol-vicsek-n5"), run_manifest("noncol-vicsek-n25"),
                 run_manifest("noncol-vicsek-n121", 600.0)});
}

Verdict criterion5() {
  RunCheck per_component = run_manifest("noncol-disconnected-n24");
  // bitwise comparison with each component simulated alone
  const auto m = experiment::load_manifest(manifest("noncol-disconnected-n24"));
  auto cfg = experiment::build_sim_config(m);
  const Matrix x0 = sim::initial_states(cfg.model.n(), cfg.graph.node_count(), cfg.seed);
  cfg.x0 = x0;
  const auto full = sim::simulate(cfg);
  bool identical = true;
  const auto comps = graph::basic_bicomponents(cfg.graph);
  for (const auto& comp : comps.basic_components) {
    auto sub = cfg;
    sub.graph = cfg.graph.subgraph(comp);
    Matrix sx0(cfg.model.n(), static_cast<int>(comp.size()));
    sub.agent_labels.clear();
    for (std::size_t k = 0; k < comp.size(); ++k) {
      sx0.col(static_cast<int>(k)) = x0.col(comp[k]);
      sub.agent_labels.push_back(comp[k] + 1);
    }
    sub.x0 = sx0;
    const auto alone = sim::simulate(sub);
    const int n = full.n;
    for (std::size_t s = 0; s < full.samples() && identical; ++s)
      for (std::size_t k = 0; k < comp.size(); ++k) {
        for (int q = 0; q < n; ++q)
          identical = identical && full.at(full.x, s, comp[k], n, q) ==
                                       alone.at(alone.x, s, static_cast<int>(k), n, q);
        identical = identical && full.at(full.rho, s, comp[k]) == alone.at(alone.rho, s, static_cast<int>(k));
      }
  }
  Verdict v = all_of({per_component});
  v.pass = v.pass && identical && comps.basic_components.size() == 3;
  v.detail += "; " + std::to_string(comps.basic_components.size()) + " components, alone-vs-together " +
              (identical ? "bitwise identical" : "DIFFERENT");
  return v;
}

Verdict criterion6() {
  return all_of({run_manifest("col-vicsek-n5"), run_manifest("col-vicsek-n25"),
                 run_manifest("col-vicsek-n25-d02"), run_manifest("col-sawtooth-n25")});
}

Verdict criterion7() {
  std::mt19937_64 rng(7);
  double worst_lyap = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 6;
    const Matrix a = oracle::random_hurwitz(rng, n);
    Matrix w = oracle::random_matrix(rng, n, n);
    w = w * w.transpose() + Matrix::Identity(n, n);
    const Matrix ref = oracle::kron_lyapunov(a, w);
    const Matrix x = linalg::solve_lyapunov(a, w);
    worst_lyap = std::max(worst_lyap, (x - ref).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
  double worst_zero = 0.0;
  int models = 0;
  while (models < 20) {
    const int n = 2 + models % 5;
    const int m = 1 + models % 2;
    const Matrix a = oracle::random_matrix(rng, n, n);
    const Matrix b = oracle::random_matrix(rng, n, m);
    const Matrix c = oracle::random_matrix(rng, m, n);
    if (linalg::numerical_rank(Matrix(c * b)) < m) continue;
    const model::AgentModel mdl{a, b, c, Matrix(n, 0)};
    const auto tr = model::build_output_transform(mdl);
    // with m = p the zeros are the eigenvalues of A11; take those from the
    // characteristic polynomial oracle
    const auto pencil = model::invariant_zeros(mdl);
    const auto ref = tr.n1 > 0 ? oracle::eigenvalues(tr.A11) : std::vector<Complex>{};
    worst_zero = std::max(worst_zero, oracle::match_distance(pencil, ref));
    ++models;
  }
  return {worst_lyap <= 1e-9 && worst_zero <= 1e-8,
          "Lyapunov vs Kronecker worst rel diff " + fmt("%.3e", worst_lyap) + " over 50 cases (tol 1e-9)" +
              ", pencil vs A11 zeros worst " + fmt("%.3e", worst_zero) + " over 20 models (tol 1e-8)"};
}

Verdict criterion8() {
  std::ostringstream detail;
  bool pass = true;
  double worst_margin = INFINITY;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = graph::generate_strongly_connected(3 + static_cast<int>(s % 10), 1000 + s);
    const Matrix l = graph::laplacian(g);
    worst_margin = std::min(worst_margin, graph::h_weights_margin(l, graph::compute_h_weights(l)));
  }
  pass = pass && worst_margin >= -1e-10;
  detail << "h-weights worst margin " << fmt("%.3e", worst_margin) << " over 20 graphs";

  std::mt19937_64 rng(8);
  int violations = 0, evaluations = 0;
  for (int n : {3, 10}) {
    const auto g = graph::generate_strongly_connected(n, 77);
    const Matrix l = graph::laplacian(g);
    const auto hw = graph::compute_h_weights(l);
    std::uniform_real_distribution<double> pos(0.5, 5.0);
    Vector rho(n);
    for (int i = 0; i < n; ++i) rho(i) = pos(rng);
    std::vector<Vector> samples;
    for (int k = 0; k < 100; ++k) samples.push_back(oracle::random_matrix(rng, n, 1));
    const auto rep = verify::verify_qrho_monotone(verify::build_q_rho(l, hw, rho), samples);
    violations += rep.violations;
    evaluations += rep.evaluations;
  }
  pass = pass && violations == 0;
  detail << "; Q_rho monotonicity " << violations << " violations in " << evaluations << " differences";

  const auto cd = protocol::design_collab_for_d(reference::collab_model(), 0.5);
  const int lo = -100, hi = 200;
  const auto order = verify::verify_palpha_order(*cd.cache, lo, hi, false);
  const auto scaled = verify::verify_palpha_order(*cd.cache, lo, hi, true);
  pass = pass && order.violations == 0 && scaled.violations == 0;
  detail << "; P_alpha order violations " << order.violations << ", alpha P_alpha order violations "
         << scaled.violations << " on grid k=" << lo << ".." << hi;

  std::vector<double> alphas;
  for (int k = 0; k <= 16; ++k) alphas.push_back(std::pow(10.0, 2.0 + 0.25 * k));
  const auto sc = verify::verify_palpha_scaling(reference::double_integrator(), 0.0, alphas);
  pass = pass && std::abs(sc.slope + 0.25) <= 0.02;
  detail << "; double-integrator slope " << fmt("%.4f", sc.slope) << " (target -0.25 +- 0.02)";
  return {pass, detail.str()};
}

Verdict criterion9() {
  std::ostringstream detail;
  bool pass = true;
  for (const std::string name : {"noncol-vicsek-n5", "col-vicsek-n5"}) {
    const auto m = experiment::load_manifest(manifest(name));
    const auto a = scratch_dir(name + "_a");
    const auto b = scratch_dir(name + "_b");
    const auto ra = experiment::run_experiment(m, a);
    const auto rb = experiment::run_experiment(m, b);
    bool same = ra.exit_code == rb.exit_code && ra.exit_code != 2;
    for (const char* f : {"design.json", "trajectory.csv", "summary.json"}) {
      same = same && fs::exists(a / f) && io::read_text_file(a / f) == io::read_text_file(b / f);
    }
    pass = pass && same;
    detail << name << " artifacts " << (same ? "identical" : "DIFFER") << "; ";
  }
  const bool report_same = verify::run_verification_suite(1).to_text() == verify::run_verification_suite(1).to_text();
  pass = pass && report_same;
  detail << "verification report " << (report_same ? "identical" : "DIFFERS");
  return {pass, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cohsync acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-9); default all")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Verdict()>> criteria = {criterion1, criterion2, criterion3,
                                                          criterion4, criterion5, criterion6,
                                                          criterion7, criterion8, criterion9};
  bool all = true;
  for (int k = 1; k <= 9; ++k) {
    if (only != 0 && k != only) continue;
    Verdict v;
    try {
      v = criteria[k - 1]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << k << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail << std::endl;
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
