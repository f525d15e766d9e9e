#include <benchmark/benchmark.h>

#include <random>

#include "cohsync/collab.hpp"
#include "cohsync/linalg.hpp"
#include "cohsync/reference_models.hpp"
#include "cohsync/simulation.hpp"

using namespace cohsync;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int r, int c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

void BM_Lyapunov(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  Matrix a = random_matrix(rng, n, n);
  a.diagonal().array() -= a.cwiseAbs().rowwise().sum().maxCoeff() + 0.1;
  const Matrix w = Matrix::Identity(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(linalg::solve_lyapunov(a, w));
}
BENCHMARK(BM_Lyapunov)->Arg(2)->Arg(4)->Arg(6)->Arg(10);

void BM_CarePublished(benchmark::State& state) {
  const auto tr = model::build_output_transform(reference::noncollab_model(),
                                                reference::noncollab_published_overrides().S,
                                                reference::noncollab_published_overrides().T);
  const Matrix w = Matrix::Identity(4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(linalg::solve_care(tr.A_tilde, tr.B_tilde, w, 1.0));
}
BENCHMARK(BM_CarePublished);

void BM_CareRandom(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  const Matrix a = random_matrix(rng, n, n);
  const Matrix b = random_matrix(rng, n, 1);
  const Matrix w = Matrix::Identity(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(linalg::solve_care(a, b, w, 1.0));
}
BENCHMARK(BM_CareRandom)->Arg(3)->Arg(6)->Arg(10);

void BM_PAlphaFresh(benchmark::State& state) {
  const auto cd = protocol::design_collab_for_d(reference::collab_model(), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(protocol::solve_p_alpha(cd, 37.0));
}
BENCHMARK(BM_PAlphaFresh);

// One integration step per iteration, amortized over a short horizon.
template <bool Collab>
void BM_SimulationSteps(benchmark::State& state) {
  sim::SimConfig cfg;
  const int generation = static_cast<int>(state.range(0));
  cfg.graph = graph::generate_vicsek_fractal(generation, true);
  if (Collab) {
    cfg.model = reference::collab_model();
    cfg.design = protocol::design_collab_for_d(cfg.model, 0.5);
  } else {
    cfg.model = reference::noncollab_model();
    cfg.design = protocol::design_noncollab_for_d(cfg.model, 0.5,
                                                  reference::noncollab_published_overrides());
  }
  cfg.t_end = 0.2;
  cfg.stride = 50;
  cfg.threads = static_cast<int>(state.range(1));
  const auto steps = static_cast<std::int64_t>(cfg.t_end / cfg.dt + 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(sim::simulate(cfg));
  state.SetItemsProcessed(state.iterations() * steps);
  state.counters["agents"] = cfg.graph.node_count();
}
BENCHMARK(BM_SimulationSteps<false>)->Args({2, 1})->Args({3, 1})->Args({3, 2})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulationSteps<true>)->Args({2, 1})->Args({3, 1})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
