#include <benchmark/benchmark.h>

#include "hlsga/calculus.hpp"
#include "hlsga/datasets.hpp"
#include "hlsga/hls.hpp"
#include "hlsga/mlp.hpp"
#include "hlsga/rng.hpp"
#include "hlsga/simplex.hpp"

namespace {

using namespace hlsga;

Vector uniform_vector(Rng& rng, std::size_t n) {
  Vector v(n);
  for (double& x : v) x = 2.0 * uniform01(rng) - 1.0;
  return v;
}

// Relaxed fine-tuning LP shape: m rows, m + 1 columns, thin slab.
LpProblem slab_lp(std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = m + 1;
  Matrix a(m, n);
  for (double& x : a.data()) x = 2.0 * uniform01(rng) - 1.0;
  for (std::size_t i = 0; i < m; ++i) a(i, i + 1) += 4.0;
  return {uniform_vector(rng, n), a, Vector(m, -1e-6), Vector(m, 1e-6), Vector(n, -1.0), Vector(n, 1.0)};
}

void BM_SimplexSlab(benchmark::State& state) {
  const LpProblem lp = slab_lp(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    const LpSolution sol = solve(lp);
    benchmark::DoNotOptimize(sol.objective);
    state.counters["iterations"] = static_cast<double>(sol.iterations);
  }
}
BENCHMARK(BM_SimplexSlab)->Arg(25)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

struct MlpFixture {
  LabeledSet train;
  Architecture arch;
  RegGroups groups;
  Model model;
};

MlpFixture mlp_fixture(std::size_t hidden) {
  MlpFixture f;
  f.train = synth_gaussians(2000, 49, 10, 4.0, 3);
  f.arch = Architecture{49, {hidden, hidden}, 10};
  f.groups = make_groups(f.arch, GroupScheme::kSingle);
  f.model = init_model(f.arch, 5);
  return f;
}

void BM_HessianRows(benchmark::State& state) {
  const MlpFixture f = mlp_fixture(static_cast<std::size_t>(state.range(0)));
  const bool last_only = state.range(1) != 0;
  const auto mask = last_only ? freeze_mask(f.arch, {FreezePolicy::kLastLayer, 0}) : std::vector<bool>{};
  for (auto _ : state) {
    const HessianBlocks h = hessian_lower_rows(f.model, f.groups, Vector{1e-3}, f.train, mask);
    benchmark::DoNotOptimize(h.A.data().data());
    state.counters["q"] = static_cast<double>(h.q());
  }
}
BENCHMARK(BM_HessianRows)->Args({10, 1})->Args({10, 0})->Args({15, 1})->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const MlpFixture f = mlp_fixture(static_cast<std::size_t>(state.range(0)));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.grad_tol = 0.0;
  for (auto _ : state) {
    const Model m = train(f.arch, f.groups, Vector{0.0}, f.train, cfg, 7);
    benchmark::DoNotOptimize(m.w.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.train.size()));
}
BENCHMARK(BM_TrainEpoch)->Arg(10)->Arg(15)->Unit(benchmark::kMillisecond);

void BM_FinetuneLastLayer(benchmark::State& state) {
  const LabeledSet all = synth_gaussians(5000, 49, 10, 4.0, 9);
  const DatasetSplits splits = make_splits(all, 2000, 1000, 2000, 9);
  const Architecture arch{49, {10, 10}, 10};
  const RegGroups groups = make_groups(arch, GroupScheme::kSingle);
  TrainConfig tcfg;
  const Model base = train(arch, groups, Vector{0.0}, splits.train, tcfg, 1);
  HlsConfig cfg;
  cfg.freeze = {FreezePolicy::kLastLayer, 0};
  for (auto _ : state) {
    const ModelFinetune r = finetune(base, groups, Vector{0.0}, splits, cfg);
    benchmark::DoNotOptimize(r.model.w.data());
  }
}
BENCHMARK(BM_FinetuneLastLayer)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
