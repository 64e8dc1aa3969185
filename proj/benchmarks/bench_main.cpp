#include <mismatch/bounds.hpp>
#include <mismatch/classifier.hpp>
#include <mismatch/expansion.hpp>
#include <mismatch/experiments.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace mismatch;

namespace {

Matrix random_symmetric(Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Matrix a(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) a(r, c) = normal(rng);
  return a + a.transpose();
}

void BM_SymEig(benchmark::State& state) {
  const Matrix a = random_symmetric(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(sym_eig(a));
}
BENCHMARK(BM_SymEig)->Arg(8)->Arg(32)->Arg(128);

void BM_PairGeometry(benchmark::State& state) {
  const ProblemInstance& inst = catalog_entry("tableIII-b").instance;
  for (auto _ : state) benchmark::DoNotOptimize(pair_geometry(inst, 0, 1));
}
BENCHMARK(BM_PairGeometry);

void BM_Bound(benchmark::State& state) {
  const ProblemInstance& inst = catalog_entry("rob2").instance;
  const auto geom = all_pair_geometry(inst);
  for (auto _ : state) benchmark::DoNotOptimize(theorem1_bound(inst, 1e-6, geom));
}
BENCHMARK(BM_Bound);

void BM_Expand(benchmark::State& state) {
  const ProblemInstance& inst = catalog_entry("rob3").instance;
  for (auto _ : state) benchmark::DoNotOptimize(expand(inst));
}
BENCHMARK(BM_Expand);

// Synthetic 30-dimensional, 3-class models estimated from generated data.
void BM_MonteCarlo(benchmark::State& state) {
  const bool large = state.range(0) != 0;
  ProblemInstance inst = catalog_entry("tableIII-d").instance;
  if (large) {
    SynthConfig sc;
    sc.per_class = 60;
    const LabeledData data = make_synthetic(sc);
    const auto rows = data.class_rows();
    inst = ProblemInstance{};
    inst.ambient_dim = sc.ambient_dim;
    for (const auto& idx : rows) {
      Matrix x(static_cast<Index>(idx.size()), sc.ambient_dim);
      for (std::size_t k = 0; k < idx.size(); ++k) x.row(static_cast<Index>(k)) = data.features.row(idx[k]);
      inst.true_models.push_back(estimate_from_samples(x, 1.0 / 3.0, sc.rank));
    }
    inst.mismatched_models = inst.true_models;
  }
  const std::uint64_t trials = 20000;
  for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_error(inst, 1e-3, trials, 1));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * trials));
}
BENCHMARK(BM_MonteCarlo)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
