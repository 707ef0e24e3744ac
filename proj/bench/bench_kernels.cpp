// Serial vs OpenMP forest fitting and prediction, and the brute-force
// reference tree vs the presorted builder.

#include <benchmark/benchmark.h>

#include <cmath>

#include "floodline/ensemble.hpp"
#include "floodline/tree.hpp"
#include "reference_tree.hpp"

using namespace floodline;
using namespace floodline::ml;

namespace {

struct Data {
  Matrix x;
  std::vector<double> y;
};

Data make(std::size_t n, std::size_t cols) {
  Pcg32 rng(12345, 1);
  Data d{Matrix(n, cols), {}};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols; ++c) d.x(r, c) = rng.uniform(0, 10);
    d.y.push_back(0.1 * d.x(r, 0) + 0.05 * d.x(r, 1) + std::sin(d.x(r, 2)) + 0.1 * rng.normal());
  }
  return d;
}

void BM_TreePresorted(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)), 17);
  const ColumnOrder order(d.x);
  for (auto _ : state) {
    Pcg32 rng(1, 1);
    benchmark::DoNotOptimize(fit_tree(d.x, order, d.y, {}, {std::nullopt, 1, 5}, rng));
  }
}

void BM_TreeReference(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)), 17);
  for (auto _ : state) {
    Pcg32 rng(1, 1);
    benchmark::DoNotOptimize(reference::fit_tree(d.x, d.y, {}, {std::nullopt, 1, 5}, rng));
  }
}

void forest(benchmark::State& state, Execution exec) {
  const auto d = make(static_cast<std::size_t>(state.range(0)), 17);
  const ColumnOrder order(d.x);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_forest(d.x, order, d.y, 100, {std::nullopt, 1, 5}, RngStream(7), exec));
  }
}

void BM_ForestSerial(benchmark::State& state) { forest(state, Execution::serial); }
void BM_ForestParallel(benchmark::State& state) { forest(state, Execution::parallel); }

void predict(benchmark::State& state, Execution exec) {
  const auto d = make(static_cast<std::size_t>(state.range(0)), 17);
  const auto model = fit_model(d.x, d.y, {Algo::random_forest, 100, std::nullopt, 1, 5}, RngStream(3));
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(d.x, exec));
}

void BM_PredictSerial(benchmark::State& state) { predict(state, Execution::serial); }
void BM_PredictParallel(benchmark::State& state) { predict(state, Execution::parallel); }

}  // namespace

BENCHMARK(BM_TreePresorted)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TreeReference)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestSerial)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestParallel)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictSerial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictParallel)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
