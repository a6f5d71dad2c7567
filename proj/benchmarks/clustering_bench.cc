#include <benchmark/benchmark.h>

#include "clustercal/clustering.h"
#include "clustercal/random.h"

namespace clustercal {
namespace {

Matrix points(std::size_t n, std::size_t d) {
  Rng rng(3);
  Matrix x(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const double shift = 5.0 * static_cast<double>(rng.index(8));
    for (std::size_t c = 0; c < d; ++c) x(r, c) = rng.normal() + (c == 0 ? shift : 0.0);
  }
  return x;
}

void BM_KMeans(benchmark::State& state) {
  const Matrix x = points(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(fit_kmeans(x, 20, 1).inertia);
}
BENCHMARK(BM_KMeans)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_Agglomerative(benchmark::State& state) {
  const Matrix x = points(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(fit_agglomerative(x, 20).k);
}
BENCHMARK(BM_Agglomerative)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace clustercal
