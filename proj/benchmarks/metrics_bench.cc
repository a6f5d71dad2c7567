#include <benchmark/benchmark.h>

#include <vector>

#include "clustercal/metrics.h"
#include "clustercal/random.h"

namespace clustercal {
namespace {

struct Fixture {
  std::vector<double> p;
  std::vector<int> y;
  std::vector<int> clusters;
};

Fixture make(std::size_t n) {
  Rng rng(1);
  Fixture f;
  for (std::size_t i = 0; i < n; ++i) {
    f.p.push_back(rng.uniform());
    f.y.push_back(rng.uniform() < f.p.back() ? 1 : 0);
    f.clusters.push_back(static_cast<int>(rng.index(20)));
  }
  return f;
}

void BM_Ece(benchmark::State& state) {
  const Fixture f = make(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ece(f.p, f.y).value);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ece)->Range(1 << 10, 1 << 18);

void BM_AdaEce(benchmark::State& state) {
  const Fixture f = make(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ada_ece(f.p, f.y).value);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AdaEce)->Range(1 << 10, 1 << 18);

void BM_Cece(benchmark::State& state) {
  const Fixture f = make(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cece(f.p, f.y, f.clusters).value);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Cece)->Range(1 << 10, 1 << 18);

void BM_Auc(benchmark::State& state) {
  const Fixture f = make(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(auc(f.p, f.y).value);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auc)->Range(1 << 10, 1 << 18);

}  // namespace
}  // namespace clustercal
