#include <benchmark/benchmark.h>

#include "clustercal/calibrators.h"
#include "clustercal/data.h"
#include "clustercal/model.h"
#include "clustercal/tree_shap.h"

namespace clustercal {
namespace {

Dataset synthetic(std::size_t per_subpop) {
  SyntheticSpec spec;
  spec.samples_per_subpop = per_subpop;
  spec.d = 8;
  return gen_synthetic(spec);
}

void BM_FitGbt(benchmark::State& state) {
  const Dataset ds = synthetic(static_cast<std::size_t>(state.range(0)) / 2);
  GbtParams p;
  p.n_trees = 20;
  p.max_depth = 4;
  for (auto _ : state) benchmark::DoNotOptimize(fit_gbt(ds, p, 1).base_score);
}
BENCHMARK(BM_FitGbt)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_TreeShap(benchmark::State& state) {
  const Dataset ds = synthetic(500);
  GbtParams p;
  p.n_trees = 50;
  p.max_depth = static_cast<int>(state.range(0));
  const TreeEnsemble ens = fit_gbt(ds, p, 1);
  for (auto _ : state) benchmark::DoNotOptimize(tree_shap(ens, ds.features).base_value);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(ds.size()));
}
BENCHMARK(BM_TreeShap)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_FitCalibrator(benchmark::State& state) {
  const SyntheticData data = [] {
    SyntheticSpec spec;
    spec.samples_per_subpop = 5000;
    return gen_synthetic_full(spec);
  }();
  const FitData fd =
      FitData::from_scores(scores_from_margins(data.miscalibrated_margin, ScoreSource::kExternal),
                           data.dataset.labels);
  const auto method = static_cast<CalibrationMethod>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit(method, fd).params.size());
  state.SetLabel(std::string(method_name(method)));
}
BENCHMARK(BM_FitCalibrator)
    ->Arg(static_cast<int>(CalibrationMethod::kPlatt))
    ->Arg(static_cast<int>(CalibrationMethod::kTemperature))
    ->Arg(static_cast<int>(CalibrationMethod::kBeta))
    ->Arg(static_cast<int>(CalibrationMethod::kIsotonic))
    ->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace clustercal
