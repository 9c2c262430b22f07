#include <benchmark/benchmark.h>

#include "cmn/data.hpp"
#include "cmn/model.hpp"
#include "cmn/params.hpp"
#include "cmn/scoring.hpp"
#include "cmn/search.hpp"
#include "cmn/synthetic.hpp"

namespace {

cmn::Dataset reference_sample(std::size_t n) {
  return cmn::sample_joint(cmn::joint_of(cmn::reference_generator()), n, 7);
}

void BM_BlanketPartition(benchmark::State& state) {
  const auto s = cmn::reference_structure();
  const std::vector<int> cards(7, 2);
  for (auto _ : state)
    for (int j = 0; j < 7; ++j) benchmark::DoNotOptimize(cmn::build_blanket_partition(s, cards, j));
}
BENCHMARK(BM_BlanketPartition);

void BM_LogMpl(benchmark::State& state) {
  const auto data = reference_sample(static_cast<std::size_t>(state.range(0)));
  const auto s = cmn::reference_structure();
  const cmn::ScoreConfig config{0.5, 0.01, false};
  for (auto _ : state) benchmark::DoNotOptimize(cmn::log_mpl(data, s, config));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogMpl)->Arg(250)->Arg(1000)->Arg(4000);

void BM_GraphHillClimb(benchmark::State& state) {
  const auto data = reference_sample(static_cast<std::size_t>(state.range(0)));
  const cmn::ScoreConfig config{0.5, 1.0 / static_cast<double>(data.n()), false};
  for (auto _ : state) benchmark::DoNotOptimize(cmn::graph_hill_climb(data, config, {}));
}
BENCHMARK(BM_GraphHillClimb)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_FitMle(benchmark::State& state) {
  const auto data = reference_sample(4000);
  const auto s = cmn::reference_structure();
  for (auto _ : state) benchmark::DoNotOptimize(cmn::fit_mle(data, s));
}
BENCHMARK(BM_FitMle)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
