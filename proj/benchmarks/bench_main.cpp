#include <benchmark/benchmark.h>

#include "hdqkd/encdemo.hpp"
#include "hdqkd/keyrate_dual.hpp"
#include "hdqkd/linksim.hpp"
#include "hdqkd/rng.hpp"
#include "hdqkd/turbulence.hpp"

using namespace hdqkd;

static void BM_PhaseScreen(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto rng = make_stream(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(kolmogorov_screen(0.18, n, 0.18 / 16, rng));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_PhaseScreen)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_StructureFunction(benchmark::State& state) {
  auto rng = make_stream(1, 0);
  auto s = kolmogorov_screen(0.18, 512, 0.18 / 16, rng);
  const std::vector<int> lags{4, 8, 16, 32, 64};
  for (auto _ : state) benchmark::DoNotOptimize(structure_function(s, lags));
}
BENCHMARK(BM_StructureFunction)->Unit(benchmark::kMillisecond);

static void BM_DualObjective(benchmark::State& state) {
  const auto cs = build_bb84_constraints(4, 0.1, mub_d4(1));
  Eigen::VectorXd lam(3);
  lam << -2.3, 0.5, 3.3;
  for (auto _ : state) benchmark::DoNotOptimize(dual_objective(lam, cs));
}
BENCHMARK(BM_DualObjective)->Unit(benchmark::kMicrosecond);

static void BM_DualGradient(benchmark::State& state) {
  const auto cs = build_bb84_constraints(4, 0.1, mub_d4(1));
  Eigen::VectorXd lam(3);
  lam << -2.3, 0.5, 3.3;
  for (auto _ : state) benchmark::DoNotOptimize(dual_gradient(lam, cs));
}
BENCHMARK(BM_DualGradient)->Unit(benchmark::kMicrosecond);

static void BM_DualKeyRate(benchmark::State& state) {
  const auto m = mub_d4(1);
  OptimizerConfig cfg;
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(dual_key_rate(0.1, m, cfg));
}
BENCHMARK(BM_DualKeyRate)->Unit(benchmark::kMillisecond);

static void BM_RunProtocol(benchmark::State& state) {
  const auto m = mub_d4(1);
  const auto t = make_turbulence(2.5e-15, 300, 850e-9, 12e-3);
  for (auto _ : state) benchmark::DoNotOptimize(run_protocol(m, reference_budget(), t, 50, 1, 1));
  state.SetItemsProcessed(state.iterations() * 64 * 50);
}
BENCHMARK(BM_RunProtocol)->Unit(benchmark::kMillisecond);

static void BM_ChannelCorrupt(benchmark::State& state) {
  const auto img = discretize(test_pattern(256, 256), 4);
  const auto m = theoretical_matrix(mub_d4(1));
  for (auto _ : state) benchmark::DoNotOptimize(channel_corrupt(img, m, 1, {std::nullopt, 1}));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(img.symbols.size()));
}
BENCHMARK(BM_ChannelCorrupt)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
