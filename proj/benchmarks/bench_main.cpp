#include "pptree/ba_sim.hpp"
#include "pptree/ce_sim.hpp"
#include "pptree/kbrw.hpp"
#include "pptree/rng.hpp"
#include "pptree/stats.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace pptree;

static void BM_PhiloxSequential(benchmark::State& state)
{
    auto s = make_stream(1, 0);
    for (auto _ : state)
        benchmark::DoNotOptimize(s.uniform());
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PhiloxSequential);

static void BM_PhiloxAddressed(benchmark::State& state)
{
    const auto s = make_stream(1, 0);
    NodeKey k = kRootKey;
    for (auto _ : state) {
        benchmark::DoNotOptimize(s.uniform_at(k, 1));
        k = child_key(k, 0);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PhiloxAddressed);

// Killed-walk totals; the argument is lambda in thousandths.
static void BM_KbrwTotals(benchmark::State& state)
{
    const double lambda = static_cast<double>(state.range(0)) / 1000.0;
    KbrwEngine engine(CePointProcess{lambda, OffspringLaw::d_ary(2)}, {10'000'000, 10'000});
    std::uint64_t r = 0;
    std::uint64_t nodes = 0;
    for (auto _ : state)
        nodes += engine.run_totals(make_stream(2, r++), 0.0).z;
    state.SetItemsProcessed(state.iterations());
    state.counters["mean_z"] = benchmark::Counter(static_cast<double>(nodes) / static_cast<double>(state.iterations()));
}
BENCHMARK(BM_KbrwTotals)->Arg(100)->Arg(150)->Arg(171);

static void BM_CeDirect(benchmark::State& state)
{
    const double lambda = static_cast<double>(state.range(0)) / 1000.0;
    std::uint64_t r = 0;
    for (auto _ : state) {
        const auto rng = make_stream(3, r++);
        auto tree = new_tree(OffspringLaw::d_ary(2), {100'000, 200}, rng);
        benchmark::DoNotOptimize(simulate_ce(tree, {{kRootNode}, 0.0}, lambda).z);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CeDirect)->Arg(150)->Arg(300);

static void BM_Coupling(benchmark::State& state)
{
    std::uint64_t r = 0;
    for (auto _ : state) {
        const auto rng = make_stream(4, r++);
        auto tree = new_tree(OffspringLaw::d_ary(2), {100'000, 12}, rng);
        benchmark::DoNotOptimize(coupling_realization(tree, 0.3).z());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Coupling);

static void BM_BaDirect(benchmark::State& state)
{
    const TimerLaw timer = TimerLaw::exponential(1.0);
    std::uint64_t r = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(simulate_ba(0.1875, timer, {1'000'000, 10'000}, make_stream(5, r++)).n);
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BaDirect);

static void BM_QWalkCritical(benchmark::State& state)
{
    const QWalk walk(analytics::ModelParams(3 - 2 * std::numbers::sqrt2, 2.0));
    auto s = make_stream(6, 0);
    QWalkOptions opt;
    opt.step_cap = 100'000;
    for (auto _ : state)
        benchmark::DoNotOptimize(walk.sample(0.0, s, opt).overshoot);
}
BENCHMARK(BM_QWalkCritical);

static void BM_TailFit(benchmark::State& state)
{
    auto s = make_stream(7, 0);
    std::vector<std::uint64_t> z(static_cast<std::size_t>(state.range(0)));
    for (auto& v : z)
        v = static_cast<std::uint64_t>(std::ceil(10 * std::pow(s.uniform(), -1 / 2.4)));
    for (auto _ : state)
        benchmark::DoNotOptimize(stats::tail_fit(z, {}, 1e2, 1e4).slope);
}
BENCHMARK(BM_TailFit)->Arg(1'000'000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
