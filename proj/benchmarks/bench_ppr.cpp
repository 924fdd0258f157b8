#include <benchmark/benchmark.h>

#include "vcrg/graph.hpp"
#include "vcrg/ppr.hpp"
#include "vcrg/synth.hpp"

namespace {

vcrg::Graph bench_graph(std::size_t n, double avg_deg) {
    vcrg::SbmSpec spec;
    spec.n = n;
    spec.b = 4;
    spec.p_in = avg_deg / static_cast<double>(n);
    spec.p_out = spec.p_in / 4.0;
    spec.d = 4;
    spec.sigma_sep = 1.0;
    spec.seed = 9;
    return vcrg::generate_sbm(spec).graph;
}

void bm_ppr_power(benchmark::State& state) {
    vcrg::Graph g = bench_graph(static_cast<std::size_t>(state.range(0)), 8.0);
    vcrg::TransitionMatrix t = vcrg::normalize(g, vcrg::NormKind::column);
    for (auto _ : state) {
        auto r = vcrg::ppr_power(t, 0, 0.85, 1e-8, 2000);
        benchmark::DoNotOptimize(r.entries.data());
    }
}
BENCHMARK(bm_ppr_power)->Arg(1000)->Arg(4000);

void bm_ppr_cpi(benchmark::State& state) {
    vcrg::Graph g = bench_graph(static_cast<std::size_t>(state.range(0)), 8.0);
    vcrg::TransitionMatrix t = vcrg::normalize(g, vcrg::NormKind::column);
    for (auto _ : state) {
        auto r = vcrg::ppr_cpi(t, 0, 0.85, 1e-8);
        benchmark::DoNotOptimize(r.entries.data());
    }
}
BENCHMARK(bm_ppr_cpi)->Arg(1000)->Arg(4000);

void bm_ppr_push(benchmark::State& state) {
    vcrg::Graph g = bench_graph(4000, 8.0);
    double eps = 1.0 / static_cast<double>(state.range(0));
    for (auto _ : state) {
        auto r = vcrg::ppr_push(g, 0, 0.85, eps);
        benchmark::DoNotOptimize(r.entries.data());
    }
}
BENCHMARK(bm_ppr_push)->Arg(1000)->Arg(10000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
