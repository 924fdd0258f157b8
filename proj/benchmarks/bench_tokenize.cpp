#include <benchmark/benchmark.h>

#include "vcrg/synth.hpp"
#include "vcrg/tokens.hpp"

namespace {

void bm_tokenize(benchmark::State& state) {
    vcrg::SbmSpec spec;
    spec.n = static_cast<std::size_t>(state.range(0));
    spec.b = 4;
    spec.p_in = 8.0 / static_cast<double>(spec.n);
    spec.p_out = spec.p_in / 4.0;
    spec.d = 16;
    spec.sigma_sep = 2.0;
    spec.seed = 21;
    vcrg::SbmData data = vcrg::generate_sbm(spec);

    vcrg::TokenizeOptions opt;
    opt.l_hops = 2;
    opt.k_bar = 8;
    opt.k_hat = 8;
    opt.s_bar = 16;
    opt.content_mode = vcrg::ContentMode::train_labels;
    opt.eps = 1e-4;
    opt.seed = 5;

    for (auto _ : state) {
        auto store = vcrg::tokenize_graph(data.graph, data.features, data.labels,
                                          &data.splits, opt);
        benchmark::DoNotOptimize(store.lists.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(bm_tokenize)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
