#include <benchmark/benchmark.h>

#include "vcrg/common.hpp"
#include "vcrg/model.hpp"

namespace {

vcrg::TokenList random_list(vcrg::Rng& rng, std::size_t rows, std::size_t dim) {
    vcrg::TokenList list;
    list.t = vcrg::MatF(rows, dim);
    list.mask.assign(rows, 1);
    for (auto& v : list.t.v) v = static_cast<float>(rng.normal());
    return list;
}

void bm_encoder_forward(benchmark::State& state) {
    vcrg::ModelConfig cfg;
    cfg.layers = 1;
    cfg.width = 64;
    cfg.heads = 4;
    cfg.token_dim = 17;
    cfg.classes = 5;
    auto params = vcrg::ModelParamsF::init(cfg, 1);

    vcrg::Rng rng(2);
    auto list = random_list(rng, static_cast<std::size_t>(state.range(0)), 17);
    for (auto _ : state) {
        auto out = vcrg::encoder_forward(params, list);
        benchmark::DoNotOptimize(out.logits.data());
    }
}
BENCHMARK(bm_encoder_forward)->Arg(8)->Arg(32)->Arg(64);

void bm_loss_and_backward(benchmark::State& state) {
    vcrg::ModelConfig cfg;
    cfg.layers = 1;
    cfg.width = 64;
    cfg.heads = 4;
    cfg.token_dim = 17;
    cfg.classes = 5;
    auto params = vcrg::ModelParamsD::init(cfg, 1);

    vcrg::Rng rng(2);
    std::vector<vcrg::TokenList> lists;
    std::vector<std::int32_t> labels;
    for (int i = 0; i < 32; ++i) {
        lists.push_back(random_list(rng, static_cast<std::size_t>(state.range(0)), 17));
        labels.push_back(static_cast<std::int32_t>(rng.below(5)));
    }
    std::vector<const vcrg::TokenList*> batch;
    for (const auto& l : lists) batch.push_back(&l);

    auto grads = vcrg::ModelParamsD::zeros(cfg);
    for (auto _ : state) {
        double loss = vcrg::loss_and_backward(params, batch, labels, grads);
        benchmark::DoNotOptimize(loss);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 32);
}
BENCHMARK(bm_loss_and_backward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
