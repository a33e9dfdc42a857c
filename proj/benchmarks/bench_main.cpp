// Microbenchmarks for the numerically heavy pieces: contourlet decomposition,
// the attention primitives, the codec round trip, and a whole training step.
#include <benchmark/benchmark.h>

#include "pptformer/attention.hpp"
#include "pptformer/codec.hpp"
#include "pptformer/contourlet.hpp"
#include "pptformer/dataset.hpp"
#include "pptformer/model.hpp"
#include "pptformer/rng.hpp"

using namespace ppt;

namespace {

Tensor random_map(int h, int w, int c, uint64_t seed) {
    Rng rng(seed);
    return rng.normal_tensor(c > 0 ? std::vector<int>{h, w, c} : std::vector<int>{h, w}, 1.0);
}

void BM_LpDecompose(benchmark::State& state) {
    int n = (int)state.range(0);
    Tensor x = random_map(n, n, 1, 11);
    for (auto _ : state) {
        ag::Tape tape(false);
        auto [lo, hi] = contourlet::lp_decompose(tape.leaf(x));
        benchmark::DoNotOptimize(lo.value().raw().data());
        benchmark::DoNotOptimize(hi.value().raw().data());
    }
    state.SetItemsProcessed(state.iterations() * n * n);
}

void BM_ContourletTexture(benchmark::State& state) {
    int n = (int)state.range(0);
    Tensor x = random_map(n, n, 8, 12);
    for (auto _ : state) {
        ag::Tape tape(false);
        ag::Var t = contourlet::contourlet_texture(tape.leaf(x), 2, 2);
        benchmark::DoNotOptimize(t.value().raw().data());
    }
}

void BM_AttentionStep(benchmark::State& state) {
    int tokens = (int)state.range(0);
    Tensor a = random_map(tokens, 32, 0, 13);
    Tensor b = random_map(tokens, 32, 0, 14);
    for (auto _ : state) {
        ag::Tape tape(false);
        ag::Var out = attention::attention_step(tape.leaf(a), tape.leaf(b));
        benchmark::DoNotOptimize(out.value().raw().data());
    }
    state.SetItemsProcessed(state.iterations() * tokens * tokens);
}

void BM_PmpChain(benchmark::State& state) {
    int m = (int)state.range(0);
    Tensor a = random_map(64, 32, 0, 15);
    Tensor b = random_map(64, 32, 0, 16);
    for (auto _ : state) {
        ag::Tape tape(false);
        ag::Var out = attention::pmp_chain(tape.leaf(a), tape.leaf(b), m);
        benchmark::DoNotOptimize(out.value().raw().data());
    }
}

void BM_CodecRoundTrip(benchmark::State& state) {
    codec::CodecConfig cfg;
    cfg.channels = 24;
    cfg.T = 2;
    cfg.z = 2;
    cfg.descriptor_dim = 6;
    Rng rng(17);
    codec::CodecParams params = codec::CodecParams::init(cfg, rng);
    Tensor f = random_map(8, 8, cfg.channels, 18);
    for (auto _ : state) {
        double loss = codec::reconstruction_loss(cfg, params, f);
        benchmark::DoNotOptimize(loss);
    }
}

void BM_TrainStep(benchmark::State& state) {
    model::ModelConfig cfg;
    cfg.image_size = 32;
    cfg.num_classes = 5;
    cfg.embed_dim = 16;
    cfg.block_channels = 24;
    cfg.plain_layers = 1;
    cfg.head_hidden = 32;
    cfg.M = 2;
    cfg.L_cal = 2;
    cfg.prototypes = 64;
    cfg.T = 2;
    cfg.z = 2;
    cfg.descriptor_dim = 6;
    model::TrainState st = model::TrainState::init(cfg, 1);
    data::SegSample s = data::synth_scene(3, data::Viewpoint{1.0, 5.0, 10.0}, 32, 5, 7);
    std::vector<model::Sample> batch = {model::Sample{s.image, s.labels}};
    for (auto _ : state) {
        model::StepResult r = model::train_step(st, batch);
        benchmark::DoNotOptimize(r.total);
    }
}

void BM_SynthScene(benchmark::State& state) {
    int n = (int)state.range(0);
    uint64_t seed = 0;
    for (auto _ : state) {
        data::SegSample s =
            data::synth_scene(++seed, data::Viewpoint{1.1, 10.0, 20.0}, n, 5, 7);
        benchmark::DoNotOptimize(s.image.raw().data());
    }
    state.SetItemsProcessed(state.iterations() * n * n);
}

}  // namespace

BENCHMARK(BM_LpDecompose)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(BM_ContourletTexture)->Arg(16)->Arg(32);
BENCHMARK(BM_AttentionStep)->Arg(64)->Arg(256);
BENCHMARK(BM_PmpChain)->Arg(1)->Arg(4)->Arg(8);
BENCHMARK(BM_CodecRoundTrip);
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SynthScene)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
