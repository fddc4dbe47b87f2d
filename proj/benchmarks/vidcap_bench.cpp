#include <benchmark/benchmark.h>

#include "vidcap/afs.hpp"
#include "vidcap/encoder.hpp"
#include "vidcap/harness.hpp"
#include "vidcap/metrics.hpp"
#include "vidcap/model.hpp"

#include <random>

using namespace vidcap;

namespace {

VideoClip noise_clip(std::size_t t, std::uint64_t seed) {
    VideoClip clip(t, 16, 16, 3);
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& p : clip.pixels) p = u(eng);
    return clip;
}

} // namespace

static void BM_AfsSelect(benchmark::State& state) {
    const VideoClip clip = noise_clip(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        const auto cdf = afs::build_cdf(afs::frame_dissimilarity(clip, afs::Metric::Mad));
        benchmark::DoNotOptimize(afs::select_frames(cdf, 8));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AfsSelect)->Arg(16)->Arg(64)->Arg(256);

static void BM_WindowAttention(benchmark::State& state) {
    const auto shift = state.range(0) != 0;
    const Dims3 dims{4, 4, 4}, window{2, 2, 2};
    ParamStore store;
    Rng rng(3);
    WindowAttentionParams p;
    p.heads = 2;
    p.q = LinearRef::create(store, "q", 16, 16, rng);
    p.k = LinearRef::create(store, "k", 16, 16, rng);
    p.v = LinearRef::create(store, "v", 16, 16, rng);
    p.proj = LinearRef::create(store, "proj", 16, 16, rng);
    p.rel_bias = &store.add("rel_bias", randn({27, 2}, rng, 0.02));
    const Tensor x = randn({dims.count(), 16}, rng);
    for (auto _ : state) {
        Tape tape;
        benchmark::DoNotOptimize(window_self_attention(tape, tape.constant(x), dims, window, shift, p).value());
    }
}
BENCHMARK(BM_WindowAttention)->Arg(0)->Arg(1);

static void BM_EncodeClip(benchmark::State& state) {
    CaptionModel model(ModelConfig::desk(40, 16), 1);
    const VideoClip clip = noise_clip(8, 2);
    for (auto _ : state) {
        Tape tape;
        benchmark::DoNotOptimize(model.encode(tape, clip).tokens.tokens.value());
    }
}
BENCHMARK(BM_EncodeClip)->Unit(benchmark::kMillisecond);

static void BM_BeamCaption(benchmark::State& state) {
    CaptionModel model(ModelConfig::desk(40, 16), 1);
    const VideoClip clip = noise_clip(8, 3);
    GenerationRequest req;
    req.beam = static_cast<std::size_t>(state.range(0));
    req.max_length = 10;
    for (auto _ : state) benchmark::DoNotOptimize(model.caption(clip, req));
}
BENCHMARK(BM_BeamCaption)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_CiderCorpus(benchmark::State& state) {
    std::mt19937_64 eng(4);
    std::vector<metrics::Tokens> preds;
    metrics::References refs;
    auto sentence = [&] {
        metrics::Tokens t;
        for (int i = 0; i < 8; ++i) t.push_back("w" + std::to_string(eng() % 50));
        return t;
    };
    for (int64_t i = 0; i < state.range(0); ++i) {
        preds.push_back(sentence());
        refs.push_back({sentence(), sentence(), sentence()});
    }
    for (auto _ : state) benchmark::DoNotOptimize(metrics::cider_d(preds, refs).score);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CiderCorpus)->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
