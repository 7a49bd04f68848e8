// Parallel/FFT kernels against the serial reference versions.

#include "sepeval/bss_eval.hpp"
#include "sepeval/masks.hpp"
#include "sepeval/reference.hpp"
#include "sepeval/stft.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace sepeval;

namespace {

std::vector<AudioSignal> make_sources(std::size_t J, Eigen::Index n) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d(0.0, 0.1);
    std::vector<AudioSignal> out;
    for (std::size_t j = 0; j < J; ++j) {
        AudioSignal s(n, 2, 44100);
        for (Eigen::Index k = 0; k < s.samples.size(); ++k) s.samples.data()[k] = d(rng);
        out.push_back(std::move(s));
    }
    return out;
}

const SourceImages& images() {
    static const SourceImages s = [] {
        SourceImages out;
        for (const auto& x : make_sources(4, 5 * 44100)) out.images.push_back(stft(x));
        return out;
    }();
    return s;
}

const SpatialModel& model() {
    static const SpatialModel m = estimate_mwf_model(images(), 2);
    return m;
}

void BM_irm(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(irm_mask(images(), 2.0));
}
void BM_irm_reference(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(reference::irm_mask(images(), 2.0));
}
void BM_ibm(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(ibm_mask(images(), 1));
}
void BM_ibm_reference(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(reference::ibm_mask(images(), 1));
}
void BM_mwf(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(mwf_mask(model()));
}
void BM_mwf_reference(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(reference::mwf_mask(model()));
}

void BM_gram(benchmark::State& st) {
    const auto refs = make_sources(4, 8192);
    for (auto _ : st) benchmark::DoNotOptimize(gram_matrix(refs, static_cast<std::size_t>(st.range(0))));
}
void BM_gram_reference(benchmark::State& st) {
    const auto refs = make_sources(4, 8192);
    for (auto _ : st) benchmark::DoNotOptimize(reference::gram_matrix(refs, static_cast<std::size_t>(st.range(0))));
}

void BM_bss_eval(benchmark::State& st) {
    const auto refs = make_sources(2, 10 * 44100);
    BssEvalConfig cfg;
    cfg.mode = st.range(0) ? FilterMode::windowed : FilterMode::global;
    for (auto _ : st) benchmark::DoNotOptimize(bss_eval(refs, refs, {}, cfg));
}

}  // namespace

BENCHMARK(BM_irm)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_irm_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ibm)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ibm_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mwf)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mwf_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram_reference)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bss_eval)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
