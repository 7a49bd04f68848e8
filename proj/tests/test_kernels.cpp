// Parallel kernels against the serial reference versions, and thread-count
// invariance of everything that runs under OpenMP.

#include "support.hpp"

#include "sepeval/masks.hpp"
#include "sepeval/oracle.hpp"
#include "sepeval/reference.hpp"

#include <doctest.h>
#include <omp.h>

using namespace sepeval;

namespace {

SourceImages images_of(const std::vector<AudioSignal>& signals, const StftConfig& cfg) {
    SourceImages s;
    for (const auto& x : signals) s.images.push_back(stft(x, cfg));
    return s;
}

std::vector<AudioSignal> sources(std::mt19937_64& rng, std::size_t J, Eigen::Index n, int rate = 8000) {
    std::vector<AudioSignal> out;
    for (std::size_t j = 0; j < J; ++j)
        out.push_back(test::colored_noise(n, 2, rng, 0.2 + 0.25 * static_cast<double>(j), 2.0, rate));
    return out;
}

template <class F>
auto with_threads(int n, F&& fn) {
    const int before = omp_get_max_threads();
    omp_set_num_threads(n);
    auto result = fn();
    omp_set_num_threads(before);
    return result;
}

bool same_bits(const Spectrogram& a, const Spectrogram& b) {
    return a.same_shape(b) && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_CASE("scalar masks match the serial versions") {
    std::mt19937_64 rng(61);
    const auto s = images_of(sources(rng, 3, 6000), StftConfig{512, 128, WindowKind::hann});
    for (int order : {1, 2}) {
        const auto a = ibm_mask(s, order), b = reference::ibm_mask(s, order);
        std::size_t differ = 0;
        for (std::size_t k = 0; k < a.values.size(); ++k) differ += a.values[k] != b.values[k];
        CHECK(differ == 0);
    }
    for (double alpha : {1.0, 2.0, 0.6}) {
        const auto a = irm_mask(s, alpha), b = reference::irm_mask(s, alpha);
        double worst = 0.0;
        for (std::size_t k = 0; k < a.values.size(); ++k) worst = std::max(worst, std::abs(a.values[k] - b.values[k]));
        CHECK(worst <= 1e-14);
    }
}

TEST_CASE("mwf mask matches the explicit inverse") {
    std::mt19937_64 rng(62);
    const auto s = images_of(sources(rng, 3, 6000), StftConfig{512, 128, WindowKind::hann});
    const auto model = estimate_mwf_model(s, 2);
    const auto a = mwf_mask(model), b = reference::mwf_mask(model);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) worst = std::max(worst, std::abs(a.values[k] - b.values[k]));
    CHECK(worst <= 1e-9);
}

TEST_CASE("fft correlations match time-domain lagged products") {
    std::mt19937_64 rng(63);
    for (std::size_t L : {1u, 7u, 64u}) {
        const auto refs = sources(rng, 3, 1500);
        const AudioSignal est = test::noise(1500, 2, rng, 0.4, 8000);
        const Eigen::MatrixXd g = gram_matrix(refs, L), gr = reference::gram_matrix(refs, L);
        const double scale = gr.cwiseAbs().maxCoeff();
        CHECK(test::max_abs_diff(g, gr) <= 1e-12 * scale * 100);
        const Eigen::MatrixXd d = cross_correlations(refs, est, L), dr = reference::cross_correlations(refs, est, L);
        CHECK(test::max_abs_diff(d, dr) <= 1e-12 * dr.cwiseAbs().maxCoeff() * 100);
    }
}

TEST_CASE("fft projection matches direct convolution") {
    std::mt19937_64 rng(64);
    const auto refs = sources(rng, 3, 2000);
    AudioSignal est = test::noise(2000, 2, rng, 0.2, 8000);
    est.samples += refs[1].samples;
    const ReferenceSet set(refs, 32);
    const ProjectionFilters p = set.fit(est, 1);
    const Eigen::MatrixXd joint = set.project(p, ReferenceSet::Scope::joint);
    const Eigen::MatrixXd own = set.project(p, ReferenceSet::Scope::target);
    CHECK(test::max_abs_diff(joint, reference::project(refs, p, true)) <= 1e-10);
    CHECK(test::max_abs_diff(own, reference::project(refs, p, false)) <= 1e-10);

    const Decomposition d = set.decompose(est, p);
    const Eigen::MatrixXd e = framewise_energies(d, 500, 250), er = reference::framewise_energies(d, 500, 250);
    CHECK(e.rows() == 7);
    CHECK(test::max_abs_diff(e, er) <= 1e-10 * er.cwiseAbs().maxCoeff());
}

TEST_CASE("results do not depend on the thread count") {
    std::mt19937_64 rng(65);
    const auto srcs = sources(rng, 3, 12000);
    const AudioSignal mix = test::sum(srcs);
    const StftConfig cfg{512, 128, WindowKind::hann};

    const auto x1 = with_threads(1, [&] { return stft(mix, cfg); });
    const auto x4 = with_threads(4, [&] { return stft(mix, cfg); });
    CHECK(same_bits(x1, x4));

    for (const char* name : {"IBM1", "IRM2", "MWF"}) {
        const auto a = with_threads(1, [&] { return oracle_separate(mix, srcs, OracleMethod::parse(name), cfg); });
        const auto b = with_threads(4, [&] { return oracle_separate(mix, srcs, OracleMethod::parse(name), cfg); });
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j].samples == b[j].samples);
    }

    const auto s = images_of(srcs, cfg);
    const auto m1 = with_threads(1, [&] { return mwf_mask(estimate_mwf_model(s, 2)); });
    const auto m4 = with_threads(4, [&] { return mwf_mask(estimate_mwf_model(s, 2)); });
    CHECK(m1.values == m4.values);

    std::vector<AudioSignal> ests = srcs;
    ests[0].samples += 0.1 * srcs[2].samples;
    const BssEvalConfig bcfg{64, 4000, 2000};
    const auto b1 = with_threads(1, [&] { return bss_eval(srcs, ests, {}, bcfg); });
    const auto b4 = with_threads(4, [&] { return bss_eval(srcs, ests, {}, bcfg); });
    for (std::size_t k = 0; k < b1.size(); ++k)
        for (std::size_t w = 0; w < b1[k].frames.size(); ++w) {
            const auto &f = b1[k].frames[w], &g = b4[k].frames[w];
            CHECK((f.sdr == g.sdr && f.isr == g.isr && f.sir == g.sir && f.sar == g.sar));
        }
}
