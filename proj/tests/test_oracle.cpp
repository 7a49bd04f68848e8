#include "support.hpp"

#include "sepeval/error.hpp"
#include "sepeval/oracle.hpp"

#include <doctest.h>

#include <numbers>

using namespace sepeval;

namespace {

// Sum of sines with a half-second raised-cosine fade at both ends.
AudioSignal tones(std::initializer_list<double> freqs, Eigen::Index n, int rate) {
    AudioSignal s(n, 2, rate);
    const Eigen::Index fade = rate / 2;
    for (Eigen::Index k = 0; k < n; ++k) {
        double env = 1.0;
        if (k < fade) env = 0.5 - 0.5 * std::cos(std::numbers::pi * k / fade);
        if (n - 1 - k < fade) env = 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - k) / fade);
        double v = 0.0;
        for (double f : freqs) v += std::sin(2.0 * std::numbers::pi * f * k / rate);
        s.samples(k, 0) = 0.2 * env * v;
        s.samples(k, 1) = 0.1 * env * v;
    }
    return s;
}

double snr_db(const AudioSignal& ref, const AudioSignal& est) {
    return 10.0 * std::log10(ref.samples.squaredNorm() / (ref.samples - est.samples).squaredNorm());
}

}  // namespace

TEST_CASE("method names") {
    CHECK(OracleMethod::parse("IBM1").kind == OracleKind::ibm);
    CHECK(OracleMethod::parse("IBM1").exponent == 1.0);
    CHECK(OracleMethod::parse("IBM2").exponent == 2.0);
    CHECK(OracleMethod::parse("IRM1").kind == OracleKind::irm);
    CHECK(OracleMethod::parse("IRM1").exponent == 1.0);
    CHECK(OracleMethod::parse("IRM2").exponent == 2.0);
    CHECK(OracleMethod::parse("MWF").kind == OracleKind::mwf);
    CHECK(OracleMethod::parse("IRM", 1.5).exponent == 1.5);
    CHECK(OracleMethod::parse("IRM", 1.5).label() == "IRM1.5");
    CHECK(OracleMethod::parse("IRM2").label() == "IRM2");
    CHECK(OracleMethod::parse("MWF").label() == "MWF");
    CHECK_THROWS_AS(OracleMethod::parse("IBM3"), ConfigError);
    CHECK_THROWS_AS(OracleMethod::parse("wiener"), ConfigError);
    CHECK_THROWS_AS(OracleMethod::parse("IRM", 0.0), ConfigError);
}

TEST_CASE("disjoint bands separate almost perfectly with a binary mask") {
    const int rate = 44100;
    const Eigen::Index n = 3 * rate;
    const AudioSignal low = tones({220.0, 530.0}, n, rate);
    const AudioSignal high = tones({3100.0, 7450.0}, n, rate);
    const AudioSignal mix = test::sum({low, high});
    const std::vector<AudioSignal> sources = {low, high};
    const auto est = oracle_separate(mix, sources, OracleMethod::parse("IBM1"));
    REQUIRE(est.size() == 2);
    CHECK(est[0].length() == n);
    CHECK(snr_db(low, est[0]) >= 40.0);
    CHECK(snr_db(high, est[1]) >= 40.0);
}

TEST_CASE("conservative oracles reconstruct the mixture") {
    std::mt19937_64 rng(31);
    const int rate = 16000;
    std::vector<AudioSignal> sources;
    for (double pole : {0.1, 0.8, 0.97}) sources.push_back(test::colored_noise(2 * rate, 2, rng, pole, 1.3, rate));
    const AudioSignal mix = test::sum(sources);
    for (const char* name : {"IRM1", "IRM2", "MWF"}) {
        const auto est = oracle_separate(mix, sources, OracleMethod::parse(name));
        REQUIRE(est.size() == 3);
        CAPTURE(name);
        CHECK(test::max_abs_diff(test::sum(est).samples, mix.samples) <= 1e-6);
    }
    const auto irm = oracle_separate(mix, sources, OracleMethod::parse("IRM", 0.7));
    CHECK(test::max_abs_diff(test::sum(irm).samples, mix.samples) <= 1e-6);
}

TEST_CASE("a single source is returned unchanged") {
    std::mt19937_64 rng(32);
    const AudioSignal x = test::noise(20000, 2, rng, 0.3, 16000);
    const std::vector<AudioSignal> sources = {x};
    for (const char* name : {"IBM1", "IBM2", "IRM1", "IRM2", "MWF"}) {
        const auto est = oracle_separate(x, sources, OracleMethod::parse(name));
        CAPTURE(name);
        CHECK(test::max_abs_diff(est[0].samples, x.samples) <= 1e-6);
    }
}

TEST_CASE("oracle input checks") {
    std::mt19937_64 rng(33);
    const AudioSignal x = test::noise(5000, 2, rng, 0.3, 16000);
    const AudioSignal shorter = test::noise(4000, 2, rng, 0.3, 16000);
    const std::vector<AudioSignal> bad = {x, shorter};
    CHECK_THROWS_AS(oracle_separate(x, bad, OracleMethod::parse("IRM2")), ShapeError);
    CHECK_THROWS_AS(oracle_separate(x, std::span<const AudioSignal>{}, OracleMethod::parse("IRM2")), ShapeError);
    const std::vector<AudioSignal> ok = {x};
    CHECK_THROWS_AS(oracle_separate(x, ok, OracleMethod::parse("IRM2"), StftConfig{4096, 3000, WindowKind::hann}),
                    ConfigError);
}
