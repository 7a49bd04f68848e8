#include "support.hpp"

#include "sepeval/bss_eval.hpp"
#include "sepeval/error.hpp"

#include <doctest.h>

using namespace sepeval;
using test::DenseProjection;

namespace {

std::vector<AudioSignal> random_refs(std::size_t J, Eigen::Index n, Eigen::Index I, std::mt19937_64& rng) {
    std::vector<AudioSignal> refs;
    for (std::size_t j = 0; j < J; ++j) refs.push_back(test::noise(n, I, rng, 1.0, 8000));
    return refs;
}

void check_score(const Score& s, double expected_db, double tol) {
    if (std::isinf(expected_db)) {
        CHECK(s.status == (expected_db > 0 ? ScoreStatus::pos_inf : ScoreStatus::neg_inf));
    } else if (std::isnan(expected_db)) {
        CHECK(s.status == ScoreStatus::undefined);
    } else {
        REQUIRE(s.finite());
        CHECK(std::abs(s.value - expected_db) <= tol);
    }
}

double max_tap_diff(const ProjectionFilters& p, const DenseProjection& d) {
    double m = 0.0;
    const std::size_t I = p.channels, L = p.filter_len;
    for (std::size_t j = 0; j < p.references; ++j)
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t c = 0; c < I; ++c)
                for (std::size_t l = 0; l < L; ++l)
                    m = std::max(m, std::abs(p.joint_tap(j, i, c, l) -
                                             d.joint_taps(static_cast<Eigen::Index>((j * I + i) * L + l),
                                                          static_cast<Eigen::Index>(c))));
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t c = 0; c < I; ++c)
            for (std::size_t l = 0; l < L; ++l)
                m = std::max(m, std::abs(p.target_tap(i, c, l) -
                                         d.target_taps(static_cast<Eigen::Index>(i * L + l), static_cast<Eigen::Index>(c))));
    return m;
}

}  // namespace

TEST_CASE("filters match a dense least-squares solve") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t J = 1 + trial % 3, L = 1 + trial % 8;
        const Eigen::Index I = 1 + trial % 2, n = 64 + 10 * trial;
        const auto refs = random_refs(J, n, I, rng);
        const AudioSignal est = test::noise(n, I, rng, 1.0, 8000);
        const std::size_t target = static_cast<std::size_t>(trial) % J;
        const ProjectionFilters p = compute_projection(refs, est, target, L);
        const DenseProjection dense = test::dense_projection(refs, est, target, L);
        CHECK_FALSE(p.rank_deficient);
        CHECK(max_tap_diff(p, dense) <= 1e-9);

        const ReferenceSet set(refs, L);
        CHECK(test::max_abs_diff(set.project(p, ReferenceSet::Scope::joint), dense.joint) <= 1e-9);
        CHECK(test::max_abs_diff(set.project(p, ReferenceSet::Scope::target), dense.own) <= 1e-9);

        const test::DirectMetrics direct = test::dense_metrics(refs, est, target, L);
        const auto frames = metrics_from_decomposition(set.decompose(est, p), static_cast<std::size_t>(n),
                                                       static_cast<std::size_t>(n));
        REQUIRE(frames.size() == 1);
        check_score(frames[0].sdr, direct.sdr, 1e-8);
        check_score(frames[0].isr, direct.isr, 1e-8);
        check_score(frames[0].sir, direct.sir, 1e-8);
        check_score(frames[0].sar, direct.sar, 1e-8);
    }
}

TEST_CASE("identity estimate gives a unit impulse and no residual") {
    std::mt19937_64 rng(42);
    const auto refs = random_refs(2, 500, 2, rng);
    const ProjectionFilters p = compute_projection(refs, refs[1], 1, 16);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t l = 0; l < 16; ++l) {
                const double expected = (i == c && l == 0) ? 1.0 : 0.0;
                CHECK(std::abs(p.target_tap(i, c, l) - expected) <= 1e-10);
                CHECK(std::abs(p.joint_tap(1, i, c, l) - expected) <= 1e-10);
                CHECK(std::abs(p.joint_tap(0, i, c, l)) <= 1e-10);
            }
    const Decomposition d = decompose(refs[1], refs, 1, p);
    CHECK(d.spatial.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(d.interference.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(d.artifacts.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("delayed reference is matched by a delayed impulse") {
    std::mt19937_64 rng(43);
    const Eigen::Index n = 8000;
    const std::size_t L = 32, delay = 5;
    // Silent tail so the delayed copy fits inside the full-length projection.
    AudioSignal ref = test::noise(n, 2, rng, 0.5, 8000);
    ref.samples.bottomRows(64).setZero();
    AudioSignal est(n, 2, 8000);
    est.samples.bottomRows(n - delay) = ref.samples.topRows(n - delay);
    const std::vector<AudioSignal> refs = {ref};
    const ProjectionFilters p = compute_projection(refs, est, 0, L);
    for (std::size_t c = 0; c < 2; ++c) {
        std::size_t best = 0;
        for (std::size_t l = 1; l < L; ++l)
            if (std::abs(p.target_tap(c, c, l)) > std::abs(p.target_tap(c, c, best))) best = l;
        CHECK(best == delay);
        CHECK(p.target_tap(c, c, delay) == doctest::Approx(1.0).epsilon(1e-9));
    }
    const Decomposition d = decompose(est, refs, 0, p);
    CHECK(d.artifacts.squaredNorm() <= 1e-8 * est.samples.squaredNorm());
}

TEST_CASE("closed-form decompositions") {
    std::mt19937_64 rng(44);
    const auto refs = random_refs(3, 4000, 2, rng);
    const ReferenceSet set(refs, 64);

    AudioSignal twice = refs[0];
    twice.samples *= 2.0;
    Decomposition d = set.decompose(twice, set.fit(twice, 0));
    CHECK(test::max_abs_diff(d.target, refs[0].samples) == 0.0);
    CHECK(test::max_abs_diff(d.spatial, refs[0].samples) <= 1e-9);
    CHECK(d.interference.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(d.artifacts.cwiseAbs().maxCoeff() <= 1e-9);
    auto frames = metrics_from_decomposition(d, 4000, 4000);
    check_score(frames[0].sdr, 0.0, 1e-9);
    check_score(frames[0].isr, 0.0, 1e-9);
    check_score(frames[0].sir, INFINITY, 0);
    check_score(frames[0].sar, INFINITY, 0);

    AudioSignal both = refs[0];
    both.samples += refs[2].samples;
    d = set.decompose(both, set.fit(both, 0));
    const double energy = both.samples.squaredNorm();
    // y0 lies in the target span, so e_interf = y2 - P_target(y2).
    const test::DenseProjection leak = test::dense_projection(refs, refs[2], 0, 64);
    const Eigen::MatrixXd expected = refs[2].samples - leak.own.topRows(4000);
    CHECK((d.interference - expected).squaredNorm() <= 1e-16 * energy);
    CHECK(d.artifacts.squaredNorm() <= 1e-8 * energy);

    d = set.decompose(refs[1], set.fit(refs[1], 1));
    frames = metrics_from_decomposition(d, 1000, 1000);
    CHECK(frames.size() == 4);
    for (const auto& f : frames) {
        check_score(f.sdr, INFINITY, 0);
        check_score(f.isr, INFINITY, 0);
        check_score(f.sir, INFINITY, 0);
        check_score(f.sar, INFINITY, 0);
    }
}

TEST_CASE("decomposition identity, orthogonality and monotone subspaces") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 5; ++trial) {
        const auto refs = random_refs(3, 3000, 2, rng);
        AudioSignal est = test::noise(3000, 2, rng, 0.3, 8000);
        est.samples += 0.7 * refs[0].samples + 0.2 * refs[1].samples;
        const std::size_t L = 24;
        const ReferenceSet set(refs, L);
        for (std::size_t target = 0; target < 3; ++target) {
            const ProjectionFilters p = set.fit(est, target);
            const Decomposition d = set.decompose(est, p);
            const Eigen::MatrixXd sum = d.target + d.spatial + d.interference + d.artifacts;
            CHECK((sum - est.samples).norm() <= 1e-12 * est.samples.norm());

            Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(3000 + L - 1, 2);
            padded.topRows(3000) = est.samples;
            const Eigen::MatrixXd r_all = padded - set.project(p, ReferenceSet::Scope::joint);
            const Eigen::MatrixXd r_own = padded - set.project(p, ReferenceSet::Scope::target);
            const Eigen::MatrixXd A = test::convolution_matrix(refs, 0, 3, L);
            const Eigen::MatrixXd A_own = test::convolution_matrix(refs, target, 1, L);
            const double scale = A.colwise().norm().maxCoeff() * padded.norm();
            CHECK((A.transpose() * r_all).cwiseAbs().maxCoeff() <= 1e-8 * scale);
            CHECK((A_own.transpose() * r_own).cwiseAbs().maxCoeff() <= 1e-8 * scale);
            CHECK(r_all.norm() <= r_own.norm() * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("windowed mode with one full window equals global mode") {
    std::mt19937_64 rng(46);
    const auto refs = random_refs(2, 6000, 2, rng);
    std::vector<AudioSignal> ests = {test::noise(6000, 2, rng, 0.2, 8000), refs[0]};
    ests[0].samples += refs[1].samples;
    BssEvalConfig cfg{32, 6000, 6000, FilterMode::global};
    const auto v4 = bss_eval(refs, ests, {}, cfg);
    cfg.mode = FilterMode::windowed;
    const auto v3 = bss_eval(refs, ests, {}, cfg);
    for (std::size_t k = 0; k < 2; ++k) {
        REQUIRE(v3[k].frames.size() == 1);
        CHECK(v3[k].frames[0].sdr == v4[k].frames[0].sdr);
        CHECK(v3[k].frames[0].isr == v4[k].frames[0].isr);
        CHECK(v3[k].frames[0].sir == v4[k].frames[0].sir);
        CHECK(v3[k].frames[0].sar == v4[k].frames[0].sar);
    }
}

TEST_CASE("windowed mode refits filters per window") {
    std::mt19937_64 rng(47);
    const auto refs = random_refs(2, 4000, 1, rng);
    AudioSignal est = refs[0];
    est.samples.bottomRows(2000) *= -1.0;  // gain flips half way
    const auto filters = compute_windowed_projections(refs, est, 0, 8, 2000, 2000);
    REQUIRE(filters.size() == 2);
    CHECK(filters[0].window_start == 0);
    CHECK(filters[1].window_start == 2000);
    CHECK(filters[0].mode == FilterMode::windowed);
    CHECK(filters[0].target_tap(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(filters[1].target_tap(0, 0, 0) == doctest::Approx(-1.0).epsilon(1e-9));

    BssEvalConfig cfg{8, 2000, 2000, FilterMode::windowed};
    const std::vector<AudioSignal> ests = {est};
    const auto v3 = bss_eval(refs, ests, {}, cfg);
    REQUIRE(v3[0].frames.size() == 2);
    CHECK(v3[0].frames[1].window_start == 2000);
    CHECK(v3[0].frames[0].sdr.status == ScoreStatus::pos_inf);
    CHECK(v3[0].frames[1].sar.status == ScoreStatus::pos_inf);
    cfg.mode = FilterMode::global;
    const auto v4 = bss_eval(refs, ests, {}, cfg);
    CHECK(v4[0].frames[1].sdr.finite());
}

TEST_CASE("window bookkeeping") {
    CHECK(window_count(10, 3, 3) == 3);
    CHECK(window_count(10, 10, 1) == 1);
    CHECK(window_count(10, 4, 2) == 4);
    CHECK_THROWS_AS(window_count(10, 11, 1), ConfigError);
    CHECK_THROWS_AS(window_count(10, 0, 1), ConfigError);
    CHECK_THROWS_AS(window_count(10, 2, 0), ConfigError);
}

TEST_CASE("silent windows are undefined and non-finite scores are classified") {
    std::mt19937_64 rng(48);
    auto refs = random_refs(2, 3000, 2, rng);
    refs[0].samples.middleRows(1000, 1000).setZero();
    refs[1].samples.middleRows(1000, 1000).setZero();
    AudioSignal est = refs[0];
    est.samples += refs[1].samples;
    const std::vector<AudioSignal> ests = {est};
    const auto out = bss_eval(refs, ests, {}, BssEvalConfig{16, 1000, 1000});
    REQUIRE(out[0].frames.size() == 3);
    const auto& mid = out[0].frames[1];
    CHECK(mid.sdr.status == ScoreStatus::undefined);
    CHECK(mid.sir.status == ScoreStatus::undefined);
    CHECK(out[0].frames[0].sir.finite());
    CHECK(out[0].frames[0].sar.status == ScoreStatus::pos_inf);

    // Energies rows: s, s+es, s+es+ei, es, ei, ea, es+ei+ea, est.
    Eigen::RowVectorXd e(8);
    e << 0, 0, 1, 0, 1, 0, 1, 1;
    const FrameScores f = scores_from_energies(e, 1e-20);
    CHECK(f.sdr.status == ScoreStatus::neg_inf);
    CHECK(f.isr.status == ScoreStatus::undefined);
    CHECK(f.sir.status == ScoreStatus::neg_inf);
    CHECK(f.sar.status == ScoreStatus::pos_inf);
    CHECK(std::isinf(f.sdr.as_double()));
    CHECK(f.sdr.as_double() < 0);
    CHECK(std::isnan(f.isr.as_double()));
}

TEST_CASE("swapping estimates swaps their scores") {
    std::mt19937_64 rng(49);
    const auto refs = random_refs(3, 2000, 2, rng);
    std::vector<AudioSignal> ests;
    for (int k = 0; k < 3; ++k) {
        AudioSignal e = test::noise(2000, 2, rng, 0.5, 8000);
        e.samples += refs[k].samples;
        ests.push_back(e);
    }
    const std::vector<std::size_t> targets = {0, 1, 2}, swapped_targets = {1, 0, 2};
    const auto a = bss_eval(refs, ests, targets, BssEvalConfig{16, 1000, 500});
    std::vector<AudioSignal> swapped = {ests[1], ests[0], ests[2]};
    const auto b = bss_eval(refs, swapped, swapped_targets, BssEvalConfig{16, 1000, 500});
    REQUIRE(a[0].frames.size() == 3);
    for (std::size_t w = 0; w < 3; ++w) {
        CHECK(a[0].frames[w].sdr == b[1].frames[w].sdr);
        CHECK(a[1].frames[w].sir == b[0].frames[w].sir);
        CHECK(a[2].frames[w].sar == b[2].frames[w].sar);
    }
}

TEST_CASE("singular gram falls back to the minimum-norm solution") {
    std::mt19937_64 rng(50);
    auto refs = random_refs(2, 1000, 1, rng);
    refs[1] = refs[0];
    AudioSignal est = refs[0];
    est.samples *= 3.0;
    const ReferenceSet set(refs, 4);
    const ProjectionFilters p = set.fit(est, 0);
    CHECK(p.rank_deficient);
    // Minimum norm splits the gain evenly between the identical copies.
    CHECK(p.joint_tap(0, 0, 0, 0) == doctest::Approx(1.5).epsilon(1e-8));
    CHECK(p.joint_tap(1, 0, 0, 0) == doctest::Approx(1.5).epsilon(1e-8));
    const Decomposition d = set.decompose(est, p);
    CHECK(d.artifacts.cwiseAbs().maxCoeff() <= 1e-9);

    const std::vector<AudioSignal> ests = {est};
    const auto out = bss_eval(refs, ests, {}, BssEvalConfig{4, 1000, 1000});
    CHECK(out[0].rank_deficient);
}

TEST_CASE("all-silent references give zero filters") {
    AudioSignal silent(500, 2, 8000);
    std::mt19937_64 rng(51);
    const std::vector<AudioSignal> refs = {silent};
    const AudioSignal est = test::noise(500, 2, rng, 0.5, 8000);
    const ProjectionFilters p = compute_projection(refs, est, 0, 8);
    for (double v : p.joint) CHECK(v == 0.0);
    const auto frames = metrics_from_decomposition(decompose(est, refs, 0, p), 500, 500);
    CHECK(frames[0].sdr.status == ScoreStatus::neg_inf);
    CHECK(frames[0].sar.status == ScoreStatus::neg_inf);
}

TEST_CASE("input validation") {
    std::mt19937_64 rng(52);
    const auto refs = random_refs(2, 100, 2, rng);
    const AudioSignal shorter = test::noise(90, 2, rng, 1.0, 8000);
    const std::vector<AudioSignal> bad = {shorter};
    CHECK_THROWS_AS(bss_eval(refs, bad, {}, BssEvalConfig{8, 50, 50}), ShapeError);
    const std::vector<AudioSignal> ok = {refs[0]};
    CHECK_THROWS_AS(bss_eval(refs, ok, {}, BssEvalConfig{8, 200, 200}), ConfigError);
    CHECK_THROWS_AS(bss_eval(refs, ok, {}, BssEvalConfig{200, 50, 50}), ConfigError);
    CHECK_THROWS_AS(bss_eval(refs, ok, {}, BssEvalConfig{0, 50, 50}), ConfigError);
    const std::vector<std::size_t> out_of_range = {5};
    CHECK_THROWS_AS(bss_eval(refs, ok, out_of_range, BssEvalConfig{8, 50, 50}), ShapeError);
    CHECK_THROWS_AS(bss_eval(std::span<const AudioSignal>{}, ok, {}, BssEvalConfig{8, 50, 50}), ShapeError);
    CHECK(parse_filter_mode("v4") == FilterMode::global);
    CHECK(parse_filter_mode("v3") == FilterMode::windowed);
    CHECK_THROWS_AS(parse_filter_mode("v5"), ConfigError);
}
