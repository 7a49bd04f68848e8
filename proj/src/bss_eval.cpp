#include "sepeval/bss_eval.hpp"

#include "sepeval/error.hpp"
#include "sepeval/log.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace sepeval {

FilterMode parse_filter_mode(std::string_view name) {
    if (name == "v4" || name == "global" || name == "v4_global") return FilterMode::global;
    if (name == "v3" || name == "windowed" || name == "v3_windowed") return FilterMode::windowed;
    throw ConfigError("unknown evaluation mode '" + std::string(name) + "' (expected v4 or v3)");
}

double Score::as_double() const {
    switch (status) {
        case ScoreStatus::finite: return value;
        case ScoreStatus::pos_inf: return std::numeric_limits<double>::infinity();
        case ScoreStatus::neg_inf: return -std::numeric_limits<double>::infinity();
        case ScoreStatus::undefined: break;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

namespace {

void check_signals(std::span<const AudioSignal> references, std::size_t filter_len) {
    if (references.empty()) throw ShapeError("bss_eval: at least one reference is required");
    for (std::size_t j = 1; j < references.size(); ++j)
        require_same_shape(references[0], references[j], "bss_eval references");
    if (references[0].channels() == 0) throw ShapeError("bss_eval: references have no channels");
    if (filter_len == 0) throw ConfigError("distortion filter length must be at least 1");
    if (filter_len > static_cast<std::size_t>(references[0].length()))
        throw ConfigError("distortion filter length " + std::to_string(filter_len) + " exceeds signal length " +
                          std::to_string(references[0].length()));
}

// Solves G x = d for a symmetric positive semi-definite Gram matrix: Cholesky
// with diagonal loading 1e-12 * trace / size plus one refinement step against
// the unloaded G, falling back to the minimum-norm least-squares solution.
class GramSolver {
public:
    explicit GramSolver(Eigen::MatrixXd gram) : gram_(std::move(gram)) {
        const double trace = gram_.trace();
        if (!(trace > 0.0)) {
            silent_ = true;
            return;
        }
        const double loading = 1e-12 * trace / static_cast<double>(gram_.rows());
        Eigen::MatrixXd loaded = gram_;
        loaded.diagonal().array() += loading;
        llt_.compute(loaded);
        // On an exactly singular G the loaded factorization still succeeds, but
        // its smallest squared pivot collapses to the loading itself.
        bool singular = llt_.info() != Eigen::Success;
        if (!singular) {
            const double pivot = llt_.matrixLLT().diagonal().minCoeff();
            singular = pivot * pivot <= 8.0 * loading;
        }
        if (singular) {
            rank_deficient_ = true;
            cod_.emplace(gram_);
        }
    }

    bool rank_deficient() const { return rank_deficient_; }
    const Eigen::MatrixXd& gram() const { return gram_; }

    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
        if (silent_) return Eigen::MatrixXd::Zero(gram_.rows(), rhs.cols());
        if (cod_) return cod_->solve(rhs);
        Eigen::MatrixXd x = llt_.solve(rhs);
        const Eigen::MatrixXd residual = rhs - gram_ * x;
        x += llt_.solve(residual);
        return x;
    }

private:
    Eigen::MatrixXd gram_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    std::optional<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>> cod_;
    bool silent_ = false;
    bool rank_deficient_ = false;
};

// Spectra of every channel of every signal, zero-padded to a common FFT size.
struct Spectra {
    std::size_t nfft = 0;
    std::vector<std::vector<cplx>> channels;  // index j * I + i
};

Spectra channel_spectra(std::span<const AudioSignal> signals, const RealFft& fft) {
    const std::size_t I = static_cast<std::size_t>(signals[0].channels());
    const std::size_t n = static_cast<std::size_t>(signals[0].length());
    Spectra s;
    s.nfft = fft.size();
    s.channels.assign(signals.size() * I, std::vector<cplx>(fft.bins()));
    const auto total = static_cast<std::ptrdiff_t>(s.channels.size());
#pragma omp parallel
    {
        std::vector<double> buffer(fft.size(), 0.0);
#pragma omp for schedule(static)
        for (std::ptrdiff_t a = 0; a < total; ++a) {
            const auto& sig = signals[static_cast<std::size_t>(a) / I];
            const auto col = static_cast<Eigen::Index>(static_cast<std::size_t>(a) % I);
            std::fill(buffer.begin(), buffer.end(), 0.0);
            std::copy_n(sig.samples.col(col).data(), n, buffer.begin());
            fft.forward(buffer, s.channels[a]);
        }
    }
    return s;
}

// Real circular correlation sum_n a[n] b[n + d] for d in [-(L-1), L-1],
// returned with index d + L - 1.
void correlate(const std::vector<cplx>& a, const std::vector<cplx>& b, const RealFft& fft, std::size_t filter_len,
               std::vector<cplx>& product, std::vector<double>& time, std::vector<double>& out) {
    for (std::size_t k = 0; k < product.size(); ++k) product[k] = std::conj(a[k]) * b[k];
    fft.inverse(product, time);
    const double scale = 1.0 / static_cast<double>(fft.size());
    const auto L = static_cast<std::ptrdiff_t>(filter_len);
    const auto n = static_cast<std::ptrdiff_t>(fft.size());
    out.resize(2 * filter_len - 1);
    for (std::ptrdiff_t d = -(L - 1); d < L; ++d) out[static_cast<std::size_t>(d + L - 1)] = time[(d + n) % n] * scale;
}

Eigen::MatrixXd build_gram(const Spectra& spectra, const RealFft& fft, std::size_t filter_len) {
    const std::size_t A = spectra.channels.size();
    const std::size_t L = filter_len;
    Eigen::MatrixXd gram(static_cast<Eigen::Index>(A * L), static_cast<Eigen::Index>(A * L));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < A; ++a)
        for (std::size_t b = a; b < A; ++b) pairs.emplace_back(a, b);
    const auto total = static_cast<std::ptrdiff_t>(pairs.size());

#pragma omp parallel
    {
        std::vector<cplx> product(fft.bins());
        std::vector<double> time(fft.size()), rho;
#pragma omp for schedule(dynamic)
        for (std::ptrdiff_t p = 0; p < total; ++p) {
            const auto [a, b] = pairs[static_cast<std::size_t>(p)];
            correlate(spectra.channels[a], spectra.channels[b], fft, L, product, time, rho);
            // G[(a,l),(b,m)] = sum_n ref_a[n - l] ref_b[n - m] = rho_ab(l - m)
            for (std::size_t l = 0; l < L; ++l) {
                for (std::size_t m = 0; m < L; ++m) {
                    const double v = rho[l + L - 1 - m];
                    gram(static_cast<Eigen::Index>(a * L + l), static_cast<Eigen::Index>(b * L + m)) = v;
                    gram(static_cast<Eigen::Index>(b * L + m), static_cast<Eigen::Index>(a * L + l)) = v;
                }
            }
        }
    }
    return gram;
}

// D[(a,l), c] = sum_n ref_a[n - l] est_c[n].
Eigen::MatrixXd build_cross(const Spectra& refs, const Spectra& est, const RealFft& fft, std::size_t filter_len) {
    const std::size_t A = refs.channels.size();
    const std::size_t C = est.channels.size();
    const std::size_t L = filter_len;
    Eigen::MatrixXd cross(static_cast<Eigen::Index>(A * L), static_cast<Eigen::Index>(C));
    const auto total = static_cast<std::ptrdiff_t>(A * C);
#pragma omp parallel
    {
        std::vector<cplx> product(fft.bins());
        std::vector<double> time(fft.size()), rho;
#pragma omp for schedule(static)
        for (std::ptrdiff_t p = 0; p < total; ++p) {
            const std::size_t a = static_cast<std::size_t>(p) / C;
            const std::size_t c = static_cast<std::size_t>(p) % C;
            correlate(refs.channels[a], est.channels[c], fft, L, product, time, rho);
            for (std::size_t l = 0; l < L; ++l)
                cross(static_cast<Eigen::Index>(a * L + l), static_cast<Eigen::Index>(c)) = rho[l + L - 1];
        }
    }
    return cross;
}

}  // namespace

struct ReferenceSet::Impl {
    std::size_t J = 0, I = 0, N = 0, L = 0;
    int sample_rate = 0;
    RealFft fft;
    std::vector<Eigen::MatrixXd> signals;
    Spectra spectra;
    std::optional<GramSolver> joint;
    std::vector<GramSolver> per_target;

    Impl(std::span<const AudioSignal> references, std::size_t filter_len)
        : J(references.size()),
          I(static_cast<std::size_t>(references[0].channels())),
          N(static_cast<std::size_t>(references[0].length())),
          L(filter_len),
          sample_rate(references[0].sample_rate),
          fft(next_fast_length(N + filter_len - 1)) {
        for (const auto& r : references) signals.push_back(r.samples);
        spectra = channel_spectra(references, fft);
        Eigen::MatrixXd gram = build_gram(spectra, fft, L);
        const auto block = static_cast<Eigen::Index>(I * L);
        per_target.reserve(J);
        for (std::size_t j = 0; j < J; ++j) {
            const auto start = static_cast<Eigen::Index>(j) * block;
            per_target.emplace_back(gram.block(start, start, block, block));
        }
        joint.emplace(std::move(gram));
    }
};

ReferenceSet::ReferenceSet(std::span<const AudioSignal> references, std::size_t filter_len) {
    check_signals(references, filter_len);
    impl_ = std::make_unique<Impl>(references, filter_len);
}

ReferenceSet::~ReferenceSet() = default;
ReferenceSet::ReferenceSet(ReferenceSet&&) noexcept = default;
ReferenceSet& ReferenceSet::operator=(ReferenceSet&&) noexcept = default;

std::size_t ReferenceSet::references() const { return impl_->J; }
std::size_t ReferenceSet::channels() const { return impl_->I; }
std::size_t ReferenceSet::length() const { return impl_->N; }
std::size_t ReferenceSet::filter_len() const { return impl_->L; }
const Eigen::MatrixXd& ReferenceSet::gram() const { return impl_->joint->gram(); }

ProjectionFilters ReferenceSet::fit(const AudioSignal& estimate, std::size_t target) const {
    const Impl& s = *impl_;
    if (target >= s.J) throw ShapeError("target index " + std::to_string(target) + " out of range");
    if (static_cast<std::size_t>(estimate.length()) != s.N || static_cast<std::size_t>(estimate.channels()) != s.I)
        throw ShapeError("estimate shape differs from references (" + std::to_string(estimate.length()) + "x" +
                         std::to_string(estimate.channels()) + " vs " + std::to_string(s.N) + "x" +
                         std::to_string(s.I) + ")");

    const AudioSignal* est = &estimate;
    const Spectra est_spectra = channel_spectra(std::span(est, 1), s.fft);
    const Eigen::MatrixXd cross = build_cross(s.spectra, est_spectra, s.fft, s.L);
    const auto block = static_cast<Eigen::Index>(s.I * s.L);

    const Eigen::MatrixXd joint = s.joint->solve(cross);
    const Eigen::MatrixXd own = s.per_target[target].solve(cross.middleRows(static_cast<Eigen::Index>(target) * block, block));

    ProjectionFilters p;
    p.mode = FilterMode::global;
    p.target = target;
    p.references = s.J;
    p.channels = s.I;
    p.filter_len = s.L;
    p.rank_deficient = s.joint->rank_deficient() || s.per_target[target].rank_deficient();
    p.joint.resize(s.J * s.I * s.I * s.L);
    p.target_only.resize(s.I * s.I * s.L);
    for (std::size_t a = 0; a < s.J * s.I; ++a)
        for (std::size_t c = 0; c < s.I; ++c)
            for (std::size_t l = 0; l < s.L; ++l)
                p.joint[(a * s.I + c) * s.L + l] =
                    joint(static_cast<Eigen::Index>(a * s.L + l), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < s.I; ++i)
        for (std::size_t c = 0; c < s.I; ++c)
            for (std::size_t l = 0; l < s.L; ++l)
                p.target_only[(i * s.I + c) * s.L + l] =
                    own(static_cast<Eigen::Index>(i * s.L + l), static_cast<Eigen::Index>(c));
    return p;
}

Eigen::MatrixXd ReferenceSet::project(const ProjectionFilters& filters, Scope scope) const {
    const Impl& s = *impl_;
    if (filters.references != s.J || filters.channels != s.I || filters.filter_len != s.L)
        throw ShapeError("projection filters do not match this reference set");
    const std::size_t out_len = s.N + s.L - 1;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(out_len), static_cast<Eigen::Index>(s.I));
    const auto channels = static_cast<std::ptrdiff_t>(s.I);

#pragma omp parallel
    {
        std::vector<double> taps(s.fft.size()), time(s.fft.size());
        std::vector<cplx> h(s.fft.bins()), acc(s.fft.bins());
#pragma omp for schedule(static)
        for (std::ptrdiff_t cc = 0; cc < channels; ++cc) {
            const auto c = static_cast<std::size_t>(cc);
            std::fill(acc.begin(), acc.end(), cplx{});
            const std::size_t first = scope == Scope::joint ? 0 : filters.target * s.I;
            const std::size_t count = scope == Scope::joint ? s.J * s.I : s.I;
            for (std::size_t k = 0; k < count; ++k) {
                const std::size_t a = first + k;
                std::fill(taps.begin(), taps.end(), 0.0);
                for (std::size_t l = 0; l < s.L; ++l)
                    taps[l] = scope == Scope::joint ? filters.joint[(a * s.I + c) * s.L + l]
                                                    : filters.target_only[(k * s.I + c) * s.L + l];
                s.fft.forward(taps, h);
                const auto& ref = s.spectra.channels[a];
                for (std::size_t f = 0; f < acc.size(); ++f) acc[f] += h[f] * ref[f];
            }
            s.fft.inverse(acc, time);
            const double scale = 1.0 / static_cast<double>(s.fft.size());
            for (std::size_t n = 0; n < out_len; ++n) out(static_cast<Eigen::Index>(n), cc) = time[n] * scale;
        }
    }
    return out;
}

Decomposition ReferenceSet::decompose(const AudioSignal& estimate, const ProjectionFilters& filters) const {
    const Impl& s = *impl_;
    if (filters.target >= s.J) throw ShapeError("projection filters reference a missing target");
    if (static_cast<std::size_t>(estimate.length()) != s.N || static_cast<std::size_t>(estimate.channels()) != s.I)
        throw ShapeError("estimate shape differs from references");
    const auto n = static_cast<Eigen::Index>(s.N);
    const Eigen::MatrixXd own = project(filters, Scope::target).topRows(n);
    const Eigen::MatrixXd all = project(filters, Scope::joint).topRows(n);

    Decomposition d;
    d.target = s.signals[filters.target];
    d.spatial = own - d.target;
    d.interference = all - own;
    d.artifacts = estimate.samples - all;
    return d;
}

ProjectionFilters compute_projection(std::span<const AudioSignal> references, const AudioSignal& estimate,
                                     std::size_t target, std::size_t filter_len) {
    return ReferenceSet(references, filter_len).fit(estimate, target);
}

namespace {

AudioSignal segment(const AudioSignal& s, std::size_t start, std::size_t len) {
    return {s.samples.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)), s.sample_rate};
}

std::vector<AudioSignal> segments(std::span<const AudioSignal> signals, std::size_t start, std::size_t len) {
    std::vector<AudioSignal> out;
    out.reserve(signals.size());
    for (const auto& s : signals) out.push_back(segment(s, start, len));
    return out;
}

}  // namespace

std::vector<ProjectionFilters> compute_windowed_projections(std::span<const AudioSignal> references,
                                                            const AudioSignal& estimate, std::size_t target,
                                                            std::size_t filter_len, std::size_t window,
                                                            std::size_t hop) {
    check_signals(references, filter_len);
    require_same_shape(references[0], estimate, "bss_eval estimate");
    const std::size_t count = window_count(static_cast<std::size_t>(estimate.length()), window, hop);
    std::vector<ProjectionFilters> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const auto refs = segments(references, w * hop, window);
        ProjectionFilters p = ReferenceSet(refs, filter_len).fit(segment(estimate, w * hop, window), target);
        p.mode = FilterMode::windowed;
        p.window_start = w * hop;
        out.push_back(std::move(p));
    }
    return out;
}

Decomposition decompose(const AudioSignal& estimate, std::span<const AudioSignal> references, std::size_t target,
                        const ProjectionFilters& filters) {
    if (filters.target != target) throw ShapeError("decompose: filters were fit for a different target");
    return ReferenceSet(references, filters.filter_len).decompose(estimate, filters);
}

std::size_t window_count(std::size_t length, std::size_t window, std::size_t hop) {
    if (window == 0 || hop == 0) throw ConfigError("evaluation window and hop must be positive");
    if (window > length)
        throw ConfigError("evaluation window (" + std::to_string(window) + " samples) is larger than the signal (" +
                          std::to_string(length) + " samples)");
    return (length - window) / hop + 1;
}

Eigen::MatrixXd framewise_energies(const Decomposition& d, std::size_t window, std::size_t hop) {
    const std::size_t length = static_cast<std::size_t>(d.target.rows());
    const std::size_t count = window_count(length, window, hop);
    Eigen::MatrixXd energies(static_cast<Eigen::Index>(count), 8);
    const auto total = static_cast<std::ptrdiff_t>(count);
    const auto len = static_cast<Eigen::Index>(window);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t w = 0; w < total; ++w) {
        const auto start = static_cast<Eigen::Index>(static_cast<std::size_t>(w) * hop);
        const auto s = d.target.middleRows(start, len);
        const auto es = d.spatial.middleRows(start, len);
        const auto ei = d.interference.middleRows(start, len);
        const auto ea = d.artifacts.middleRows(start, len);
        energies(w, 0) = s.squaredNorm();
        energies(w, 1) = (s + es).squaredNorm();
        energies(w, 2) = (s + es + ei).squaredNorm();
        energies(w, 3) = es.squaredNorm();
        energies(w, 4) = ei.squaredNorm();
        energies(w, 5) = ea.squaredNorm();
        energies(w, 6) = (es + ei + ea).squaredNorm();
        energies(w, 7) = (s + es + ei + ea).squaredNorm();
    }
    return energies;
}

namespace {

Score ratio_db(double num, double den, double floor) {
    const bool num_zero = num <= floor;
    const bool den_zero = den <= floor;
    if (num_zero && den_zero) return {0.0, ScoreStatus::undefined};
    if (den_zero) return {0.0, ScoreStatus::pos_inf};
    if (num_zero) return {0.0, ScoreStatus::neg_inf};
    return {10.0 * std::log10(num / den), ScoreStatus::finite};
}

}  // namespace

FrameScores scores_from_energies(const Eigen::Ref<const Eigen::RowVectorXd>& e, double zero_energy_ratio) {
    // e(7) is rebuilt from the components, which can cancel to rounding
    // residue; anything at that level counts as zero too.
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double rounding = 16.0 * eps * eps * (e(0) + e(3) + e(4) + e(5));
    const double scale = std::max(e(0), e(7));
    // With nothing in the window every ratio is 0/0, including exact zeros.
    const double floor = scale > rounding ? std::max(zero_energy_ratio * scale, rounding)
                                          : std::numeric_limits<double>::infinity();
    FrameScores f;
    f.sdr = ratio_db(e(0), e(6), floor);
    f.isr = ratio_db(e(0), e(3), floor);
    f.sir = ratio_db(e(1), e(4), floor);
    f.sar = ratio_db(e(2), e(5), floor);
    return f;
}

std::vector<FrameScores> metrics_from_decomposition(const Decomposition& d, std::size_t window, std::size_t hop,
                                                    double zero_energy_ratio) {
    const Eigen::MatrixXd energies = framewise_energies(d, window, hop);
    std::vector<FrameScores> out(static_cast<std::size_t>(energies.rows()));
    for (Eigen::Index w = 0; w < energies.rows(); ++w) {
        out[w] = scores_from_energies(energies.row(w), zero_energy_ratio);
        out[w].window_start = static_cast<std::size_t>(w) * hop;
        out[w].window_len = window;
    }
    return out;
}

std::vector<EstimateScores> bss_eval(std::span<const AudioSignal> references, std::span<const AudioSignal> estimates,
                                     std::span<const std::size_t> targets, const BssEvalConfig& config) {
    check_signals(references, config.filter_len);
    if (!targets.empty() && targets.size() != estimates.size())
        throw ShapeError("bss_eval: one target index per estimate is required");
    for (const auto& e : estimates) require_same_shape(references[0], e, "bss_eval estimate");
    const std::size_t length = static_cast<std::size_t>(references[0].length());
    const std::size_t count = window_count(length, config.window, config.hop);

    std::vector<EstimateScores> out(estimates.size());
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        out[k].target = targets.empty() ? k : targets[k];
        if (out[k].target >= references.size())
            throw ShapeError("bss_eval: target index " + std::to_string(out[k].target) + " out of range");
    }

    if (config.mode == FilterMode::global) {
        const ReferenceSet set(references, config.filter_len);
        for (std::size_t k = 0; k < estimates.size(); ++k) {
            const ProjectionFilters p = set.fit(estimates[k], out[k].target);
            out[k].rank_deficient = p.rank_deficient;
            out[k].frames = metrics_from_decomposition(set.decompose(estimates[k], p), config.window, config.hop,
                                                       config.zero_energy_ratio);
        }
    } else {
        for (auto& e : out) e.frames.resize(count);
        for (std::size_t w = 0; w < count; ++w) {
            const std::size_t start = w * config.hop;
            const auto refs = segments(references, start, config.window);
            const ReferenceSet set(refs, config.filter_len);
            for (std::size_t k = 0; k < estimates.size(); ++k) {
                const AudioSignal est = segment(estimates[k], start, config.window);
                const ProjectionFilters p = set.fit(est, out[k].target);
                out[k].rank_deficient = out[k].rank_deficient || p.rank_deficient;
                const auto scores = metrics_from_decomposition(set.decompose(est, p), config.window, config.window,
                                                               config.zero_energy_ratio);
                out[k].frames[w] = scores.front();
                out[k].frames[w].window_start = start;
            }
        }
    }
    for (const auto& e : out)
        if (e.rank_deficient)
            log::warn("bss_eval: singular Gram matrix for target " + std::to_string(e.target) +
                      "; used minimum-norm filters");
    return out;
}

Eigen::MatrixXd gram_matrix(std::span<const AudioSignal> references, std::size_t filter_len) {
    check_signals(references, filter_len);
    const RealFft fft(next_fast_length(static_cast<std::size_t>(references[0].length()) + filter_len - 1));
    return build_gram(channel_spectra(references, fft), fft, filter_len);
}

Eigen::MatrixXd cross_correlations(std::span<const AudioSignal> references, const AudioSignal& estimate,
                                   std::size_t filter_len) {
    check_signals(references, filter_len);
    require_same_shape(references[0], estimate, "cross_correlations");
    const RealFft fft(next_fast_length(static_cast<std::size_t>(references[0].length()) + filter_len - 1));
    const AudioSignal* est = &estimate;
    return build_cross(channel_spectra(references, fft), channel_spectra(std::span(est, 1), fft), fft, filter_len);
}

}  // namespace sepeval
