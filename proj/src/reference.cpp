#include "sepeval/reference.hpp"

#include "sepeval/error.hpp"

#include <Eigen/LU>

#include <cmath>

namespace sepeval::reference {

namespace {

double power_of(const cplx& z, double exponent) { return std::pow(std::abs(z), exponent); }

ScalarMask shaped_like(const SourceImages& sources) {
    sources.validate();
    const auto& ref = sources.images.front();
    ScalarMask m;
    m.sources = sources.sources();
    m.bins = ref.bins();
    m.frames = ref.frames();
    m.channels = ref.channels();
    m.values.assign(m.sources * m.plane(), 0.0);
    return m;
}

}  // namespace

ScalarMask ibm_mask(const SourceImages& sources, int order) {
    if (order != 1 && order != 2) throw ConfigError("IBM order must be 1 or 2");
    ScalarMask m = shaped_like(sources);
    for (std::size_t i = 0; i < m.channels; ++i)
        for (std::size_t t = 0; t < m.frames; ++t)
            for (std::size_t f = 0; f < m.bins; ++f) {
                double total = 0.0;
                for (std::size_t j = 0; j < m.sources; ++j) total += power_of(sources.images[j](f, t, i), order);
                for (std::size_t j = 0; j < m.sources; ++j) {
                    const double p = power_of(sources.images[j](f, t, i), order);
                    m.at(j, f, t, i) = (total > 0.0 && 2.0 * p >= total) ? 1.0 : 0.0;
                }
            }
    return m;
}

ScalarMask irm_mask(const SourceImages& sources, double alpha) {
    if (!(alpha > 0.0)) throw ConfigError("IRM exponent must be positive");
    ScalarMask m = shaped_like(sources);
    for (std::size_t i = 0; i < m.channels; ++i)
        for (std::size_t t = 0; t < m.frames; ++t)
            for (std::size_t f = 0; f < m.bins; ++f) {
                double total = 0.0;
                for (std::size_t j = 0; j < m.sources; ++j) total += power_of(sources.images[j](f, t, i), alpha);
                for (std::size_t j = 0; j < m.sources; ++j)
                    m.at(j, f, t, i) = total > 0.0 ? power_of(sources.images[j](f, t, i), alpha) / total
                                                   : 1.0 / static_cast<double>(m.sources);
            }
    return m;
}

MatrixMask mwf_mask(const SpatialModel& model, const MwfOptions& options) {
    MatrixMask m;
    m.sources = model.sources;
    m.bins = model.bins;
    m.frames = model.frames;
    m.channels = model.channels;
    m.values.assign(m.sources * m.bins * m.frames * m.channels * m.channels, cplx{});
    const auto dim = static_cast<Eigen::Index>(model.channels);
    for (std::size_t t = 0; t < model.frames; ++t)
        for (std::size_t f = 0; f < model.bins; ++f) {
            Eigen::MatrixXcd cx = Eigen::MatrixXcd::Zero(dim, dim);
            for (std::size_t j = 0; j < model.sources; ++j) cx += model.v(j, f, t) * Eigen::MatrixXcd(model.R(j, f));
            const double trace = cx.trace().real();
            if (!(trace > 0.0)) continue;
            cx.diagonal().array() += options.loading_scale * std::max(1.0, trace / static_cast<double>(dim));
            const Eigen::MatrixXcd inv = cx.fullPivLu().inverse();
            for (std::size_t j = 0; j < model.sources; ++j)
                m.at(j, f, t) = model.v(j, f, t) * Eigen::MatrixXcd(model.R(j, f)) * inv;
        }
    return m;
}

namespace {

// sum_n x[n] y[n + d] over the valid overlap.
double lagged_product(const double* x, const double* y, std::ptrdiff_t n, std::ptrdiff_t d) {
    double acc = 0.0;
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, -d); k < n && k + d < n; ++k) acc += x[k] * y[k + d];
    return acc;
}

const double* channel(const AudioSignal& s, std::size_t c) { return s.samples.col(static_cast<Eigen::Index>(c)).data(); }

}  // namespace

Eigen::MatrixXd gram_matrix(std::span<const AudioSignal> references, std::size_t filter_len) {
    const std::size_t I = static_cast<std::size_t>(references[0].channels());
    const std::size_t A = references.size() * I;
    const auto n = static_cast<std::ptrdiff_t>(references[0].length());
    const std::size_t L = filter_len;
    Eigen::MatrixXd g(static_cast<Eigen::Index>(A * L), static_cast<Eigen::Index>(A * L));
    for (std::size_t a = 0; a < A; ++a)
        for (std::size_t b = 0; b < A; ++b) {
            const double* x = channel(references[a / I], a % I);
            const double* y = channel(references[b / I], b % I);
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t m = 0; m < L; ++m)
                    g(static_cast<Eigen::Index>(a * L + l), static_cast<Eigen::Index>(b * L + m)) =
                        lagged_product(x, y, n, static_cast<std::ptrdiff_t>(l) - static_cast<std::ptrdiff_t>(m));
        }
    return g;
}

Eigen::MatrixXd cross_correlations(std::span<const AudioSignal> references, const AudioSignal& estimate,
                                   std::size_t filter_len) {
    const std::size_t I = static_cast<std::size_t>(references[0].channels());
    const std::size_t A = references.size() * I;
    const auto n = static_cast<std::ptrdiff_t>(references[0].length());
    const std::size_t L = filter_len;
    Eigen::MatrixXd d(static_cast<Eigen::Index>(A * L), estimate.channels());
    for (std::size_t a = 0; a < A; ++a)
        for (Eigen::Index c = 0; c < estimate.channels(); ++c)
            for (std::size_t l = 0; l < L; ++l)
                d(static_cast<Eigen::Index>(a * L + l), c) =
                    lagged_product(channel(references[a / I], a % I), estimate.samples.col(c).data(), n,
                                   static_cast<std::ptrdiff_t>(l));
    return d;
}

Eigen::MatrixXd project(std::span<const AudioSignal> references, const ProjectionFilters& filters, bool joint) {
    const std::size_t I = filters.channels;
    const std::size_t L = filters.filter_len;
    const std::size_t N = static_cast<std::size_t>(references[0].length());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N + L - 1), static_cast<Eigen::Index>(I));
    const std::size_t first = joint ? 0 : filters.target;
    const std::size_t last = joint ? filters.references : filters.target + 1;
    for (std::size_t j = first; j < last; ++j)
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t c = 0; c < I; ++c) {
                const double* x = channel(references[j], i);
                for (std::size_t l = 0; l < L; ++l) {
                    const double h = joint ? filters.joint_tap(j, i, c, l) : filters.target_tap(i, c, l);
                    for (std::size_t k = 0; k < N; ++k) out(static_cast<Eigen::Index>(k + l), static_cast<Eigen::Index>(c)) += h * x[k];
                }
            }
    return out;
}

Eigen::MatrixXd framewise_energies(const Decomposition& d, std::size_t window, std::size_t hop) {
    const std::size_t count = window_count(static_cast<std::size_t>(d.target.rows()), window, hop);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(count), 8);
    for (std::size_t w = 0; w < count; ++w) {
        const auto r = static_cast<Eigen::Index>(w);
        for (std::size_t k = w * hop; k < w * hop + window; ++k) {
            for (Eigen::Index c = 0; c < d.target.cols(); ++c) {
                const auto n = static_cast<Eigen::Index>(k);
                const double s = d.target(n, c), es = d.spatial(n, c), ei = d.interference(n, c),
                             ea = d.artifacts(n, c);
                e(r, 0) += s * s;
                e(r, 1) += (s + es) * (s + es);
                e(r, 2) += (s + es + ei) * (s + es + ei);
                e(r, 3) += es * es;
                e(r, 4) += ei * ei;
                e(r, 5) += ea * ea;
                e(r, 6) += (es + ei + ea) * (es + ei + ea);
                e(r, 7) += (s + es + ei + ea) * (s + es + ei + ea);
            }
        }
    }
    return e;
}

}  // namespace sepeval::reference
