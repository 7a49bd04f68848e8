#include "sepeval/masks.hpp"

#include "sepeval/error.hpp"
#include "sepeval/log.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace sepeval {

namespace {

using MatrixXcdR = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double abs_pow(const cplx& z, double exponent) {
    if (exponent == 2.0) return std::norm(z);
    if (exponent == 1.0) return std::abs(z);
    return std::pow(std::abs(z), exponent);
}

void require_matching(const SourceImages& sources, const Spectrogram& mixture) {
    sources.validate();
    if (!sources.images.front().same_shape(mixture))
        throw ShapeError("source images and mixture spectrogram differ in shape");
}

// Visits every (f, t, i) bin, handing `rule` the per-source powers and a gain
// buffer to fill. Parallel over (channel, frame) rows; each bin is
// independent so the result does not depend on the thread count.
template <class Rule, class Emit>
void for_each_scalar_gain(const SourceImages& sources, double exponent, Rule rule, Emit emit) {
    const auto& ref = sources.images.front();
    const std::size_t J = sources.sources();
    const std::size_t F = ref.bins();
    const auto rows = static_cast<std::ptrdiff_t>(ref.frames() * ref.channels());

#pragma omp parallel
    {
        std::vector<double> power(J), gain(J);
#pragma omp for schedule(static)
        for (std::ptrdiff_t row = 0; row < rows; ++row) {
            const std::size_t base = static_cast<std::size_t>(row) * F;
            for (std::size_t f = 0; f < F; ++f) {
                double total = 0.0;
                for (std::size_t j = 0; j < J; ++j) {
                    power[j] = abs_pow(sources.images[j].data()[base + f], exponent);
                    total += power[j];
                }
                rule(power, total, gain);
                for (std::size_t j = 0; j < J; ++j) emit(j, base + f, gain[j]);
            }
        }
    }
}

auto binary_rule() {
    return [](const std::vector<double>& power, double total, std::vector<double>& gain) {
        for (std::size_t j = 0; j < power.size(); ++j)
            gain[j] = (total > 0.0 && power[j] >= 0.5 * total) ? 1.0 : 0.0;
    };
}

auto ratio_rule() {
    return [](const std::vector<double>& power, double total, std::vector<double>& gain) {
        const double uniform = 1.0 / static_cast<double>(power.size());
        for (std::size_t j = 0; j < power.size(); ++j) gain[j] = total > 0.0 ? power[j] / total : uniform;
    };
}

ScalarMask empty_mask(const SourceImages& sources) {
    const auto& ref = sources.images.front();
    ScalarMask mask;
    mask.sources = sources.sources();
    mask.bins = ref.bins();
    mask.frames = ref.frames();
    mask.channels = ref.channels();
    mask.values.assign(mask.sources * mask.plane(), 0.0);
    return mask;
}

template <class Rule>
std::vector<Spectrogram> scalar_separate(const SourceImages& sources, const Spectrogram& mixture, double exponent,
                                         Rule rule) {
    require_matching(sources, mixture);
    std::vector<Spectrogram> out(sources.sources(), mixture);
    const auto x = mixture.data();
    for_each_scalar_gain(sources, exponent, rule,
                         [&](std::size_t j, std::size_t idx, double g) { out[j].data()[idx] = g * x[idx]; });
    return out;
}

void check_order(int order) {
    if (order != 1 && order != 2) throw ConfigError("IBM order must be 1 or 2, got " + std::to_string(order));
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw ConfigError("IRM exponent must be positive, got " + std::to_string(alpha));
}

}  // namespace

void SourceImages::validate() const {
    if (images.empty()) throw ShapeError("at least one source image is required");
    for (std::size_t j = 1; j < images.size(); ++j)
        if (!images[j].same_shape(images.front()))
            throw ShapeError("source image " + std::to_string(j) + " differs in shape from source 0");
}

ScalarMask ibm_mask(const SourceImages& sources, int order) {
    check_order(order);
    sources.validate();
    ScalarMask mask = empty_mask(sources);
    const std::size_t plane = mask.plane();
    for_each_scalar_gain(sources, order, binary_rule(),
                         [&](std::size_t j, std::size_t idx, double g) { mask.values[j * plane + idx] = g; });
    return mask;
}

ScalarMask irm_mask(const SourceImages& sources, double alpha) {
    check_alpha(alpha);
    sources.validate();
    ScalarMask mask = empty_mask(sources);
    const std::size_t plane = mask.plane();
    for_each_scalar_gain(sources, alpha, ratio_rule(),
                         [&](std::size_t j, std::size_t idx, double g) { mask.values[j * plane + idx] = g; });
    return mask;
}

std::vector<Spectrogram> ibm_separate(const SourceImages& sources, const Spectrogram& mixture, int order) {
    check_order(order);
    return scalar_separate(sources, mixture, order, binary_rule());
}

std::vector<Spectrogram> irm_separate(const SourceImages& sources, const Spectrogram& mixture, double alpha) {
    check_alpha(alpha);
    return scalar_separate(sources, mixture, alpha, ratio_rule());
}

SpatialModel estimate_mwf_model(const SourceImages& sources, int iterations) {
    sources.validate();
    if (iterations < 0) throw ConfigError("MWF iterations must be non-negative");
    const auto& ref = sources.images.front();
    SpatialModel model;
    model.sources = sources.sources();
    model.bins = ref.bins();
    model.frames = ref.frames();
    model.channels = ref.channels();
    if (model.frames == 0) throw ShapeError("MWF estimation needs at least one frame");

    const std::size_t J = model.sources, F = model.bins, T = model.frames, I = model.channels;
    const auto dim = static_cast<Eigen::Index>(I);
    model.psd.assign(J * F * T, 0.0);
    model.spatial_cov.assign(J * F * I * I, cplx{});
    std::vector<char> active(J * F, 0);

    const auto jobs = static_cast<std::ptrdiff_t>(J * F);
#pragma omp parallel
    {
        Eigen::VectorXcd y(dim);
        MatrixXcdR acc(dim, dim);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(dim);
        Eigen::MatrixXcd pinv(dim, dim);
#pragma omp for schedule(static)
        for (std::ptrdiff_t job = 0; job < jobs; ++job) {
            const std::size_t j = static_cast<std::size_t>(job) / F;
            const std::size_t f = static_cast<std::size_t>(job) % F;
            const Spectrogram& img = sources.images[j];
            auto load = [&](std::size_t t) {
                for (std::size_t i = 0; i < I; ++i) y(static_cast<Eigen::Index>(i)) = img(f, t, i);
            };

            for (std::size_t t = 0; t < T; ++t) {
                load(t);
                model.v(j, f, t) = y.squaredNorm() / static_cast<double>(I);
            }

            auto R = model.R(j, f);
            bool silent = false;
            const int rounds = std::max(iterations, 1);
            for (int round = 0; round < rounds && !silent; ++round) {
                acc.setZero();
                double weight = 0.0;
                for (std::size_t t = 0; t < T; ++t) {
                    load(t);
                    acc.noalias() += y * y.adjoint();
                    weight += model.v(j, f, t);
                }
                if (weight <= 0.0) {
                    silent = true;
                    break;
                }
                R = acc / weight;
                if (round >= iterations) break;

                // Pseudo-inverse: spatially rank-deficient sources (e.g. identical
                // channels) leave R singular but y stays in its range.
                eig.compute(Eigen::MatrixXcd(R));
                const auto& lambda = eig.eigenvalues();
                const double floor = 1e-12 * std::max(lambda.maxCoeff(), 0.0);
                pinv.setZero();
                for (Eigen::Index k = 0; k < dim; ++k)
                    if (lambda(k) > floor)
                        pinv.noalias() += eig.eigenvectors().col(k) * (1.0 / lambda(k)) *
                                          eig.eigenvectors().col(k).adjoint();
                for (std::size_t t = 0; t < T; ++t) {
                    load(t);
                    model.v(j, f, t) = std::max(0.0, (y.adjoint() * pinv * y)(0).real()) / static_cast<double>(I);
                }
            }

            if (silent) {
                R.setIdentity();
                for (std::size_t t = 0; t < T; ++t) model.v(j, f, t) = 0.0;
                continue;
            }
            // Hermitian symmetrization removes rounding asymmetry from the accumulation.
            R = (0.5 * (R + R.adjoint())).eval();
            const double scale = R.trace().real() / static_cast<double>(I);
            R /= scale;
            for (std::size_t t = 0; t < T; ++t) model.v(j, f, t) *= scale;
            active[j * F + f] = 1;
        }
    }

    model.degenerate.assign(J, true);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t f = 0; f < F; ++f)
            if (active[j * F + f]) model.degenerate[j] = false;
        if (model.degenerate[j]) {
            const std::string label = j < sources.labels.size() ? sources.labels[j] : std::to_string(j);
            log::warn("MWF: source '" + label + "' is silent; using identity spatial covariance");
        }
    }
    return model;
}

namespace {

// Per-bin MWF work shared by mwf_mask and mwf_separate.
class MwfBin {
public:
    MwfBin(const SpatialModel& model, const MwfOptions& options)
        : model_(model), options_(options), dim_(static_cast<Eigen::Index>(model.channels)), cx_(dim_, dim_) {}

    // Factorizes C_x + eps I at (f, t). Returns false when the bin is silent.
    bool factor(std::size_t f, std::size_t t) {
        cx_.setZero();
        for (std::size_t j = 0; j < model_.sources; ++j) cx_ += model_.v(j, f, t) * model_.R(j, f);
        const double trace = cx_.trace().real();
        if (!(trace > 0.0)) return false;
        const double eps = options_.loading_scale * std::max(1.0, trace / static_cast<double>(dim_));
        cx_.diagonal().array() += eps;
        ldlt_.compute(cx_);
        return true;
    }

    const Eigen::LDLT<Eigen::MatrixXcd>& solver() const { return ldlt_; }

private:
    const SpatialModel& model_;
    const MwfOptions& options_;
    Eigen::Index dim_;
    Eigen::MatrixXcd cx_;
    Eigen::LDLT<Eigen::MatrixXcd> ldlt_;
};

void require_model_shape(const SpatialModel& model, const Spectrogram& mixture) {
    if (model.bins != mixture.bins() || model.frames != mixture.frames() || model.channels != mixture.channels())
        throw ShapeError("spatial model and mixture differ in shape");
}

}  // namespace

MatrixMask mwf_mask(const SpatialModel& model, const MwfOptions& options) {
    MatrixMask mask;
    mask.sources = model.sources;
    mask.bins = model.bins;
    mask.frames = model.frames;
    mask.channels = model.channels;
    mask.values.assign(mask.sources * mask.bins * mask.frames * mask.channels * mask.channels, cplx{});
    const auto dim = static_cast<Eigen::Index>(model.channels);
    const auto frames = static_cast<std::ptrdiff_t>(model.frames);

#pragma omp parallel
    {
        MwfBin bin(model, options);
        Eigen::MatrixXcd inverse(dim, dim);
        const Eigen::MatrixXcd identity = Eigen::MatrixXcd::Identity(dim, dim);
#pragma omp for schedule(static)
        for (std::ptrdiff_t tt = 0; tt < frames; ++tt) {
            const auto t = static_cast<std::size_t>(tt);
            for (std::size_t f = 0; f < model.bins; ++f) {
                if (!bin.factor(f, t)) continue;
                inverse = bin.solver().solve(identity);
                for (std::size_t j = 0; j < model.sources; ++j)
                    mask.at(j, f, t) = model.v(j, f, t) * (model.R(j, f) * inverse);
            }
        }
    }
    return mask;
}

std::vector<Spectrogram> mwf_separate(const SpatialModel& model, const Spectrogram& mixture,
                                      const MwfOptions& options) {
    require_model_shape(model, mixture);
    std::vector<Spectrogram> out(model.sources, mixture);
    for (auto& s : out) std::fill(s.data().begin(), s.data().end(), cplx{});
    const std::size_t I = model.channels;
    const auto dim = static_cast<Eigen::Index>(I);
    const auto frames = static_cast<std::ptrdiff_t>(model.frames);

#pragma omp parallel
    {
        MwfBin bin(model, options);
        Eigen::VectorXcd x(dim), z(dim), y(dim);
#pragma omp for schedule(static)
        for (std::ptrdiff_t tt = 0; tt < frames; ++tt) {
            const auto t = static_cast<std::size_t>(tt);
            for (std::size_t f = 0; f < model.bins; ++f) {
                if (!bin.factor(f, t)) continue;
                for (std::size_t i = 0; i < I; ++i) x(static_cast<Eigen::Index>(i)) = mixture(f, t, i);
                z = bin.solver().solve(x);
                for (std::size_t j = 0; j < model.sources; ++j) {
                    y.noalias() = model.R(j, f) * z;
                    y *= model.v(j, f, t);
                    for (std::size_t i = 0; i < I; ++i) out[j](f, t, i) = y(static_cast<Eigen::Index>(i));
                }
            }
        }
    }
    return out;
}

Spectrogram apply_mask(const ScalarMask& mask, const Spectrogram& mixture, std::size_t j) {
    if (mask.bins != mixture.bins() || mask.frames != mixture.frames() || mask.channels != mixture.channels())
        throw ShapeError("scalar mask and mixture differ in shape");
    if (j >= mask.sources) throw ShapeError("mask has no source " + std::to_string(j));
    Spectrogram out = mixture;
    const double* g = mask.values.data() + j * mask.plane();
    auto y = out.data();
    const auto n = static_cast<std::ptrdiff_t>(y.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) y[k] *= g[k];
    return out;
}

Spectrogram apply_mask(const MatrixMask& mask, const Spectrogram& mixture, std::size_t j) {
    if (mask.bins != mixture.bins() || mask.frames != mixture.frames() || mask.channels != mixture.channels())
        throw ShapeError("matrix mask and mixture differ in shape");
    if (j >= mask.sources) throw ShapeError("mask has no source " + std::to_string(j));
    Spectrogram out = mixture;
    const std::size_t I = mask.channels;
    const auto dim = static_cast<Eigen::Index>(I);
    const auto frames = static_cast<std::ptrdiff_t>(mask.frames);
#pragma omp parallel
    {
        Eigen::VectorXcd x(dim), y(dim);
#pragma omp for schedule(static)
        for (std::ptrdiff_t tt = 0; tt < frames; ++tt) {
            const auto t = static_cast<std::size_t>(tt);
            for (std::size_t f = 0; f < mask.bins; ++f) {
                for (std::size_t i = 0; i < I; ++i) x(static_cast<Eigen::Index>(i)) = mixture(f, t, i);
                y.noalias() = mask.at(j, f, t) * x;
                for (std::size_t i = 0; i < I; ++i) out(f, t, i) = y(static_cast<Eigen::Index>(i));
            }
        }
    }
    return out;
}

}  // namespace sepeval
