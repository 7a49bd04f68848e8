#pragma once

#include "sepeval/stft.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sepeval {

/// True source images y_j, all with the mixture's F x T x I shape.
struct SourceImages {
    std::vector<Spectrogram> images;
    std::vector<std::string> labels;

    std::size_t sources() const { return images.size(); }
    /// Throws ShapeError if empty or if shapes differ.
    void validate() const;
};

/// Real gain per source, channel and TF bin (IBM, IRM).
/// Index layout is source-major followed by the Spectrogram layout.
struct ScalarMask {
    std::size_t sources = 0, bins = 0, frames = 0, channels = 0;
    AlignedVector<double> values;

    std::size_t plane() const { return bins * frames * channels; }
    double& at(std::size_t j, std::size_t f, std::size_t t, std::size_t i) {
        return values[j * plane() + (i * frames + t) * bins + f];
    }
    double at(std::size_t j, std::size_t f, std::size_t t, std::size_t i) const {
        return values[j * plane() + (i * frames + t) * bins + f];
    }
};

/// I x I complex gain per source and TF bin (MWF), row-major per bin.
struct MatrixMask {
    std::size_t sources = 0, bins = 0, frames = 0, channels = 0;
    AlignedVector<cplx> values;

    std::size_t offset(std::size_t j, std::size_t f, std::size_t t) const {
        return ((j * frames + t) * bins + f) * channels * channels;
    }
    Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> at(std::size_t j,
                                                                                              std::size_t f,
                                                                                              std::size_t t) const {
        return {values.data() + offset(j, f, t), static_cast<Eigen::Index>(channels),
                static_cast<Eigen::Index>(channels)};
    }
    Eigen::Map<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> at(std::size_t j, std::size_t f,
                                                                                        std::size_t t) {
        return {values.data() + offset(j, f, t), static_cast<Eigen::Index>(channels),
                static_cast<Eigen::Index>(channels)};
    }
};

/// Local Gaussian model: C_j(f,t) = v_j(f,t) R_j(f).
struct SpatialModel {
    std::size_t sources = 0, bins = 0, frames = 0, channels = 0;
    /// v_j(f,t), indexed (j * frames + t) * bins + f.
    AlignedVector<double> psd;
    /// R_j(f), row-major I x I blocks indexed by (j * bins + f).
    AlignedVector<cplx> spatial_cov;
    /// Sources that were entirely silent (R_j = identity, v_j = 0).
    std::vector<bool> degenerate;

    double v(std::size_t j, std::size_t f, std::size_t t) const { return psd[(j * frames + t) * bins + f]; }
    double& v(std::size_t j, std::size_t f, std::size_t t) { return psd[(j * frames + t) * bins + f]; }

    Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> R(std::size_t j,
                                                                                             std::size_t f) const {
        return {spatial_cov.data() + (j * bins + f) * channels * channels, static_cast<Eigen::Index>(channels),
                static_cast<Eigen::Index>(channels)};
    }
    Eigen::Map<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> R(std::size_t j,
                                                                                       std::size_t f) {
        return {spatial_cov.data() + (j * bins + f) * channels * channels, static_cast<Eigen::Index>(channels),
                static_cast<Eigen::Index>(channels)};
    }
};

/// Binary mask: 1 where |y_ij|^order is at least half the sum over sources,
/// inclusive, so exact ties select every tying source. Bins where every
/// source is zero get 0 for all sources. `order` must be 1 or 2.
ScalarMask ibm_mask(const SourceImages& sources, int order);

/// Ratio mask |y_ij|^alpha / sum_j' |y_ij'|^alpha; 1/J where the sum is zero.
ScalarMask irm_mask(const SourceImages& sources, double alpha);

/// Alternating estimate of v_j and R_j from the true images.
/// Initialization v = ||y||^2 / I, then `iterations` rounds of
///   R_j(f) = sum_t y y^H / sum_t v_j(f,t),
///   v_j(f,t) = tr(R_j(f)^-1 y y^H) / I,
/// and finally tr(R_j(f)) = I with the scale moved into v_j.
SpatialModel estimate_mwf_model(const SourceImages& sources, int iterations = 2);

/// Diagonal loading used by the MWF inverse: 1e-10 * max(1, tr(C_x) / I).
/// `loading_scale` replaces the 1e-10 factor; 0 disables loading.
struct MwfOptions {
    double loading_scale = 1e-10;
};

/// M_j = C_j (C_x + eps I)^-1 for every source and bin.
MatrixMask mwf_mask(const SpatialModel& model, const MwfOptions& options = {});

/// Source image estimate M_j x: elementwise for scalar masks, per-bin matrix
/// product for matrix masks.
Spectrogram apply_mask(const ScalarMask& mask, const Spectrogram& mixture, std::size_t j);
Spectrogram apply_mask(const MatrixMask& mask, const Spectrogram& mixture, std::size_t j);

/// Fused MWF: all source estimates without materializing the J x F x T x I x I
/// mask. Matches apply_mask(mwf_mask(model), mixture, j) for every j.
std::vector<Spectrogram> mwf_separate(const SpatialModel& model, const Spectrogram& mixture,
                                      const MwfOptions& options = {});

/// Scalar-mask separation of every source without storing the mask.
std::vector<Spectrogram> ibm_separate(const SourceImages& sources, const Spectrogram& mixture, int order);
std::vector<Spectrogram> irm_separate(const SourceImages& sources, const Spectrogram& mixture, double alpha);

}  // namespace sepeval
