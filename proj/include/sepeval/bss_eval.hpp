#pragma once

#include "sepeval/audio.hpp"
#include "sepeval/fft.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace sepeval {

enum class FilterMode {
    global,    ///< one distortion filter set for the whole track (v4)
    windowed,  ///< filters re-estimated in every evaluation window (v3)
};

FilterMode parse_filter_mode(std::string_view name);

/// Least-squares FIR distortion filters mapping reference channels onto the
/// channels of one estimate. Two scopes are kept: filters over the target's
/// own channels only, and filters over every reference channel jointly.
struct ProjectionFilters {
    FilterMode mode = FilterMode::global;
    std::size_t target = 0;
    std::size_t references = 0;     ///< J
    std::size_t channels = 0;       ///< I, shared by references and estimate
    std::size_t filter_len = 0;     ///< L
    std::size_t window_start = 0;   ///< first sample of the segment the filters were fit on
    /// Joint taps, index ((a * I + c) * L + l) with a = j * I + i the reference channel.
    std::vector<double> joint;
    /// Target-only taps, index ((i * I + c) * L + l).
    std::vector<double> target_only;
    /// Set when a Gram matrix had to be solved with the minimum-norm fallback.
    bool rank_deficient = false;

    double joint_tap(std::size_t j, std::size_t i, std::size_t c, std::size_t l) const {
        return joint[(((j * channels + i) * channels) + c) * filter_len + l];
    }
    double target_tap(std::size_t i, std::size_t c, std::size_t l) const {
        return target_only[((i * channels) + c) * filter_len + l];
    }
};

/// Four-way split of an estimate; all members are length x I and satisfy
/// target + spatial + interference + artifacts == estimate.
struct Decomposition {
    Eigen::MatrixXd target;        ///< s_target: the true target image
    Eigen::MatrixXd spatial;       ///< e_spatial = P_target(estimate) - s_target
    Eigen::MatrixXd interference;  ///< e_interf = P_all(estimate) - P_target(estimate)
    Eigen::MatrixXd artifacts;     ///< e_artif = estimate - P_all(estimate)
};

enum class ScoreStatus { finite, pos_inf, neg_inf, undefined };

struct Score {
    double value = 0.0;  ///< dB; meaningful only when status == finite
    ScoreStatus status = ScoreStatus::undefined;

    bool finite() const { return status == ScoreStatus::finite; }
    /// value as a double with +/-inf and NaN for the non-finite states.
    double as_double() const;
};

/// Equal status, and equal value when finite.
inline bool operator==(const Score& a, const Score& b) {
    return a.status == b.status && (a.status != ScoreStatus::finite || a.value == b.value);
}

struct FrameScores {
    Score sdr, isr, sir, sar;
    std::size_t window_start = 0;
    std::size_t window_len = 0;
};

struct BssEvalConfig {
    std::size_t filter_len = 512;
    std::size_t window = 44100;
    std::size_t hop = 44100;
    FilterMode mode = FilterMode::global;
    /// Energies at or below this fraction of max(|s_target|^2, |estimate|^2)
    /// in a window count as exactly zero when forming ratios, as do energies
    /// at the rounding level of the decomposition.
    double zero_energy_ratio = 1e-20;
};

/// Precomputed reference spectra and factorized Gram matrices for one set of
/// reference signals (or one segment of them). Reusable across any number of
/// estimates; all methods are const and thread-safe.
class ReferenceSet {
public:
    /// References must share length, channel count and rate; L <= length.
    ReferenceSet(std::span<const AudioSignal> references, std::size_t filter_len);
    ~ReferenceSet();
    ReferenceSet(ReferenceSet&&) noexcept;
    ReferenceSet& operator=(ReferenceSet&&) noexcept;

    std::size_t references() const;
    std::size_t channels() const;
    std::size_t length() const;
    std::size_t filter_len() const;

    /// The joint Gram matrix (J I L square, block Toeplitz).
    const Eigen::MatrixXd& gram() const;

    ProjectionFilters fit(const AudioSignal& estimate, std::size_t target) const;

    enum class Scope { target, joint };
    /// Filtered sum of references, full convolution length (length + L - 1) x I.
    Eigen::MatrixXd project(const ProjectionFilters& filters, Scope scope) const;

    Decomposition decompose(const AudioSignal& estimate, const ProjectionFilters& filters) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Filters for one estimate against one set of references over the full signal.
ProjectionFilters compute_projection(std::span<const AudioSignal> references, const AudioSignal& estimate,
                                     std::size_t target, std::size_t filter_len);

/// One filter set per evaluation window; window_start records each segment.
std::vector<ProjectionFilters> compute_windowed_projections(std::span<const AudioSignal> references,
                                                            const AudioSignal& estimate, std::size_t target,
                                                            std::size_t filter_len, std::size_t window,
                                                            std::size_t hop);

Decomposition decompose(const AudioSignal& estimate, std::span<const AudioSignal> references, std::size_t target,
                        const ProjectionFilters& filters);

/// Number of full evaluation windows; partial trailing windows are dropped.
/// Throws ConfigError when window is 0 or exceeds the length.
std::size_t window_count(std::size_t length, std::size_t window, std::size_t hop);

/// SDR/ISR/SIR/SAR for every window, energies summed over channels.
std::vector<FrameScores> metrics_from_decomposition(const Decomposition& d, std::size_t window, std::size_t hop,
                                                    double zero_energy_ratio = 1e-20);

/// Scores of one estimate against its declared target.
struct EstimateScores {
    std::size_t target = 0;
    std::vector<FrameScores> frames;
    bool rank_deficient = false;
};

/// Evaluates estimates[k] against references[targets[k]] (targets empty means
/// targets[k] == k). All signals must share length, channels and rate.
std::vector<EstimateScores> bss_eval(std::span<const AudioSignal> references, std::span<const AudioSignal> estimates,
                                     std::span<const std::size_t> targets, const BssEvalConfig& config = {});

/// Energies per window: rows are windows, columns are
/// |s|^2, |s+e_spat|^2, |s+e_spat+e_interf|^2, |e_spat|^2, |e_interf|^2,
/// |e_artif|^2, |e_spat+e_interf+e_artif|^2, |estimate|^2.
Eigen::MatrixXd framewise_energies(const Decomposition& d, std::size_t window, std::size_t hop);

/// Scores from one row of framewise_energies.
FrameScores scores_from_energies(const Eigen::Ref<const Eigen::RowVectorXd>& energies, double zero_energy_ratio);

/// FFT-based correlation kernels behind ReferenceSet, exposed for testing and
/// benchmarking against the direct time-domain versions in `reference`.
Eigen::MatrixXd gram_matrix(std::span<const AudioSignal> references, std::size_t filter_len);
Eigen::MatrixXd cross_correlations(std::span<const AudioSignal> references, const AudioSignal& estimate,
                                   std::size_t filter_len);

}  // namespace sepeval
