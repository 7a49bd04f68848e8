#pragma once

#include "sepeval/audio.hpp"
#include "sepeval/fft.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace sepeval {

enum class WindowKind { hann, sqrt_hann, rectangular };

WindowKind parse_window(std::string_view name);

struct StftConfig {
    std::size_t window_size = 4096;
    std::size_t hop_size = 1024;
    WindowKind window = WindowKind::hann;

    std::size_t bins() const { return window_size / 2 + 1; }
    /// Throws ConfigError unless 0 < hop <= window and the squared window
    /// overlap-adds to a constant at this hop.
    void validate() const;
};

/// Periodic analysis window of the configured kind.
std::vector<double> make_window(WindowKind kind, std::size_t size);

/// One-sided complex STFT of every channel, F x T x I.
/// Storage is channel-major, then frame, then frequency, so each frame of
/// each channel is a contiguous run of F bins.
class Spectrogram {
public:
    Spectrogram() = default;
    Spectrogram(std::size_t bins, std::size_t frames, std::size_t channels, StftConfig config,
                std::size_t original_length, int sample_rate);

    std::size_t bins() const { return bins_; }
    std::size_t frames() const { return frames_; }
    std::size_t channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    const StftConfig& config() const { return config_; }
    std::size_t original_length() const { return original_length_; }
    int sample_rate() const { return sample_rate_; }

    std::size_t index(std::size_t f, std::size_t t, std::size_t i) const { return (i * frames_ + t) * bins_ + f; }
    cplx& operator()(std::size_t f, std::size_t t, std::size_t i) { return data_[index(f, t, i)]; }
    const cplx& operator()(std::size_t f, std::size_t t, std::size_t i) const { return data_[index(f, t, i)]; }

    std::span<cplx> frame(std::size_t t, std::size_t i) { return {data_.data() + index(0, t, i), bins_}; }
    std::span<const cplx> frame(std::size_t t, std::size_t i) const { return {data_.data() + index(0, t, i), bins_}; }

    std::span<cplx> data() { return data_; }
    std::span<const cplx> data() const { return data_; }

    bool same_shape(const Spectrogram& other) const {
        return bins_ == other.bins_ && frames_ == other.frames_ && channels_ == other.channels_;
    }

private:
    std::size_t bins_ = 0, frames_ = 0, channels_ = 0;
    StftConfig config_;
    std::size_t original_length_ = 0;
    int sample_rate_ = 0;
    AlignedVector<cplx> data_;
};

/// Number of frames used for a signal of `length` samples: the signal is
/// preceded by window - hop zeros and followed by enough zeros that every
/// original sample is covered by window / hop frames.
std::size_t frame_count(std::size_t length, const StftConfig& config);

Spectrogram stft(const AudioSignal& signal, const StftConfig& config = {});

/// Weighted overlap-add inverse. The result is trimmed to `original_length`
/// samples (defaults to the length recorded in the spectrogram).
AudioSignal istft(const Spectrogram& spec, std::size_t original_length = 0);

/// Two-sided energy sum_k |X_k|^2 reconstructed from the one-sided bins.
double spectral_energy(const Spectrogram& spec);

}  // namespace sepeval
