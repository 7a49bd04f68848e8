#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>

namespace sepeval {

/// Multichannel time-domain audio. Rows are samples, columns are channels,
/// so each channel is contiguous in memory.
struct AudioSignal {
    Eigen::MatrixXd samples;
    int sample_rate = 44100;

    AudioSignal() = default;
    AudioSignal(Eigen::Index num_samples, Eigen::Index channels, int rate)
        : samples(Eigen::MatrixXd::Zero(num_samples, channels)), sample_rate(rate) {}
    AudioSignal(Eigen::MatrixXd data, int rate) : samples(std::move(data)), sample_rate(rate) {}

    Eigen::Index length() const { return samples.rows(); }
    Eigen::Index channels() const { return samples.cols(); }
    double duration() const { return static_cast<double>(length()) / sample_rate; }
};

/// Throws ShapeError unless both signals share length, channel count and rate.
void require_same_shape(const AudioSignal& a, const AudioSignal& b, const char* what);

enum class SampleFormat { pcm16, pcm24, float32 };

/// Header-level description of a WAV file.
struct WavInfo {
    int channels = 0;
    int sample_rate = 0;
    std::size_t frames = 0;
    SampleFormat format = SampleFormat::pcm16;
};

// Codec conventions: PCM16 decodes as v / 2^15, PCM24 as v / 2^23, float32 is
// passed through. Encoding rounds to nearest and saturates at the integer
// range, so +1.0 maps to (2^15 - 1) / 2^15.

WavInfo read_wav_info(const std::filesystem::path& path);
AudioSignal load_wav(const std::filesystem::path& path);
void save_wav(const std::filesystem::path& path, const AudioSignal& signal,
              SampleFormat format = SampleFormat::float32);

}  // namespace sepeval
