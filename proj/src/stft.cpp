#include "sepeval/stft.hpp"

#include "sepeval/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace sepeval {

WindowKind parse_window(std::string_view name) {
    if (name == "hann") return WindowKind::hann;
    if (name == "sqrt_hann") return WindowKind::sqrt_hann;
    if (name == "rectangular" || name == "rect") return WindowKind::rectangular;
    throw ConfigError("unknown window '" + std::string(name) + "'");
}

std::vector<double> make_window(WindowKind kind, std::size_t size) {
    std::vector<double> w(size, 1.0);
    if (kind == WindowKind::rectangular) return w;
    for (std::size_t n = 0; n < size; ++n) {
        const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / size);
        w[n] = kind == WindowKind::hann ? hann : std::sqrt(hann);
    }
    return w;
}

namespace {

// Sum of squared windows over all frames overlapping position n, one hop period.
std::vector<double> overlap_envelope(const std::vector<double>& w, std::size_t hop) {
    std::vector<double> env(hop, 0.0);
    for (std::size_t n = 0; n < w.size(); ++n) env[n % hop] += w[n] * w[n];
    return env;
}

}  // namespace

void StftConfig::validate() const {
    if (window_size < 2) throw ConfigError("STFT window must have at least 2 samples");
    if (hop_size == 0 || hop_size > window_size)
        throw ConfigError("STFT hop (" + std::to_string(hop_size) + ") must be in [1, window=" +
                          std::to_string(window_size) + "]");
    const auto env = overlap_envelope(make_window(window, window_size), hop_size);
    const auto [lo, hi] = std::minmax_element(env.begin(), env.end());
    if (*lo <= 0.0 || (*hi - *lo) > 1e-10 * *hi)
        throw ConfigError("STFT window does not overlap-add to a constant at hop " + std::to_string(hop_size));
}

Spectrogram::Spectrogram(std::size_t bins, std::size_t frames, std::size_t channels, StftConfig config,
                         std::size_t original_length, int sample_rate)
    : bins_(bins),
      frames_(frames),
      channels_(channels),
      config_(config),
      original_length_(original_length),
      sample_rate_(sample_rate),
      data_(bins * frames * channels) {}

std::size_t frame_count(std::size_t length, const StftConfig& config) {
    const std::size_t lead = config.window_size - config.hop_size;
    return (length + lead + config.hop_size - 1) / config.hop_size;
}

Spectrogram stft(const AudioSignal& signal, const StftConfig& config) {
    config.validate();
    if (signal.length() == 0 || signal.channels() == 0) throw ShapeError("stft: empty signal");

    const std::size_t length = static_cast<std::size_t>(signal.length());
    const std::size_t channels = static_cast<std::size_t>(signal.channels());
    const std::size_t win = config.window_size;
    const std::size_t hop = config.hop_size;
    const std::size_t lead = win - hop;
    const std::size_t frames = frame_count(length, config);

    Spectrogram spec(config.bins(), frames, channels, config, length, signal.sample_rate);
    const RealFft fft(win);
    const auto window = make_window(config.window, win);
    const auto total = static_cast<std::ptrdiff_t>(frames * channels);

#pragma omp parallel
    {
        std::vector<double> buffer(win);
#pragma omp for schedule(static)
        for (std::ptrdiff_t job = 0; job < total; ++job) {
            const std::size_t i = static_cast<std::size_t>(job) / frames;
            const std::size_t t = static_cast<std::size_t>(job) % frames;
            const double* x = signal.samples.col(static_cast<Eigen::Index>(i)).data();
            // Frame t covers padded positions [t*hop, t*hop + win); original
            // sample s sits at padded position s + lead.
            for (std::size_t n = 0; n < win; ++n) {
                const std::size_t p = t * hop + n;
                buffer[n] = (p >= lead && p - lead < length) ? window[n] * x[p - lead] : 0.0;
            }
            fft.forward(buffer, spec.frame(t, i));
        }
    }
    return spec;
}

AudioSignal istft(const Spectrogram& spec, std::size_t original_length) {
    const StftConfig& config = spec.config();
    config.validate();
    if (original_length == 0) original_length = spec.original_length();

    const std::size_t win = config.window_size;
    const std::size_t hop = config.hop_size;
    const std::size_t lead = win - hop;
    const std::size_t frames = spec.frames();
    const std::size_t padded = frames == 0 ? 0 : (frames - 1) * hop + win;
    if (original_length + lead > padded)
        throw ShapeError("istft: spectrogram has too few frames for " + std::to_string(original_length) + " samples");

    const RealFft fft(win);
    const auto window = make_window(config.window, win);
    const auto envelope = overlap_envelope(window, hop);
    const double scale = 1.0 / static_cast<double>(win);

    AudioSignal out(static_cast<Eigen::Index>(original_length), static_cast<Eigen::Index>(spec.channels()),
                    spec.sample_rate());
    const auto channels = static_cast<std::ptrdiff_t>(spec.channels());

#pragma omp parallel
    {
        std::vector<double> frame(win);
        std::vector<double> acc;
#pragma omp for schedule(static)
        for (std::ptrdiff_t ci = 0; ci < channels; ++ci) {
            const auto i = static_cast<std::size_t>(ci);
            acc.assign(padded, 0.0);
            for (std::size_t t = 0; t < frames; ++t) {
                fft.inverse(spec.frame(t, i), frame);
                double* dst = acc.data() + t * hop;
                for (std::size_t n = 0; n < win; ++n) dst[n] += frame[n] * scale * window[n];
            }
            double* y = out.samples.col(ci).data();
            for (std::size_t s = 0; s < original_length; ++s) {
                const std::size_t p = s + lead;
                y[s] = acc[p] / envelope[p % hop];
            }
        }
    }
    return out;
}

double spectral_energy(const Spectrogram& spec) {
    const std::size_t bins = spec.bins();
    const bool has_nyquist = spec.config().window_size % 2 == 0;
    double total = 0.0;
    for (std::size_t i = 0; i < spec.channels(); ++i) {
        for (std::size_t t = 0; t < spec.frames(); ++t) {
            const auto frame = spec.frame(t, i);
            for (std::size_t f = 0; f < bins; ++f) {
                const bool single = f == 0 || (has_nyquist && f == bins - 1);
                total += (single ? 1.0 : 2.0) * std::norm(frame[f]);
            }
        }
    }
    return total;
}

}  // namespace sepeval
