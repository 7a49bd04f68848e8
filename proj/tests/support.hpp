#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls into the FFT or normal-equation paths it is used to check.

#include "sepeval/audio.hpp"
#include "sepeval/bss_eval.hpp"
#include "sepeval/dataset.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace sepeval::test {

inline AudioSignal noise(Eigen::Index n, Eigen::Index channels, std::mt19937_64& rng, double amplitude = 0.25,
                         int rate = 44100) {
    std::normal_distribution<double> dist(0.0, amplitude);
    AudioSignal s(n, channels, rate);
    for (Eigen::Index c = 0; c < channels; ++c)
        for (Eigen::Index k = 0; k < n; ++k) s.samples(k, c) = dist(rng);
    return s;
}

/// Noise shaped by a one-pole low-pass and a slow amplitude envelope, so
/// sources are dense but spectrally and temporally distinct.
inline AudioSignal colored_noise(Eigen::Index n, Eigen::Index channels, std::mt19937_64& rng, double pole,
                                 double envelope_hz, int rate) {
    AudioSignal s = noise(n, channels, rng, 0.1, rate);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (Eigen::Index c = 0; c < channels; ++c) {
        double state = 0.0;
        const double ph = phase(rng);
        for (Eigen::Index k = 0; k < n; ++k) {
            state = pole * state + (1.0 - pole) * s.samples(k, c);
            const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * envelope_hz * k / rate + ph);
            s.samples(k, c) = state * env * 4.0;
        }
    }
    return s;
}

inline AudioSignal sum(const std::vector<AudioSignal>& parts) {
    AudioSignal out = parts.front();
    for (std::size_t k = 1; k < parts.size(); ++k) out.samples += parts[k].samples;
    return out;
}

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("sepeval-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Writes one track folder. Stems are snapped to the 16-bit grid so that the
/// float32 mixture is exactly their sum.
inline void write_track(const std::filesystem::path& dir, const std::vector<AudioSignal>& stems) {
    std::filesystem::create_directories(dir);
    std::vector<AudioSignal> stored = stems;
    for (auto& s : stored) s.samples = (s.samples * 32768.0).array().round() / 32768.0;
    const AudioSignal mix = sum(stored);
    for (std::size_t k = 0; k < kStemNames.size(); ++k)
        save_wav(dir / (std::string(kStemNames[k]) + ".wav"), stored[k]);
    save_wav(dir / "mixture.wav", mix);
}

/// Two-track corpus: one train, one test, `seconds` long at `rate`.
inline void write_fixture_corpus(const std::filesystem::path& root, double seconds = 2.0, int rate = 8000,
                                 unsigned seed = 7) {
    std::mt19937_64 rng(seed);
    const auto n = static_cast<Eigen::Index>(seconds * rate);
    for (const char* where : {"train/Alpha Track", "test/Beta Track"}) {
        std::vector<AudioSignal> stems;
        const double poles[] = {0.2, 0.9, 0.98, 0.6};
        for (double pole : poles) stems.push_back(colored_noise(n, 2, rng, pole, 0.7, rate));
        write_track(root / where, stems);
    }
}

/// Explicit convolution matrix: column (a, l) holds channel a of the stacked
/// references delayed by l, over the full length N + L - 1.
inline Eigen::MatrixXd convolution_matrix(const std::vector<AudioSignal>& refs, std::size_t first,
                                          std::size_t count, std::size_t L) {
    const auto N = refs[0].length();
    const auto I = refs[0].channels();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N + static_cast<Eigen::Index>(L) - 1,
                                              static_cast<Eigen::Index>(count * I * L));
    for (std::size_t j = 0; j < count; ++j)
        for (Eigen::Index i = 0; i < I; ++i)
            for (std::size_t l = 0; l < L; ++l) {
                const auto col = static_cast<Eigen::Index>((j * I + i) * L + l);
                A.block(static_cast<Eigen::Index>(l), col, N, 1) = refs[first + j].samples.col(i);
            }
    return A;
}

struct DenseProjection {
    Eigen::MatrixXd joint_taps;   // (J I L) x I
    Eigen::MatrixXd target_taps;  // (I L) x I
    Eigen::MatrixXd joint;        // (N + L - 1) x I
    Eigen::MatrixXd own;          // (N + L - 1) x I
};

/// Least squares by Householder QR on the explicit convolution matrix.
inline DenseProjection dense_projection(const std::vector<AudioSignal>& refs, const AudioSignal& estimate,
                                        std::size_t target, std::size_t L) {
    const auto N = estimate.length();
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(N + static_cast<Eigen::Index>(L) - 1, estimate.channels());
    padded.topRows(N) = estimate.samples;
    DenseProjection p;
    const Eigen::MatrixXd A_all = convolution_matrix(refs, 0, refs.size(), L);
    const Eigen::MatrixXd A_own = convolution_matrix(refs, target, 1, L);
    p.joint_taps = A_all.colPivHouseholderQr().solve(padded);
    p.target_taps = A_own.colPivHouseholderQr().solve(padded);
    p.joint = A_all * p.joint_taps;
    p.own = A_own * p.target_taps;
    return p;
}

/// Metric values (dB, +/-inf or NaN) computed straight from the definitions.
struct DirectMetrics {
    double sdr, isr, sir, sar;
};

inline double db_ratio(double num, double den) {
    if (den == 0.0 && num == 0.0) return std::nan("");
    if (den == 0.0) return INFINITY;
    if (num == 0.0) return -INFINITY;
    return 10.0 * std::log10(num / den);
}

inline DirectMetrics dense_metrics(const std::vector<AudioSignal>& refs, const AudioSignal& estimate,
                                   std::size_t target, std::size_t L) {
    const DenseProjection p = dense_projection(refs, estimate, target, L);
    const auto N = estimate.length();
    const Eigen::MatrixXd s = refs[target].samples;
    const Eigen::MatrixXd e_spat = p.own.topRows(N) - s;
    const Eigen::MatrixXd e_interf = p.joint.topRows(N) - p.own.topRows(N);
    const Eigen::MatrixXd e_artif = estimate.samples - p.joint.topRows(N);
    return {db_ratio(s.squaredNorm(), (e_spat + e_interf + e_artif).squaredNorm()),
            db_ratio(s.squaredNorm(), e_spat.squaredNorm()),
            db_ratio((s + e_spat).squaredNorm(), e_interf.squaredNorm()),
            db_ratio((s + e_spat + e_interf).squaredNorm(), e_artif.squaredNorm())};
}

/// Direct O(N^2) DFT of one real frame, bins 0..N/2.
inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::complex<double> acc{};
        for (std::size_t m = 0; m < n; ++m)
            acc += x[m] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * m % n) / n);
        out[k] = acc;
    }
    return out;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace sepeval::test
