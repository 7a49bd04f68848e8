#pragma once

#include "sepeval/audio.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sepeval {

enum class Split { train, test };

std::string_view split_name(Split s);

/// Stem names in the order they are returned by load_track.
inline constexpr std::array<std::string_view, 4> kStemNames = {"vocals", "drums", "bass", "other"};

struct TrackRef {
    std::string name;
    Split split = Split::test;
    std::filesystem::path path;
    double duration = 0.0;  ///< seconds
    int sample_rate = 0;
    int channels = 0;
    std::size_t frames = 0;
};

/// A track folder that scan_corpus refused, with the reason.
struct SkippedTrack {
    std::filesystem::path path;
    std::string reason;
};

struct Corpus {
    std::filesystem::path root;
    std::vector<TrackRef> train;
    std::vector<TrackRef> test;
    std::vector<SkippedTrack> skipped;

    std::size_t size() const { return train.size() + test.size(); }
    /// Train tracks followed by test tracks, each split sorted by name.
    std::vector<TrackRef> all() const;
};

/// Enumerates root/{train,test}/<track>/{mixture,vocals,drums,bass,other}.wav.
/// Malformed track folders are skipped (and logged); a missing root or a
/// corpus without any valid track throws IoError.
Corpus scan_corpus(const std::filesystem::path& root);

struct Track {
    AudioSignal mixture;
    /// vocals, drums, bass, other (kStemNames order).
    std::vector<AudioSignal> stems;
    std::vector<std::string> stem_names;
};

/// Loads the five signals; throws ShapeError naming the stem whose shape
/// differs from the mixture.
Track load_track(const TrackRef& ref);

/// Sum of every non-vocal stem.
AudioSignal accompaniment(const Track& track);

struct MixtureReport {
    std::string track;
    double max_abs_deviation = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Compares the mixture against the sum of its stems.
MixtureReport validate_mixture(const TrackRef& ref, double tolerance);
MixtureReport validate_mixture(const Track& track, const std::string& name, double tolerance);

/// JSON manifest: {"root", "tracks": [{name, split, duration, sample_rate, channels}], "skipped": [...]}.
std::string corpus_manifest(const Corpus& corpus);

}  // namespace sepeval
