#include "sepeval/dataset.hpp"

#include "sepeval/error.hpp"
#include "sepeval/log.hpp"

#include <json.hpp>

#include <algorithm>

namespace sepeval {

namespace fs = std::filesystem;

std::string_view split_name(Split s) { return s == Split::train ? "train" : "test"; }

std::vector<TrackRef> Corpus::all() const {
    std::vector<TrackRef> out = train;
    out.insert(out.end(), test.begin(), test.end());
    return out;
}

namespace {

constexpr std::array<std::string_view, 5> kTrackFiles = {"mixture", "vocals", "drums", "bass", "other"};

// Returns an empty string when the folder is a valid track, else the reason.
std::string inspect_track(const fs::path& dir, TrackRef& ref) {
    WavInfo first;
    for (std::size_t k = 0; k < kTrackFiles.size(); ++k) {
        const fs::path file = dir / (std::string(kTrackFiles[k]) + ".wav");
        if (!fs::is_regular_file(file)) return "missing " + file.filename().string();
        WavInfo info;
        try {
            info = read_wav_info(file);
        } catch (const Error& e) {
            return e.what();
        }
        if (k == 0) {
            first = info;
        } else if (info.frames != first.frames || info.channels != first.channels ||
                   info.sample_rate != first.sample_rate) {
            return file.filename().string() + " differs from mixture.wav in length, channels or rate";
        }
    }
    ref.frames = first.frames;
    ref.sample_rate = first.sample_rate;
    ref.channels = first.channels;
    ref.duration = static_cast<double>(first.frames) / first.sample_rate;
    return {};
}

std::vector<TrackRef> scan_split(const fs::path& root, Split split, std::vector<SkippedTrack>& skipped) {
    std::vector<TrackRef> tracks;
    const fs::path dir = root / split_name(split);
    if (!fs::is_directory(dir)) return tracks;
    std::vector<fs::path> folders;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) folders.push_back(entry.path());
    std::sort(folders.begin(), folders.end());
    for (const auto& folder : folders) {
        TrackRef ref;
        ref.name = folder.filename().string();
        ref.split = split;
        ref.path = folder;
        if (std::string reason = inspect_track(folder, ref); !reason.empty()) {
            log::warn("skipping track '" + ref.name + "': " + reason);
            skipped.push_back({folder, std::move(reason)});
            continue;
        }
        tracks.push_back(std::move(ref));
    }
    return tracks;
}

}  // namespace

Corpus scan_corpus(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError(root.string() + ": corpus root does not exist");
    Corpus corpus;
    corpus.root = root;
    corpus.train = scan_split(root, Split::train, corpus.skipped);
    corpus.test = scan_split(root, Split::test, corpus.skipped);
    if (corpus.size() == 0) throw IoError(root.string() + ": no valid tracks under train/ or test/");
    return corpus;
}

Track load_track(const TrackRef& ref) {
    Track track;
    track.mixture = load_wav(ref.path / "mixture.wav");
    for (auto stem : kStemNames) {
        const std::string name(stem);
        AudioSignal s = load_wav(ref.path / (name + ".wav"));
        if (s.length() != track.mixture.length() || s.channels() != track.mixture.channels() ||
            s.sample_rate != track.mixture.sample_rate)
            throw ShapeError(ref.name + ": stem '" + name + "' differs from the mixture in length, channels or rate");
        track.stems.push_back(std::move(s));
        track.stem_names.push_back(name);
    }
    return track;
}

AudioSignal accompaniment(const Track& track) {
    AudioSignal out(track.mixture.length(), track.mixture.channels(), track.mixture.sample_rate);
    for (std::size_t k = 0; k < track.stems.size(); ++k)
        if (track.stem_names[k] != "vocals") out.samples += track.stems[k].samples;
    return out;
}

MixtureReport validate_mixture(const Track& track, const std::string& name, double tolerance) {
    Eigen::MatrixXd residual = track.mixture.samples;
    for (const auto& s : track.stems) residual -= s.samples;
    MixtureReport r;
    r.track = name;
    r.tolerance = tolerance;
    r.max_abs_deviation = residual.size() ? residual.cwiseAbs().maxCoeff() : 0.0;
    r.passed = r.max_abs_deviation <= tolerance;
    return r;
}

MixtureReport validate_mixture(const TrackRef& ref, double tolerance) {
    return validate_mixture(load_track(ref), ref.name, tolerance);
}

std::string corpus_manifest(const Corpus& corpus) {
    nlohmann::json j;
    j["root"] = corpus.root.string();
    j["tracks"] = nlohmann::json::array();
    for (const auto& t : corpus.all())
        j["tracks"].push_back({{"name", t.name},
                               {"split", split_name(t.split)},
                               {"duration", t.duration},
                               {"sample_rate", t.sample_rate},
                               {"channels", t.channels}});
    j["skipped"] = nlohmann::json::array();
    for (const auto& s : corpus.skipped) j["skipped"].push_back({{"path", s.path.string()}, {"reason", s.reason}});
    return j.dump(2) + "\n";
}

}  // namespace sepeval
