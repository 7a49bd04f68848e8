#include "sepeval/campaign.hpp"

#include "sepeval/error.hpp"
#include "sepeval/log.hpp"
#include "sepeval/stats.hpp"

#include <json.hpp>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

namespace sepeval {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view metric_name(Metric m) {
    switch (m) {
        case Metric::sdr: return "SDR";
        case Metric::isr: return "ISR";
        case Metric::sir: return "SIR";
        case Metric::sar: return "SAR";
    }
    return "";
}

Metric parse_metric(std::string_view name) {
    for (Metric m : kMetrics)
        if (metric_name(m) == name) return m;
    throw ConfigError("unknown metric '" + std::string(name) + "' (expected SDR, ISR, SIR or SAR)");
}

const Score& FrameRecord::get(Metric m) const {
    switch (m) {
        case Metric::sdr: return sdr;
        case Metric::isr: return isr;
        case Metric::sir: return sir;
        case Metric::sar: return sar;
    }
    return sdr;
}

bool FrameRecord::operator==(const FrameRecord& o) const {
    return time == o.time && duration == o.duration && sdr == o.sdr && isr == o.isr && sir == o.sir && sar == o.sar;
}

namespace {

std::vector<FrameRecord> to_records(const std::vector<FrameScores>& frames, int rate) {
    std::vector<FrameRecord> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        FrameRecord r;
        r.time = static_cast<double>(f.window_start) / rate;
        r.duration = static_cast<double>(f.window_len) / rate;
        r.sdr = f.sdr;
        r.isr = f.isr;
        r.sir = f.sir;
        r.sar = f.sar;
        out.push_back(r);
    }
    return out;
}

BssEvalConfig bss_config(const EvalConfig& config, int rate) {
    BssEvalConfig c;
    c.filter_len = config.filter_len;
    c.window = static_cast<std::size_t>(std::llround(config.window_seconds * rate));
    c.hop = static_cast<std::size_t>(std::llround(config.hop_seconds * rate));
    c.mode = config.mode;
    return c;
}

}  // namespace

TrackScore evaluate_estimates(const Track& track, const std::string& track_name,
                              const std::map<std::string, AudioSignal>& estimates, const std::string& method,
                              const EvalConfig& config) {
    TrackScore score;
    score.track = track_name;
    score.method = method;
    const int rate = track.mixture.sample_rate;
    const BssEvalConfig bss = bss_config(config, rate);
    for (const auto& [name, signal] : estimates) require_same_shape(track.mixture, signal, ("estimate " + name).c_str());

    std::vector<AudioSignal> stem_estimates;
    std::vector<std::size_t> stem_targets;
    for (std::size_t j = 0; j < track.stem_names.size(); ++j) {
        if (auto it = estimates.find(track.stem_names[j]); it != estimates.end()) {
            stem_estimates.push_back(it->second);
            stem_targets.push_back(j);
        }
    }
    if (!stem_estimates.empty()) {
        const auto results = bss_eval(track.stems, stem_estimates, stem_targets, bss);
        for (const auto& r : results) score.targets[track.stem_names[r.target]] = to_records(r.frames, rate);
    }

    if (config.accompaniment) {
        std::optional<AudioSignal> accomp_estimate;
        if (auto it = estimates.find("accompaniment"); it != estimates.end()) {
            accomp_estimate = it->second;
        } else if (estimates.count("drums") && estimates.count("bass") && estimates.count("other")) {
            AudioSignal sum = estimates.at("drums");
            sum.samples += estimates.at("bass").samples + estimates.at("other").samples;
            accomp_estimate = std::move(sum);
        }
        if (accomp_estimate) {
            const auto vocals = std::find(track.stem_names.begin(), track.stem_names.end(), "vocals");
            if (vocals == track.stem_names.end()) throw ShapeError(track_name + ": no vocals stem for accompaniment");
            const std::vector<AudioSignal> refs = {track.stems[vocals - track.stem_names.begin()],
                                                   accompaniment(track)};
            const std::vector<std::size_t> target = {1};
            const auto results = bss_eval(refs, std::span(&*accomp_estimate, 1), target, bss);
            score.targets["accompaniment"] = to_records(results.front().frames, rate);
        }
    }
    return score;
}

TrackScore evaluate_track(const TrackRef& ref, const fs::path& estimates_dir, const std::string& method,
                          const EvalConfig& config) {
    if (!fs::is_directory(estimates_dir)) throw IoError(estimates_dir.string() + ": estimates directory not found");
    const Track track = load_track(ref);
    std::map<std::string, AudioSignal> estimates;
    for (auto target : kTargetNames) {
        const fs::path file = estimates_dir / (std::string(target) + ".wav");
        if (!fs::is_regular_file(file)) {
            if (target != "accompaniment") log::warn(ref.name + ": no estimate for '" + std::string(target) + "'");
            continue;
        }
        estimates.emplace(std::string(target), load_wav(file));
    }
    return evaluate_estimates(track, ref.name, estimates, method, config);
}

namespace {

std::string_view status_name(ScoreStatus s) {
    switch (s) {
        case ScoreStatus::finite: return "finite";
        case ScoreStatus::pos_inf: return "inf";
        case ScoreStatus::neg_inf: return "neg_inf";
        case ScoreStatus::undefined: return "undefined";
    }
    return "undefined";
}

ScoreStatus parse_status(const std::string& s) {
    if (s == "finite") return ScoreStatus::finite;
    if (s == "inf") return ScoreStatus::pos_inf;
    if (s == "neg_inf") return ScoreStatus::neg_inf;
    if (s == "undefined") return ScoreStatus::undefined;
    throw SchemaError("unknown score status '" + s + "'");
}

json score_to_json(const Score& s) {
    json j;
    j["score"] = s.finite() ? json(s.value) : json(nullptr);
    j["status"] = status_name(s.status);
    return j;
}

Score score_from_json(const json& j) {
    Score s;
    s.status = parse_status(j.at("status").get<std::string>());
    if (s.finite()) {
        if (!j.at("score").is_number()) throw SchemaError("finite score without a numeric value");
        s.value = j.at("score").get<double>();
    }
    return s;
}

json track_to_json(const TrackScore& score) {
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["track"] = score.track;
    j["method"] = score.method;
    j["targets"] = json::object();
    for (const auto& [name, frames] : score.targets) {
        json list = json::array();
        for (const auto& f : frames) {
            json fj;
            fj["time"] = f.time;
            fj["duration"] = f.duration;
            for (Metric m : kMetrics) fj[std::string(metric_name(m))] = score_to_json(f.get(m));
            list.push_back(std::move(fj));
        }
        j["targets"][name] = {{"frames", std::move(list)}};
    }
    return j;
}

TrackScore track_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("report entry is not an object");
    if (!j.contains("schema_version")) throw SchemaError("report entry has no schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != kReportSchemaVersion)
        throw SchemaError("unsupported report schema_version " + std::to_string(version) + " (expected " +
                          std::to_string(kReportSchemaVersion) + ")");
    TrackScore score;
    score.track = j.at("track").get<std::string>();
    score.method = j.at("method").get<std::string>();
    for (const auto& [name, target] : j.at("targets").items()) {
        auto& frames = score.targets[name];
        for (const auto& fj : target.at("frames")) {
            FrameRecord f;
            f.time = fj.at("time").get<double>();
            f.duration = fj.at("duration").get<double>();
            f.sdr = score_from_json(fj.at("SDR"));
            f.isr = score_from_json(fj.at("ISR"));
            f.sir = score_from_json(fj.at("SIR"));
            f.sar = score_from_json(fj.at("SAR"));
            frames.push_back(f);
        }
    }
    return score;
}

}  // namespace

std::string report_json(std::span<const TrackScore> scores) {
    json j;
    if (scores.size() == 1) {
        j = track_to_json(scores.front());
    } else {
        j = json::array();
        for (const auto& s : scores) j.push_back(track_to_json(s));
    }
    return j.dump(2) + "\n";
}

std::vector<TrackScore> parse_report(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed report JSON: ") + e.what());
    }
    std::vector<TrackScore> out;
    try {
        if (j.is_array())
            for (const auto& entry : j) out.push_back(track_from_json(entry));
        else
            out.push_back(track_from_json(j));
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed report: ") + e.what());
    }
    return out;
}

void write_report(std::span<const TrackScore> scores, const fs::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << report_json(scores);
    if (!out) throw IoError(path.string() + ": write failed");
}

std::vector<TrackScore> read_report(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open report");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_report(buffer.str());
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

std::vector<TrackScore> read_reports(std::span<const fs::path> inputs) {
    std::vector<fs::path> files;
    for (const auto& input : inputs) {
        if (fs::is_directory(input)) {
            for (const auto& entry : fs::recursive_directory_iterator(input))
                if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        } else if (fs::is_regular_file(input)) {
            files.push_back(input);
        } else {
            throw IoError(input.string() + ": no such report file or directory");
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<TrackScore> out;
    for (const auto& f : files) {
        auto scores = read_report(f);
        out.insert(out.end(), std::make_move_iterator(scores.begin()), std::make_move_iterator(scores.end()));
    }
    return out;
}

namespace {

std::vector<double> finite_values(const std::vector<FrameRecord>& frames, Metric metric) {
    std::vector<double> values;
    for (const auto& f : frames)
        if (f.get(metric).finite()) values.push_back(f.get(metric).value);
    return values;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "undefined";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

double track_median(const TrackScore& score, const std::string& target, Metric metric) {
    const auto it = score.targets.find(target);
    if (it == score.targets.end()) return std::numeric_limits<double>::quiet_NaN();
    return median(finite_values(it->second, metric));
}

AggregateTable aggregate(std::span<const TrackScore> scores, Pooling pooling) {
    struct Key {
        std::string method, target;
        Metric metric;
        auto operator<=>(const Key&) const = default;
    };
    struct Acc {
        std::vector<std::pair<std::string, double>> medians;
        std::vector<double> frames;
    };
    std::map<Key, Acc> groups;
    for (const auto& s : scores) {
        for (const auto& [target, frames] : s.targets) {
            for (Metric m : kMetrics) {
                Acc& acc = groups[{s.method, target, m}];
                auto values = finite_values(frames, m);
                acc.medians.emplace_back(s.track, median(values));
                acc.frames.insert(acc.frames.end(), values.begin(), values.end());
            }
        }
    }

    AggregateTable table;
    for (auto& [key, acc] : groups) {
        AggregateRow row;
        row.method = key.method;
        row.target = key.target;
        row.metric = key.metric;
        std::sort(acc.medians.begin(), acc.medians.end());
        row.track_medians = acc.medians;
        if (pooling == Pooling::all_frames) {
            row.campaign_median = median(std::move(acc.frames));
        } else {
            std::vector<double> defined;
            for (const auto& [track, m] : acc.medians)
                if (!std::isnan(m)) defined.push_back(m);
            row.campaign_median = median(std::move(defined));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string AggregateTable::csv() const {
    std::ostringstream os;
    os << "method,target,metric,track,track_median,campaign_median\n";
    for (const auto& row : rows) {
        for (const auto& [track, m] : row.track_medians)
            os << csv_field(row.method) << ',' << csv_field(row.target) << ',' << metric_name(row.metric) << ','
               << csv_field(track) << ',' << format_number(m) << ',' << format_number(row.campaign_median) << '\n';
    }
    return os.str();
}

TrackMedians collect_track_medians(std::span<const TrackScore> scores, const std::string& target, Metric metric) {
    TrackMedians out;
    for (const auto& s : scores) {
        const double m = track_median(s, target, metric);
        if (!std::isnan(m)) out[s.method][s.track] = m;
    }
    return out;
}

SignificanceMatrix pairwise_significance(const TrackMedians& medians, const std::string& target, Metric metric) {
    if (medians.size() < 2) throw ConfigError("pairwise significance needs at least two methods");
    SignificanceMatrix out;
    out.target = target;
    out.metric = metric;
    for (const auto& [method, tracks] : medians) out.methods.push_back(method);

    std::set<std::string> common;
    for (const auto& [track, v] : medians.begin()->second)
        if (std::isfinite(v)) common.insert(track);
    for (const auto& [method, tracks] : medians) {
        std::set<std::string> next;
        for (const auto& t : common)
            if (auto it = tracks.find(t); it != tracks.end() && std::isfinite(it->second)) next.insert(t);
        common = std::move(next);
    }
    out.tracks.assign(common.begin(), common.end());

    const auto k = static_cast<Eigen::Index>(out.methods.size());
    if (out.tracks.size() < 2) {
        out.p_values = Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
        out.p_values.diagonal().setOnes();
        return out;
    }
    Eigen::MatrixXd blocks(static_cast<Eigen::Index>(out.tracks.size()), k);
    Eigen::Index c = 0;
    for (const auto& [method, tracks] : medians) {
        for (std::size_t r = 0; r < out.tracks.size(); ++r)
            blocks(static_cast<Eigen::Index>(r), c) = tracks.at(out.tracks[r]);
        ++c;
    }
    out.p_values = conover_friedman(blocks).p_values;
    return out;
}

std::string SignificanceMatrix::csv() const {
    std::ostringstream os;
    os << "method";
    for (const auto& m : methods) os << ',' << csv_field(m);
    os << '\n';
    for (std::size_t i = 0; i < methods.size(); ++i) {
        os << csv_field(methods[i]);
        for (std::size_t j = 0; j < methods.size(); ++j)
            os << ',' << format_number(p_values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        os << '\n';
    }
    return os.str();
}

std::string SignificanceMatrix::json(double threshold) const {
    nlohmann::json j;
    j["target"] = target;
    j["metric"] = metric_name(metric);
    j["methods"] = methods;
    j["tracks"] = tracks;
    j["threshold"] = threshold;
    nlohmann::json p = nlohmann::json::array(), sig = nlohmann::json::array();
    for (Eigen::Index r = 0; r < p_values.rows(); ++r) {
        nlohmann::json prow = nlohmann::json::array(), srow = nlohmann::json::array();
        for (Eigen::Index c = 0; c < p_values.cols(); ++c) {
            const double v = p_values(r, c);
            prow.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
            srow.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(r != c && v < threshold));
        }
        p.push_back(std::move(prow));
        sig.push_back(std::move(srow));
    }
    j["p_values"] = std::move(p);
    j["significant"] = std::move(sig);
    return j.dump(2) + "\n";
}

std::vector<std::exception_ptr> parallel_for_each(std::size_t count, int workers,
                                                  const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(count);
    const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, workers))
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
            fn(static_cast<std::size_t>(k));
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }
    return errors;
}

}  // namespace sepeval
