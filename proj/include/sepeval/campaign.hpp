#pragma once

#include "sepeval/bss_eval.hpp"
#include "sepeval/dataset.hpp"

#include <Eigen/Core>

#include <array>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sepeval {

inline constexpr std::array<std::string_view, 5> kTargetNames = {"vocals", "drums", "bass", "other",
                                                                 "accompaniment"};
inline constexpr int kReportSchemaVersion = 1;

enum class Metric { sdr, isr, sir, sar };
inline constexpr std::array<Metric, 4> kMetrics = {Metric::sdr, Metric::isr, Metric::sir, Metric::sar};

std::string_view metric_name(Metric m);
Metric parse_metric(std::string_view name);

struct FrameRecord {
    double time = 0.0;      ///< seconds
    double duration = 0.0;  ///< seconds
    Score sdr, isr, sir, sar;

    const Score& get(Metric m) const;
    bool operator==(const FrameRecord&) const;
};

struct TrackScore {
    std::string track;
    std::string method;
    std::map<std::string, std::vector<FrameRecord>> targets;

    bool operator==(const TrackScore&) const = default;
};

struct EvalConfig {
    std::size_t filter_len = 512;
    double window_seconds = 1.0;
    double hop_seconds = 1.0;
    FilterMode mode = FilterMode::global;
    /// Also score accompaniment against {vocals, accompaniment} references.
    bool accompaniment = true;
};

/// Scores in-memory estimates keyed by target name. Stem targets are scored
/// against all four stems; "accompaniment" (given, or summed from the three
/// non-vocal estimates) against {vocals, accompaniment}. Absent targets are
/// left out of the result.
TrackScore evaluate_estimates(const Track& track, const std::string& track_name,
                              const std::map<std::string, AudioSignal>& estimates, const std::string& method,
                              const EvalConfig& config);

/// Loads <estimates_dir>/<target>.wav for every target and scores them.
/// A missing file drops that target (logged); a shape mismatch throws.
TrackScore evaluate_track(const TrackRef& track, const std::filesystem::path& estimates_dir,
                          const std::string& method, const EvalConfig& config);

std::string report_json(std::span<const TrackScore> scores);
std::vector<TrackScore> parse_report(std::string_view text);
/// A single score is written as one object, several as an array. Missing
/// parent directories are created.
void write_report(std::span<const TrackScore> scores, const std::filesystem::path& path);
std::vector<TrackScore> read_report(const std::filesystem::path& path);
/// Every *.json report under the given files/directories (recursive, sorted).
std::vector<TrackScore> read_reports(std::span<const std::filesystem::path> inputs);

/// Median over the finite frames of one target/metric; NaN when none.
double track_median(const TrackScore& score, const std::string& target, Metric metric);

enum class Pooling {
    track_medians,  ///< campaign median over per-track medians
    all_frames,     ///< campaign median over every finite frame of every track
};

struct AggregateRow {
    std::string method;
    std::string target;
    Metric metric = Metric::sdr;
    std::vector<std::pair<std::string, double>> track_medians;  ///< sorted by track
    double campaign_median = 0.0;                               ///< NaN when undefined
};

struct AggregateTable {
    std::vector<AggregateRow> rows;
    /// Columns: method,target,metric,track,track_median,campaign_median.
    std::string csv() const;
};

AggregateTable aggregate(std::span<const TrackScore> scores, Pooling pooling = Pooling::track_medians);

/// method -> track -> median score.
using TrackMedians = std::map<std::string, std::map<std::string, double>>;

TrackMedians collect_track_medians(std::span<const TrackScore> scores, const std::string& target, Metric metric);

struct SignificanceMatrix {
    std::string target;
    Metric metric = Metric::sdr;
    std::vector<std::string> methods;
    std::vector<std::string> tracks;  ///< blocks used by the test
    Eigen::MatrixXd p_values;         ///< NaN marks undefined cells

    std::string csv() const;
    std::string json(double threshold) const;
};

/// Conover post-hoc test on Friedman ranks over the tracks every method has
/// a finite median for. Fewer than two such tracks leaves every off-diagonal
/// cell undefined.
SignificanceMatrix pairwise_significance(const TrackMedians& medians, const std::string& target = "vocals",
                                         Metric metric = Metric::sdr);

/// Runs fn(0..count-1) on at most `workers` threads. Exceptions are caught per
/// item and returned (null for success).
std::vector<std::exception_ptr> parallel_for_each(std::size_t count, int workers,
                                                  const std::function<void(std::size_t)>& fn);

}  // namespace sepeval
