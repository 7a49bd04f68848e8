#include "sepeval/campaign.hpp"
#include "sepeval/dataset.hpp"
#include "sepeval/error.hpp"
#include "sepeval/log.hpp"
#include "sepeval/oracle.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace sepeval;

namespace {

constexpr int kExitFatal = 1;
constexpr int kExitUsage = 2;

struct Options {
    fs::path corpus;
    fs::path estimates;
    fs::path output;
    std::vector<fs::path> inputs;
    std::string method;
    std::string split = "all";
    // separation
    double alpha = 2.0;
    int iterations = 2;
    std::size_t stft_window = 4096;
    std::size_t stft_hop = 1024;
    std::string stft_kind = "hann";
    // evaluation
    std::size_t filter_len = 512;
    double window = 1.0;
    double hop = 1.0;
    std::string mode = "v4";
    bool accompaniment = true;
    // reporting
    std::string over = "tracks";
    std::string target = "vocals";
    std::string metric = "SDR";
    double threshold = 0.05;
    double tolerance = 1e-2;
    fs::path manifest;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    bool quiet = false;
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw IoError(path.string() + ": write failed");
}

EvalConfig eval_config(const Options& o) {
    EvalConfig c;
    c.filter_len = o.filter_len;
    c.window_seconds = o.window;
    c.hop_seconds = o.hop;
    c.mode = parse_filter_mode(o.mode);
    c.accompaniment = o.accompaniment;
    if (!(o.window > 0.0) || !(o.hop > 0.0)) throw ConfigError("--window and --hop must be positive");
    if (o.filter_len == 0) throw ConfigError("--filter-len must be positive");
    return c;
}

std::vector<TrackRef> select_tracks(const Options& o) {
    const Corpus corpus = scan_corpus(o.corpus);
    if (o.split == "train") return corpus.train;
    if (o.split == "test") return corpus.test;
    return corpus.all();
}

std::string what_of(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

/// Runs fn over every track, logging failures. Returns the successful scores
/// sorted by track name, or throws if every track failed.
std::vector<TrackScore> run_tracks(const std::vector<TrackRef>& tracks, int workers,
                                   const std::function<TrackScore(const TrackRef&)>& fn) {
    std::vector<TrackScore> scores(tracks.size());
    std::atomic<std::size_t> done{0};
    const auto errors = parallel_for_each(tracks.size(), workers, [&](std::size_t k) {
        scores[k] = fn(tracks[k]);
        log::info("[" + std::to_string(++done) + "/" + std::to_string(tracks.size()) + "] " + tracks[k].name);
    });
    std::vector<TrackScore> good;
    for (std::size_t k = 0; k < tracks.size(); ++k) {
        if (errors[k]) {
            log::error(tracks[k].name + ": " + what_of(errors[k]));
            continue;
        }
        good.push_back(std::move(scores[k]));
    }
    if (good.empty()) throw Error("every track failed");
    if (good.size() < tracks.size())
        log::warn(std::to_string(tracks.size() - good.size()) + " of " + std::to_string(tracks.size()) +
                  " tracks failed");
    std::sort(good.begin(), good.end(), [](const TrackScore& a, const TrackScore& b) { return a.track < b.track; });
    return good;
}

void write_method_outputs(const std::vector<TrackScore>& scores, const fs::path& method_dir) {
    for (const auto& s : scores) write_report(std::span(&s, 1), method_dir / (s.track + ".json"));
    write_text(method_dir / "summary.csv", aggregate(scores).csv());
}

int cmd_oracle(const Options& o) {
    const OracleMethod method = [&] {
        OracleMethod m = OracleMethod::parse(o.method, o.alpha);
        if (o.iterations < 0) throw ConfigError("--iterations must be non-negative");
        m.iterations = o.iterations;
        return m;
    }();
    StftConfig stft{o.stft_window, o.stft_hop, parse_window(o.stft_kind)};
    stft.validate();
    const EvalConfig eval = eval_config(o);
    const auto tracks = select_tracks(o);
    const fs::path method_dir = o.output / method.label();
    log::info("oracle " + method.label() + " on " + std::to_string(tracks.size()) + " tracks");

    const auto scores = run_tracks(tracks, o.workers, [&](const TrackRef& ref) {
        const Track track = load_track(ref);
        const auto estimates = oracle_separate(track.mixture, track.stems, method, stft);
        const fs::path dir = method_dir / ref.name;
        fs::create_directories(dir);
        std::map<std::string, AudioSignal> named;
        for (std::size_t j = 0; j < estimates.size(); ++j) {
            save_wav(dir / (track.stem_names[j] + ".wav"), estimates[j]);
            named.emplace(track.stem_names[j], estimates[j]);
        }
        return evaluate_estimates(track, ref.name, named, method.label(), eval);
    });
    write_method_outputs(scores, method_dir);
    return 0;
}

int cmd_eval(const Options& o) {
    const EvalConfig eval = eval_config(o);
    if (!fs::is_directory(o.estimates)) throw IoError(o.estimates.string() + ": estimates directory not found");
    const auto tracks = select_tracks(o);
    log::info("evaluating " + o.method + " on " + std::to_string(tracks.size()) + " tracks");
    const auto scores = run_tracks(tracks, o.workers, [&](const TrackRef& ref) {
        return evaluate_track(ref, o.estimates / ref.name, o.method, eval);
    });
    write_method_outputs(scores, o.output / o.method);
    return 0;
}

Pooling parse_pooling(const std::string& s) {
    if (s == "tracks") return Pooling::track_medians;
    if (s == "frames") return Pooling::all_frames;
    throw ConfigError("--over must be 'tracks' or 'frames'");
}

std::vector<TrackScore> load_inputs(const Options& o) {
    auto scores = read_reports(o.inputs);
    if (scores.empty()) throw Error("no score reports found in the given inputs");
    return scores;
}

int cmd_aggregate(const Options& o) {
    const Pooling pooling = parse_pooling(o.over);
    const auto scores = load_inputs(o);
    write_text(o.output, aggregate(scores, pooling).csv());
    log::info("wrote " + o.output.string());
    return 0;
}

int cmd_compare(const Options& o) {
    const Metric metric = parse_metric(o.metric);
    if (std::find(kTargetNames.begin(), kTargetNames.end(), o.target) == kTargetNames.end())
        throw ConfigError("unknown target '" + o.target + "'");
    if (!(o.threshold > 0.0 && o.threshold < 1.0)) throw ConfigError("--threshold must lie in (0, 1)");
    const auto scores = load_inputs(o);
    std::set<std::string> methods;
    for (const auto& s : scores) methods.insert(s.method);
    if (methods.size() < 2) {
        log::error("compare needs reports from at least two methods, found " + std::to_string(methods.size()));
        return kExitUsage;
    }
    const auto matrix = pairwise_significance(collect_track_medians(scores, o.target, metric), o.target, metric);
    fs::path csv = o.output, json = o.output;
    csv += ".csv";
    json += ".json";
    write_text(csv, matrix.csv());
    write_text(json, matrix.json(o.threshold));
    log::info("compared " + std::to_string(matrix.methods.size()) + " methods over " +
              std::to_string(matrix.tracks.size()) + " tracks");
    return 0;
}

int cmd_validate(const Options& o) {
    if (!(o.tolerance >= 0.0)) throw ConfigError("--tolerance must be non-negative");
    const Corpus corpus = scan_corpus(o.corpus);
    log::info(std::to_string(corpus.train.size()) + " train, " + std::to_string(corpus.test.size()) + " test, " +
              std::to_string(corpus.skipped.size()) + " skipped");
    if (!o.manifest.empty()) write_text(o.manifest, corpus_manifest(corpus));
    const auto tracks = corpus.all();
    std::vector<MixtureReport> reports(tracks.size());
    const auto errors = parallel_for_each(tracks.size(), o.workers,
                                          [&](std::size_t k) { reports[k] = validate_mixture(tracks[k], o.tolerance); });
    int failed = static_cast<int>(corpus.skipped.size());
    for (std::size_t k = 0; k < tracks.size(); ++k) {
        if (errors[k]) {
            log::error(tracks[k].name + ": " + what_of(errors[k]));
            ++failed;
        } else if (!reports[k].passed) {
            log::error(tracks[k].name + ": mixture differs from the stem sum by " +
                       std::to_string(reports[k].max_abs_deviation));
            ++failed;
        }
    }
    if (failed > 0) {
        log::error(std::to_string(failed) + " track(s) failed validation");
        return kExitFatal;
    }
    log::info("all " + std::to_string(tracks.size()) + " tracks valid");
    return 0;
}

void add_corpus(CLI::App* cmd, Options& o) {
    cmd->add_option("--corpus", o.corpus, "Dataset root holding train/ and test/")
        ->envname("SEPEVAL_CORPUS")
        ->required();
    cmd->add_option("--split", o.split, "Tracks to process")
        ->envname("SEPEVAL_SPLIT")
        ->check(CLI::IsMember({"all", "train", "test"}))
        ->capture_default_str();
}

void add_eval(CLI::App* cmd, Options& o) {
    cmd->add_option("--filter-len", o.filter_len, "Distortion filter length in taps")
        ->envname("SEPEVAL_FILTER_LEN")
        ->capture_default_str();
    cmd->add_option("--window", o.window, "Evaluation window in seconds")
        ->envname("SEPEVAL_WINDOW")
        ->capture_default_str();
    cmd->add_option("--hop", o.hop, "Evaluation hop in seconds")->envname("SEPEVAL_HOP")->capture_default_str();
    cmd->add_option("--mode", o.mode, "v4: one filter per track; v3: filters refit per window")
        ->envname("SEPEVAL_MODE")
        ->check(CLI::IsMember({"v4", "v3"}))
        ->capture_default_str();
    cmd->add_flag("!--no-accompaniment", o.accompaniment, "Skip the accompaniment target");
}

void add_workers(CLI::App* cmd, Options& o) {
    cmd->add_option("--workers", o.workers, "Tracks processed in parallel")
        ->envname("SEPEVAL_WORKERS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Oracle separation and BSS Eval scoring for multitrack corpora"};
    app.require_subcommand(1);
    app.add_flag("-q,--quiet", o.quiet, "Only report warnings and errors");

    auto* oracle = app.add_subcommand("oracle", "Separate every track with an oracle and score the estimates");
    add_corpus(oracle, o);
    oracle->add_option("--output", o.output, "Output root")->envname("SEPEVAL_OUTPUT")->required();
    oracle->add_option("--method", o.method, "IBM1, IBM2, IRM1, IRM2, IRM (with --alpha) or MWF")
        ->envname("SEPEVAL_METHOD")
        ->required();
    oracle->add_option("--alpha", o.alpha, "Exponent of the generic IRM")
        ->envname("SEPEVAL_ALPHA")
        ->capture_default_str();
    oracle->add_option("--iterations", o.iterations, "MWF parameter estimation rounds")
        ->envname("SEPEVAL_ITERATIONS")
        ->capture_default_str();
    oracle->add_option("--stft-window", o.stft_window, "STFT window length in samples")
        ->envname("SEPEVAL_STFT_WINDOW")
        ->capture_default_str();
    oracle->add_option("--stft-hop", o.stft_hop, "STFT hop in samples")
        ->envname("SEPEVAL_STFT_HOP")
        ->capture_default_str();
    oracle->add_option("--stft-kind", o.stft_kind, "hann, sqrt_hann or rectangular")
        ->envname("SEPEVAL_STFT_KIND")
        ->capture_default_str();
    add_eval(oracle, o);
    add_workers(oracle, o);

    auto* eval = app.add_subcommand("eval", "Score estimates stored as <estimates>/<track>/<target>.wav");
    add_corpus(eval, o);
    eval->add_option("--estimates", o.estimates, "Directory of per-track estimate folders")
        ->envname("SEPEVAL_ESTIMATES")
        ->required();
    eval->add_option("--method", o.method, "Method name recorded in the reports")
        ->envname("SEPEVAL_METHOD")
        ->required();
    eval->add_option("--output", o.output, "Output root")->envname("SEPEVAL_OUTPUT")->required();
    add_eval(eval, o);
    add_workers(eval, o);

    auto* agg = app.add_subcommand("aggregate", "Median table of one or more reports");
    agg->add_option("inputs", o.inputs, "Report files or directories")->required();
    agg->add_option("--output", o.output, "CSV file to write")->required();
    agg->add_option("--over", o.over, "Campaign median over track medians or over all frames")
        ->check(CLI::IsMember({"tracks", "frames"}))
        ->capture_default_str();

    auto* cmp = app.add_subcommand("compare", "Pairwise significance between methods");
    cmp->add_option("inputs", o.inputs, "Report files or directories")->required();
    cmp->add_option("--output", o.output, "Output prefix; writes <prefix>.csv and <prefix>.json")->required();
    cmp->add_option("--target", o.target, "Target to compare")->capture_default_str();
    cmp->add_option("--metric", o.metric, "SDR, ISR, SIR or SAR")->capture_default_str();
    cmp->add_option("--threshold", o.threshold, "Significance level")
        ->envname("SEPEVAL_THRESHOLD")
        ->capture_default_str();

    auto* val = app.add_subcommand("validate", "Check corpus layout and that mixtures equal their stem sums");
    val->add_option("--corpus", o.corpus, "Dataset root")->envname("SEPEVAL_CORPUS")->required();
    val->add_option("--tolerance", o.tolerance, "Maximum absolute sample deviation")->capture_default_str();
    val->add_option("--manifest", o.manifest, "Write the corpus manifest JSON here");
    add_workers(val, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    if (o.quiet) log::set_level(log::Level::warn);

    try {
        if (*oracle) return cmd_oracle(o);
        if (*eval) return cmd_eval(o);
        if (*agg) return cmd_aggregate(o);
        if (*cmp) return cmd_compare(o);
        if (*val) return cmd_validate(o);
    } catch (const ConfigError& e) {
        log::error(e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        log::error(e.what());
        return kExitFatal;
    }
    return kExitUsage;
}
