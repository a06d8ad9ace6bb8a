#pragma once

// End-to-end subcommand workflows. Each takes a plain argument struct, writes
// its artifacts under `out`, and returns a summary or outcome. The CLI in
// tools/ only parses flags into these structs. Definitions are in src/workflow.cpp.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "biaskit/core.hpp"
#include "biaskit/fetch.hpp"
#include "biaskit/ingest.hpp"
#include "biaskit/io.hpp"
#include "biaskit/labeling.hpp"
#include "biaskit/metrics.hpp"
#include "biaskit/report.hpp"
#include "biaskit/sampler.hpp"
#include "biaskit/sizing.hpp"
#include "biaskit/synth.hpp"

namespace biaskit::workflow {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConstraint = 3;

inline constexpr const char* kCacheDirEnv = "BIASKIT_CACHE_DIR";

/// Default directory for population caches: $BIASKIT_CACHE_DIR, else ./.biaskit-cache.
inline fs::path default_cache_dir() {
    if (const char* env = std::getenv(kCacheDirEnv); env && *env) return env;
    return ".biaskit-cache";
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Writes the echoed run configuration next to the outputs.
inline void write_echo(const fs::path& out, const json& echo) { io::write_file(out / "run_config.json", dump(echo)); }

inline json run_echo(const std::string& subcommand, json options) {
    return {{"tool", "biaskit"}, {"version", kVersion}, {"subcommand", subcommand}, {"options", std::move(options)}};
}

inline Population load_population(const fs::path& path, const ParseOptions& opts = {}) {
    auto text = io::read_file(path);
    ParseOptions o = opts;
    if (o.provenance.empty()) o.provenance = path.filename().string();
    auto parsed = parse_metadata(text, o);
    return std::move(parsed.population);
}

inline std::optional<json> opt_json(const std::optional<std::string>& s) {
    return s ? std::optional<json>(*s) : std::nullopt;
}

inline json nullable(const std::optional<std::string>& s) { return s ? json(*s) : json(); }

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
    fs::path input;
    std::optional<fs::path> families;
    fs::path out;
    bool strict = false;
    std::optional<std::string> snapshot;          // cutoff date, inclusive
    std::vector<std::string> snapshot_pieces;     // "FROM:TO@CUTOFF", FROM/TO are periods
    std::int64_t utc_offset_seconds = 0;
    std::string vt_timestamp_column = "vt_scan_date";

    [[nodiscard]] json echo() const {
        return {{"input", input.string()},
                {"families", families ? json(families->string()) : json()},
                {"strict", strict},
                {"snapshot", nullable(snapshot)},
                {"snapshot_pieces", snapshot_pieces},
                {"utc_offset_seconds", utc_offset_seconds},
                {"vt_timestamp_column", vt_timestamp_column}};
    }
};

inline SnapshotPiece parse_snapshot_piece(const std::string& spec) {
    auto at = spec.find('@');
    auto colon = spec.find(':');
    if (at == std::string::npos || colon == std::string::npos || colon > at) {
        throw UsageError("snapshot piece must look like FROM:TO@CUTOFF, e.g. 2014:2016@2017-06-30");
    }
    return {parse_period(spec.substr(0, colon)), parse_period(spec.substr(colon + 1, at - colon - 1)),
            end_of_day(parse_timestamp(spec.substr(at + 1)))};
}

struct IngestSummary {
    ParseStats stats;
    std::size_t records = 0;
    fs::path cache;
};

IngestSummary cmd_ingest(const IngestArgs& a);

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
    fs::path population;
    fs::path out;
    std::uint32_t vtt = 4;
    TimestampPolicy policy;
    bool vtt_curve = false;
    std::uint32_t vtt_max = 40;
    bool markets = false;
    bool timestamps = false;
    std::optional<std::string> overlap_ref;   // period, e.g. "2014"
    std::vector<std::uint32_t> heatmap_vtts;

    [[nodiscard]] json echo() const {
        return {{"population", population.string()},
                {"vtt", vtt},
                {"timestamp", to_string(policy.kind)},
                {"vtt_curve", vtt_curve},
                {"vtt_max", vtt_max},
                {"markets", markets},
                {"timestamps", timestamps},
                {"overlap_ref", nullable(overlap_ref)},
                {"heatmap_vtts", heatmap_vtts}};
    }
};

std::vector<fs::path> cmd_stats(const StatsArgs& a);

// ---------------------------------------------------------------------------
// sample-size

struct SampleSizeArgs {
    std::optional<std::uint64_t> population_size;
    std::optional<fs::path> population;
    fs::path out;
    SizingParams params;
    std::uint32_t vtt = 4;
    TimestampPolicy policy;
    std::vector<std::string> plans;  // plan names; empty means all six
    double ratio = kDefaultMalwareRatio;

    [[nodiscard]] json echo() const {
        return {{"N", population_size ? json(*population_size) : json()},
                {"population", population ? json(population->string()) : json()},
                {"confidence", params.confidence},
                {"delta", params.delta},
                {"p", params.p},
                {"bonferroni_m", params.bonferroni_m ? json(*params.bonferroni_m) : json()},
                {"vtt", vtt},
                {"timestamp", to_string(policy.kind)},
                {"plans", plans},
                {"ratio", ratio}};
    }
};

json cmd_sample_size(const SampleSizeArgs& a);

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
    fs::path population;
    fs::path out;
    LabelRule rule;
    TimestampPolicy policy;
    SizingPlan plan;
    SizingParams params;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::set<std::string> markets;
    std::optional<std::string> snapshot;
    std::optional<std::string> created;
    std::optional<std::string> scenario;  // market scenario name, e.g. D_EVEN
    double consistency_threshold = kDefaultConsistencyThreshold;
    bool allow_violations = false;

    // Threads do not change results and are left out of the echo.
    [[nodiscard]] json echo() const {
        return {{"population", population.string()},
                {"vtt", rule.vtt},
                {"timestamp", to_string(policy.kind)},
                {"timestamp_fallback", policy.fallback ? json(to_string(*policy.fallback)) : json()},
                {"plan", plan.name()},
                {"ratio", plan.ratio_malware},
                {"confidence", params.confidence},
                {"delta", params.delta},
                {"p", params.p},
                {"bonferroni_m", params.bonferroni_m ? json(*params.bonferroni_m) : json()},
                {"seed", seed},
                {"markets", markets},
                {"snapshot", nullable(snapshot)},
                {"created", nullable(created)},
                {"scenario", nullable(scenario)},
                {"consistency_threshold", consistency_threshold},
                {"allow_violations", allow_violations}};
    }
};

inline json verdicts_json(const std::vector<Verdict>& vs) {
    json arr = json::array();
    for (const auto& v : vs) {
        arr.push_back({{"check", v.check}, {"pass", v.pass}, {"mandatory", v.mandatory}, {"evidence", v.evidence}});
    }
    return arr;
}

struct SampleOutcome {
    int exit_code = kExitOk;
    std::vector<Verdict> verdicts;
    std::vector<fs::path> written;
};

SampleOutcome cmd_sample(const SampleArgs& a);

// ---------------------------------------------------------------------------
// verify

inline DatasetManifest load_manifest(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw FormatError("manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    return manifest_from_json(j);
}

struct VerifyOutcome {
    int exit_code = kExitOk;
    std::vector<Verdict> verdicts;
};

VerifyOutcome cmd_verify(const fs::path& manifest_path, const fs::path& out);

// ---------------------------------------------------------------------------
// split

struct SplitArgs {
    std::optional<std::string> from;  // YYYY-MM
    std::optional<std::string> to;
    std::optional<fs::path> manifest;  // range taken from the manifest when from/to absent
    int window = 12;
    bool allow_partial = false;
    fs::path out;
};

inline std::pair<Period, Period> manifest_month_range(const DatasetManifest& m) {
    if (m.entries.empty()) throw DomainError("manifest has no entries");
    Period lo = m.entries.front().period, hi = lo;
    for (const auto& e : m.entries) {
        lo = std::min(lo, e.period);
        hi = std::max(hi, e.period);
    }
    return {lo, hi};
}

inline json split_json(const SplitPlan& plan) {
    json arr = json::array();
    for (const auto& s : plan.splits) {
        arr.push_back({{"label", s.label()},
                       {"train_from", s.train.front().label()},
                       {"train_to", s.train.back().label()},
                       {"test_from", s.test.front().label()},
                       {"test_to", s.test.back().label()}});
    }
    return arr;
}

SplitPlan cmd_split(const SplitArgs& a);

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::optional<fs::path> manifest;
    std::vector<std::pair<std::string, fs::path>> predictions;
    std::vector<std::pair<std::string, std::vector<double>>> auts;  // precomputed per-split AUTs
    std::vector<std::string> split_labels;                          // labels for precomputed AUT columns
    int window = 12;
    bool allow_partial = false;
    Metric metric = Metric::F1;
    double threshold = kDefaultPredictionThreshold;
    bool lenient = false;
    fs::path out;

    [[nodiscard]] json echo() const {
        json preds = json::array();
        for (const auto& [n, p] : predictions) preds.push_back({n, p.string()});
        json a = json::array();
        for (const auto& [n, v] : auts) a.push_back({n, v});
        return {{"manifest", manifest ? json(manifest->string()) : json()},
                {"predictions", preds},
                {"auts", a},
                {"split_labels", split_labels},
                {"window", window},
                {"allow_partial", allow_partial},
                {"metric", to_string(metric)},
                {"threshold", threshold},
                {"lenient", lenient}};
    }
};

EvaluationReport cmd_evaluate(const EvaluateArgs& a);

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    std::string preset = "stable";
    std::uint64_t seed = 1;
    std::optional<int> months;
    std::optional<int> per_month;
    std::optional<double> malware_fraction;
    std::optional<std::string> start;  // YYYY-MM
    unsigned threads = 1;
    fs::path out;
};

inline SynthConfig synth_config(const SynthArgs& a) {
    auto cfg = preset(a.preset);
    cfg.seed = a.seed;
    if (a.months) cfg.months = *a.months;
    if (a.per_month) cfg.per_month = *a.per_month;
    if (a.malware_fraction) cfg.malware_fraction = *a.malware_fraction;
    if (a.start) cfg.start = parse_period(*a.start);
    return cfg;
}

SynthOutput cmd_synth(const SynthArgs& a);

// ---------------------------------------------------------------------------
// fetch

struct FetchArgs {
    std::string url;
    std::optional<fs::path> dest;  // defaults to <cache dir>/<basename without .gz>
    fs::path cache_dir = default_cache_dir();
    FetchOptions options;
};

inline fs::path fetch_destination(const FetchArgs& a) {
    if (a.dest) return *a.dest;
    auto path = a.url.substr(0, a.url.find_first_of("?#"));
    auto name = path.substr(path.find_last_of('/') + 1);
    if (name.size() > 3 && name.ends_with(".gz")) name.resize(name.size() - 3);
    if (name.empty()) name = "metadata.csv";
    return a.cache_dir / name;
}

FetchResult cmd_fetch(const FetchArgs& a);

}  // namespace biaskit::workflow
