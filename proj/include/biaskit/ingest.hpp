#pragma once

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "biaskit/core.hpp"
#include "biaskit/io.hpp"

namespace biaskit {

struct ParseOptions {
    bool strict = false;
    /// Offset of the source's wall clock from UTC; subtracted on parse.
    std::int64_t utc_offset_seconds = 0;
    /// Column feeding ApkRecord::crawl_date.
    std::string crawl_column = "added";
    /// Column feeding ApkRecord::vt_scan_date (the "VT timestamp").
    std::string vt_timestamp_column = "vt_scan_date";
    std::string provenance;
};

struct ParseStats {
    std::size_t rows = 0;
    std::size_t parsed = 0;
    std::size_t malformed = 0;
    std::size_t duplicates = 0;
    std::vector<std::string> messages;  // first few problems only

    void note(std::string msg) {
        if (messages.size() < 20) messages.push_back(std::move(msg));
    }
};

struct ParsedPopulation {
    Population population;
    ParseStats stats;
};

namespace detail {

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

class Header {
public:
    explicit Header(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) index_[std::string(trim(fields[i]))] = i;
    }
    [[nodiscard]] std::optional<std::size_t> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    [[nodiscard]] std::size_t require(const std::string& name) const {
        auto i = find(name);
        if (!i) throw FormatError("missing required column '" + name + "'");
        return *i;
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

inline std::string_view field_at(const std::vector<std::string>& row, std::optional<std::size_t> col) {
    if (!col || *col >= row.size()) return {};
    return trim(row[*col]);
}

inline std::vector<std::string> split_markets(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto bar = s.find('|', start);
        if (bar == std::string_view::npos) bar = s.size();
        out.emplace_back(s.substr(start, bar - start));
        start = bar + 1;
    }
    return normalize_markets(std::move(out));
}

}  // namespace detail

/// Parses an AndroZoo-style metadata CSV. Duplicate hashes keep the last row.
inline ParsedPopulation parse_metadata(std::string_view text, const ParseOptions& opts = {}) {
    io::LineReader lines(text);
    std::string_view line;
    bool have_header = false;
    while (lines.next(line)) {
        if (!detail::trim(line).empty()) {
            have_header = true;
            break;
        }
    }
    if (!have_header) throw FormatError("empty metadata input");
    detail::Header header(io::split_csv_line(line));
    const auto c_sha = header.require("sha256");
    const auto c_dex = header.require("dex_date");
    const auto c_vt = header.require("vt_detection");
    const auto c_markets = header.find("markets");
    const auto c_crawl = header.find(opts.crawl_column);
    const auto c_vtdate = header.find(opts.vt_timestamp_column);
    const auto c_size = header.find("apk_size");
    const auto c_family = header.find("family");

    ParseStats stats;
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<ApkRecord> records;

    while (lines.next(line)) {
        if (detail::trim(line).empty()) continue;
        ++stats.rows;
        try {
            auto row = io::split_csv_line(line);
            ApkRecord r;
            r.sha256 = normalize_sha256(detail::field_at(row, c_sha));
            r.dex_date = parse_timestamp(detail::field_at(row, c_dex), opts.utc_offset_seconds);
            if (auto vt = detail::field_at(row, c_vt); !vt.empty()) {
                std::int64_t d = 0;
                if (!detail::parse_int(vt, d) || d < 0) throw FormatError("invalid vt_detection '" + std::string(vt) + "'");
                r.vt_detection = static_cast<std::uint32_t>(d);
            }
            if (auto v = detail::field_at(row, c_crawl); !v.empty()) r.crawl_date = parse_timestamp(v, opts.utc_offset_seconds);
            if (auto v = detail::field_at(row, c_vtdate); !v.empty()) r.vt_scan_date = parse_timestamp(v, opts.utc_offset_seconds);
            if (auto v = detail::field_at(row, c_size); !v.empty()) {
                std::int64_t size = 0;
                if (!detail::parse_int(v, size) || size < 0) throw FormatError("invalid apk_size '" + std::string(v) + "'");
                r.apk_size = static_cast<std::uint64_t>(size);
            }
            r.markets = detail::split_markets(detail::field_at(row, c_markets));
            if (auto v = detail::field_at(row, c_family); !v.empty()) r.family = std::string(v);

            if (auto it = seen.find(r.sha256); it != seen.end()) {
                ++stats.duplicates;
                stats.note("line " + std::to_string(lines.line_number()) + ": duplicate sha256 " + r.sha256);
                records[it->second] = std::move(r);
            } else {
                seen.emplace(r.sha256, records.size());
                records.push_back(std::move(r));
            }
        } catch (const Error& e) {
            if (opts.strict) {
                throw FormatError("line " + std::to_string(lines.line_number()) + ": " + e.what());
            }
            ++stats.malformed;
            stats.note("line " + std::to_string(lines.line_number()) + ": " + e.what());
        }
    }
    stats.parsed = records.size();
    return {Population(std::move(records), opts.provenance), stats};
}

inline std::string serialize_metadata(const Population& pop) {
    std::string out = "sha256,dex_date,apk_size,vt_detection,vt_scan_date,markets,added,family\n";
    for (const auto& r : pop) {
        out += r.sha256;
        out += ',';
        out += format_timestamp(r.dex_date);
        out += ',';
        out += std::to_string(r.apk_size);
        out += ',';
        if (r.vt_detection) out += std::to_string(*r.vt_detection);
        out += ',';
        if (r.vt_scan_date) out += format_timestamp(*r.vt_scan_date);
        out += ',';
        std::string markets;
        for (std::size_t i = 0; i < r.markets.size(); ++i) {
            if (i) markets += '|';
            markets += r.markets[i];
        }
        out += io::csv_escape(markets);
        out += ',';
        if (r.crawl_date) out += format_timestamp(*r.crawl_date);
        out += ',';
        if (r.family) out += io::csv_escape(*r.family);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Family labels.

struct FamilyTable {
    std::map<std::string, std::string> families;  // sha256 -> family (non-empty)
    std::vector<std::string> unlabeled;            // hashes listed with an empty family
    std::size_t malformed = 0;
};

inline FamilyTable parse_families(std::string_view text) {
    FamilyTable out;
    io::LineReader lines(text);
    std::string_view line;
    bool first = true;
    while (lines.next(line)) {
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> row;
        try {
            row = io::split_csv_line(line);
        } catch (const FormatError&) {
            ++out.malformed;
            continue;
        }
        if (first) {
            first = false;
            if (!row.empty() && detail::trim(row[0]) == "sha256") continue;
        }
        if (row.size() != 2 || !is_sha256(detail::trim(row[0]))) {
            ++out.malformed;
            continue;
        }
        auto sha = normalize_sha256(row[0]);
        auto fam = detail::trim(row[1]);
        if (fam.empty()) {
            out.families.erase(sha);
            out.unlabeled.push_back(sha);
        } else {
            out.families[sha] = std::string(fam);
        }
    }
    return out;
}

struct FamilyJoinStats {
    std::size_t matched = 0;
    std::size_t cleared = 0;                     // empty family: record keeps family absent
    std::vector<std::string> missing_from_population;
};

struct FamilyJoin {
    Population population;
    FamilyJoinStats stats;
};

/// Attaches family labels. Records listed with an empty label end up with no family.
inline FamilyJoin join_families(const Population& pop, const FamilyTable& table) {
    std::vector<ApkRecord> records = pop.records();
    FamilyJoinStats stats;
    auto locate = [&](const std::string& sha) -> ApkRecord* {
        auto it = std::lower_bound(records.begin(), records.end(), sha,
                                   [](const ApkRecord& r, const std::string& h) { return r.sha256 < h; });
        return (it != records.end() && it->sha256 == sha) ? &*it : nullptr;
    };
    for (const auto& [sha, fam] : table.families) {
        if (auto* r = locate(sha)) {
            r->family = fam;
            ++stats.matched;
        } else {
            stats.missing_from_population.push_back(sha);
        }
    }
    for (const auto& sha : table.unlabeled) {
        if (auto* r = locate(sha)) {
            r->family.reset();
            ++stats.cleared;
        } else {
            stats.missing_from_population.push_back(sha);
        }
    }
    return {Population(std::move(records), pop.provenance(), pop.snapshot_date()), std::move(stats)};
}

// ---------------------------------------------------------------------------
// Predictions.

inline constexpr double kDefaultPredictionThreshold = 0.5;

struct PredictionRow {
    std::string sha256;
    double score = 0.0;
    std::optional<int> predicted_label;
    /// Rolling-split index the row belongs to; absent applies to every split.
    std::optional<int> split;
};

class PredictionSet {
public:
    PredictionSet() = default;
    PredictionSet(std::string name, std::vector<PredictionRow> rows, double threshold = kDefaultPredictionThreshold)
        : name_(std::move(name)), rows_(std::move(rows)), threshold_(threshold) {
        for (std::size_t i = 0; i < rows_.size(); ++i) index_[key(rows_[i].sha256, rows_[i].split)] = i;
    }

    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] const std::vector<PredictionRow>& rows() const { return rows_; }
    [[nodiscard]] double threshold() const { return threshold_; }

    /// Row for a hash under a given split; split-specific rows win over generic ones.
    [[nodiscard]] const PredictionRow* find(std::string_view sha, std::optional<int> split = std::nullopt) const {
        if (split) {
            if (auto it = index_.find(key(sha, split)); it != index_.end()) return &rows_[it->second];
        }
        if (auto it = index_.find(key(sha, std::nullopt)); it != index_.end()) return &rows_[it->second];
        return nullptr;
    }

    /// Positive means "predicted malware". Score ties with the threshold are positive.
    [[nodiscard]] bool predicted_positive(const PredictionRow& row) const {
        if (row.predicted_label) return *row.predicted_label == 1;
        return row.score >= threshold_;
    }

private:
    static std::string key(std::string_view sha, std::optional<int> split) {
        return std::string(sha) + '#' + (split ? std::to_string(*split) : std::string("*"));
    }

    std::string name_;
    std::vector<PredictionRow> rows_;
    double threshold_ = kDefaultPredictionThreshold;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ParsedPredictions {
    PredictionSet predictions;
    ParseStats stats;
};

/// Parses "sha256,score[,label][,split]". Scores outside [0,1] need a label.
inline ParsedPredictions parse_predictions(std::string_view text, std::string name = {},
                                           double threshold = kDefaultPredictionThreshold, bool strict = false) {
    io::LineReader lines(text);
    std::string_view line;
    bool have_header = false;
    while (lines.next(line)) {
        if (!detail::trim(line).empty()) {
            have_header = true;
            break;
        }
    }
    if (!have_header) throw FormatError("empty prediction input");
    detail::Header header(io::split_csv_line(line));
    const auto c_sha = header.require("sha256");
    const auto c_score = header.require("score");
    const auto c_label = header.find("label");
    const auto c_split = header.find("split");

    ParseStats stats;
    std::vector<PredictionRow> rows;
    std::unordered_map<std::string, std::size_t> seen;
    while (lines.next(line)) {
        if (detail::trim(line).empty()) continue;
        ++stats.rows;
        try {
            auto fields = io::split_csv_line(line);
            PredictionRow row;
            row.sha256 = normalize_sha256(detail::field_at(fields, c_sha));
            if (!detail::parse_double(detail::field_at(fields, c_score), row.score)) {
                throw FormatError("invalid score");
            }
            if (auto v = detail::field_at(fields, c_label); !v.empty()) {
                int label = 0;
                if (!detail::parse_int(v, label) || (label != 0 && label != 1)) throw FormatError("label must be 0 or 1");
                row.predicted_label = label;
            }
            if (auto v = detail::field_at(fields, c_split); !v.empty()) {
                int split = 0;
                if (!detail::parse_int(v, split) || split < 0) throw FormatError("invalid split index");
                row.split = split;
            }
            if (!row.predicted_label && (row.score < 0.0 || row.score > 1.0)) {
                throw FormatError("score outside [0,1] without a label");
            }
            auto k = row.sha256 + '#' + (row.split ? std::to_string(*row.split) : "*");
            if (auto it = seen.find(k); it != seen.end()) {
                ++stats.duplicates;
                rows[it->second] = std::move(row);
            } else {
                seen.emplace(std::move(k), rows.size());
                rows.push_back(std::move(row));
            }
        } catch (const Error& e) {
            if (strict) throw FormatError("line " + std::to_string(lines.line_number()) + ": " + e.what());
            ++stats.malformed;
            stats.note("line " + std::to_string(lines.line_number()) + ": " + e.what());
        }
    }
    stats.parsed = rows.size();
    return {PredictionSet(std::move(name), std::move(rows), threshold), stats};
}

// ---------------------------------------------------------------------------
// Snapshot emulation.

struct SnapshotResult {
    Population population;
    std::size_t dropped_missing_crawl = 0;
    std::size_t dropped_late = 0;
    std::size_t dropped_out_of_range = 0;
};

/// End of the given calendar day, for inclusive date cutoffs.
inline Timestamp end_of_day(Timestamp day) {
    auto start = day.seconds - ((day.seconds % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
    return Timestamp{start + kSecondsPerDay - 1};
}

/// Keeps records with crawl_date <= cutoff. Records without crawl_date are dropped.
inline SnapshotResult snapshot_filter(const Population& pop, Timestamp cutoff) {
    SnapshotResult out;
    std::vector<ApkRecord> kept;
    for (const auto& r : pop) {
        if (!r.crawl_date) {
            ++out.dropped_missing_crawl;
        } else if (*r.crawl_date > cutoff) {
            ++out.dropped_late;
        } else {
            kept.push_back(r);
        }
    }
    auto snapshot = pop.snapshot_date() ? std::min(*pop.snapshot_date(), cutoff) : cutoff;
    out.population = Population(std::move(kept), pop.provenance(), snapshot);
    return out;
}

/// One leg of a piecewise snapshot: records whose dex_date falls within
/// [dex_from, dex_to] (inclusive periods) are cut at `cutoff`.
struct SnapshotPiece {
    Period dex_from;
    Period dex_to;
    Timestamp cutoff;
};

/// Union of per-dex-range snapshots. Records outside every range are dropped.
inline SnapshotResult snapshot_filter_piecewise(const Population& pop, const std::vector<SnapshotPiece>& pieces) {
    if (pieces.empty()) throw UsageError("piecewise snapshot needs at least one piece");
    SnapshotResult out;
    std::vector<ApkRecord> kept;
    Timestamp latest = pieces.front().cutoff;
    for (const auto& p : pieces) {
        if (p.dex_from.granularity != p.dex_to.granularity || p.dex_to < p.dex_from) {
            throw UsageError("invalid snapshot piece range");
        }
        latest = std::max(latest, p.cutoff);
    }
    for (const auto& r : pop) {
        const SnapshotPiece* piece = nullptr;
        for (const auto& p : pieces) {
            if (r.dex_date >= p.dex_from.begin() && r.dex_date < p.dex_to.end()) {
                piece = &p;
                break;
            }
        }
        if (!piece) {
            ++out.dropped_out_of_range;
        } else if (!r.crawl_date) {
            ++out.dropped_missing_crawl;
        } else if (*r.crawl_date > piece->cutoff) {
            ++out.dropped_late;
        } else {
            kept.push_back(r);
        }
    }
    out.population = Population(std::move(kept), pop.provenance(), latest);
    return out;
}

}  // namespace biaskit
