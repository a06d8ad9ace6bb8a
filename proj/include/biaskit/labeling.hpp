#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "biaskit/core.hpp"

namespace biaskit {

/// VirusTotal-threshold labeling: 0 detections is goodware, [1, vtt) greyware,
/// and vtt or more malware.
struct LabelRule {
    std::uint32_t vtt = 4;

    void validate() const {
        if (vtt < 1) throw DomainError("vtt must be >= 1");
    }
};

inline ClassLabel label_detections(std::uint32_t detections, const LabelRule& rule) {
    rule.validate();
    if (detections == 0) return ClassLabel::Goodware;
    return detections >= rule.vtt ? ClassLabel::Malware : ClassLabel::Greyware;
}

inline std::optional<ClassLabel> try_label(const ApkRecord& r, const LabelRule& rule) {
    if (!r.vt_detection) return std::nullopt;
    return label_detections(*r.vt_detection, rule);
}

inline ClassLabel label(const ApkRecord& r, const LabelRule& rule) {
    if (!r.vt_detection) throw DomainError("record " + r.sha256 + " has no vt_detection");
    return label_detections(*r.vt_detection, rule);
}

struct LabelCounts {
    std::size_t goodware = 0;
    std::size_t greyware = 0;
    std::size_t malware = 0;
    std::size_t unknown = 0;  // no vt_detection

    [[nodiscard]] std::size_t labeled() const { return goodware + greyware + malware; }
};

inline LabelCounts label_counts(const Population& pop, const LabelRule& rule) {
    LabelCounts c;
    for (const auto& r : pop) {
        auto l = try_label(r, rule);
        if (!l) ++c.unknown;
        else if (*l == ClassLabel::Goodware) ++c.goodware;
        else if (*l == ClassLabel::Greyware) ++c.greyware;
        else ++c.malware;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Timestamp policy.

enum class TimestampKind { CreationDex, CreationVt, PublicationCrawl };

inline std::string_view to_string(TimestampKind k) {
    switch (k) {
        case TimestampKind::CreationDex: return "dex";
        case TimestampKind::CreationVt: return "vt";
        case TimestampKind::PublicationCrawl: return "crawl";
    }
    return "?";
}

inline TimestampKind parse_timestamp_kind(std::string_view s) {
    if (s == "dex" || s == "creation_dex") return TimestampKind::CreationDex;
    if (s == "vt" || s == "creation_vt") return TimestampKind::CreationVt;
    if (s == "crawl" || s == "publication_crawl") return TimestampKind::PublicationCrawl;
    throw UsageError("unknown timestamp kind '" + std::string(s) + "' (expected dex|vt|crawl)");
}

struct TimestampPolicy {
    TimestampKind kind = TimestampKind::PublicationCrawl;
    std::optional<TimestampKind> fallback;
};

inline std::optional<Timestamp> timestamp_field(const ApkRecord& r, TimestampKind k) {
    switch (k) {
        case TimestampKind::CreationDex: return r.dex_date;
        case TimestampKind::CreationVt: return r.vt_scan_date;
        case TimestampKind::PublicationCrawl: return r.crawl_date;
    }
    return std::nullopt;
}

struct DatedBy {
    Timestamp date;
    TimestampKind source;
};

inline std::optional<DatedBy> timeline_source(const ApkRecord& r, const TimestampPolicy& policy) {
    if (auto t = timestamp_field(r, policy.kind)) return DatedBy{*t, policy.kind};
    if (policy.fallback) {
        if (auto t = timestamp_field(r, *policy.fallback)) return DatedBy{*t, *policy.fallback};
    }
    return std::nullopt;
}

inline std::optional<Timestamp> timeline_date(const ApkRecord& r, const TimestampPolicy& policy) {
    auto d = timeline_source(r, policy);
    return d ? std::optional<Timestamp>(d->date) : std::nullopt;
}

// ---------------------------------------------------------------------------
// Timestamp lag.

struct LagSummary {
    std::size_t count = 0;
    std::size_t excluded = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    std::map<std::int64_t, std::size_t> histogram;  // floor(lag days) -> count
};

namespace detail {
// Linear interpolation between order statistics (the common "type 7" rule).
inline double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) return 0.0;
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}
}  // namespace detail

/// Distribution of (b - a) in days over records carrying both fields.
inline LagSummary timestamp_lag_stats(const Population& pop, TimestampKind a, TimestampKind b) {
    LagSummary s;
    std::vector<double> lags;
    for (const auto& r : pop) {
        auto ta = timestamp_field(r, a);
        auto tb = timestamp_field(r, b);
        if (!ta || !tb) {
            ++s.excluded;
            continue;
        }
        const double days = static_cast<double>(tb->seconds - ta->seconds) / static_cast<double>(kSecondsPerDay);
        lags.push_back(days);
        ++s.histogram[static_cast<std::int64_t>(std::floor(days))];
    }
    if (lags.empty()) throw DomainError("no record carries both timestamp fields");
    std::sort(lags.begin(), lags.end());
    s.count = lags.size();
    s.median = detail::quantile_sorted(lags, 0.5);
    s.q1 = detail::quantile_sorted(lags, 0.25);
    s.q3 = detail::quantile_sorted(lags, 0.75);
    return s;
}

// ---------------------------------------------------------------------------
// Market statistics.

/// A record's market tags together with its class, the unit every market
/// statistic is computed over.
struct LabeledMarkets {
    ClassLabel label;
    const std::vector<std::string>* markets;
};

inline std::vector<LabeledMarkets> labeled_markets(const Population& pop, const LabelRule& rule) {
    std::vector<LabeledMarkets> out;
    out.reserve(pop.size());
    for (const auto& r : pop) {
        if (auto l = try_label(r, rule)) out.push_back({*l, &r.markets});
    }
    return out;
}

struct CompositionRow {
    std::size_t goodware = 0;
    std::size_t malware = 0;
    std::optional<double> goodware_pct;
    std::optional<double> malware_pct;
};

struct CompositionTable {
    std::size_t goodware_total = 0;
    std::size_t malware_total = 0;
    std::map<std::string, CompositionRow> rows;
};

/// Per market, the percentage of each class's records carrying that tag.
/// Multi-market records count toward every tag they carry.
inline CompositionTable market_composition(std::span<const LabeledMarkets> items) {
    CompositionTable t;
    for (const auto& it : items) {
        if (it.label == ClassLabel::Greyware) continue;
        const bool mw = it.label == ClassLabel::Malware;
        (mw ? t.malware_total : t.goodware_total)++;
        for (const auto& m : *it.markets) {
            auto& row = t.rows[m];
            (mw ? row.malware : row.goodware)++;
        }
    }
    for (auto& [_, row] : t.rows) {
        if (t.goodware_total) row.goodware_pct = 100.0 * static_cast<double>(row.goodware) / static_cast<double>(t.goodware_total);
        if (t.malware_total) row.malware_pct = 100.0 * static_cast<double>(row.malware) / static_cast<double>(t.malware_total);
    }
    return t;
}

inline CompositionTable market_composition(const Population& pop, const LabelRule& rule) {
    auto items = labeled_markets(pop, rule);
    return market_composition(items);
}

/// Ordering used to attribute a multi-market record to a single market.
/// Tags absent from the list rank after it, alphabetically.
class MarketPriority {
public:
    MarketPriority() : MarketPriority(default_order()) {}
    explicit MarketPriority(std::vector<std::string> order) : order_(std::move(order)) {}

    static std::vector<std::string> default_order() {
        return {"angeeks", "anzhi",      "apk_bang",   "appchina",   "fdroid",  "freewarelovers",
                "genome",  "hiapk",      "mi.com",     "PlayDrone",  "play.google.com",
                "praguard", "proandroid", "slideme",   "unknown",    "VirusShare", "1mobile"};
    }

    [[nodiscard]] const std::string& attribute(const std::vector<std::string>& markets) const {
        if (markets.empty()) throw DomainError("record without market tags");
        const std::string* best = &markets.front();
        std::size_t best_rank = rank(*best);
        for (const auto& m : markets) {
            auto r = rank(m);
            if (r < best_rank || (r == best_rank && m < *best)) {
                best = &m;
                best_rank = r;
            }
        }
        return *best;
    }

    [[nodiscard]] const std::vector<std::string>& order() const { return order_; }

private:
    [[nodiscard]] std::size_t rank(const std::string& m) const {
        auto it = std::find(order_.begin(), order_.end(), m);
        return it == order_.end() ? order_.size() : static_cast<std::size_t>(it - order_.begin());
    }

    std::vector<std::string> order_;
};

using Distribution = std::map<std::string, double>;

/// Half the L1 distance between two discrete distributions over string keys.
inline double tv_distance(const Distribution& p, const Distribution& q) {
    std::set<std::string> keys;
    for (const auto& [k, _] : p) keys.insert(k);
    for (const auto& [k, _] : q) keys.insert(k);
    double sum = 0.0;
    for (const auto& k : keys) {
        auto a = p.count(k) ? p.at(k) : 0.0;
        auto b = q.count(k) ? q.at(k) : 0.0;
        sum += std::abs(a - b);
    }
    return std::clamp(0.5 * sum, 0.0, 1.0);
}

inline constexpr double kDefaultConsistencyThreshold = 0.10;

struct ConsistencyResult {
    double tv_distance = 0.0;
    bool pass = false;
    double threshold = kDefaultConsistencyThreshold;
    Distribution goodware;
    Distribution malware;
};

inline ConsistencyResult market_consistency(std::span<const LabeledMarkets> items,
                                            double threshold = kDefaultConsistencyThreshold,
                                            const MarketPriority& priority = {}) {
    std::map<std::string, std::size_t> gw, mw;
    std::size_t ngw = 0, nmw = 0;
    for (const auto& it : items) {
        if (it.label == ClassLabel::Greyware) continue;
        const auto& tag = priority.attribute(*it.markets);
        if (it.label == ClassLabel::Malware) {
            ++mw[tag];
            ++nmw;
        } else {
            ++gw[tag];
            ++ngw;
        }
    }
    if (ngw == 0 || nmw == 0) throw DomainError("market consistency undefined: a class is empty");
    ConsistencyResult res;
    res.threshold = threshold;
    for (const auto& [k, c] : gw) res.goodware[k] = static_cast<double>(c) / static_cast<double>(ngw);
    for (const auto& [k, c] : mw) res.malware[k] = static_cast<double>(c) / static_cast<double>(nmw);
    res.tv_distance = tv_distance(res.goodware, res.malware);
    res.pass = res.tv_distance <= threshold;
    return res;
}

inline ConsistencyResult market_consistency(const Population& pop, const LabelRule& rule,
                                            double threshold = kDefaultConsistencyThreshold,
                                            const MarketPriority& priority = {}) {
    auto items = labeled_markets(pop, rule);
    return market_consistency(items, threshold, priority);
}

// ---------------------------------------------------------------------------
// VT threshold analysis.

/// Share of detected samples (d >= 1) that reach the threshold.
inline double vtt_coverage(const Population& pop, std::uint32_t vtt) {
    LabelRule{vtt}.validate();
    std::size_t detected = 0, captured = 0;
    for (const auto& r : pop) {
        if (!r.vt_detection || *r.vt_detection == 0) continue;
        ++detected;
        if (*r.vt_detection >= vtt) ++captured;
    }
    if (detected == 0) throw DomainError("vtt_coverage: no record with detections");
    return static_cast<double>(captured) / static_cast<double>(detected);
}

struct HeatmapRow {
    std::uint32_t vtt = 0;
    std::size_t samples = 0;
    /// Absent when no record reaches this threshold.
    std::optional<std::map<std::string, double>> market_pct;
};

inline std::vector<HeatmapRow> vtt_market_heatmap(const Population& pop, const std::vector<std::uint32_t>& vtts) {
    std::vector<HeatmapRow> out;
    for (auto vtt : vtts) {
        LabelRule{vtt}.validate();
        HeatmapRow row{vtt, 0, std::nullopt};
        std::map<std::string, std::size_t> counts;
        for (const auto& r : pop) {
            if (!r.vt_detection || *r.vt_detection < vtt) continue;
            ++row.samples;
            for (const auto& m : r.markets) ++counts[m];
        }
        if (row.samples > 0) {
            std::map<std::string, double> pct;
            for (const auto& [m, c] : counts) pct[m] = 100.0 * static_cast<double>(c) / static_cast<double>(row.samples);
            row.market_pct = std::move(pct);
        }
        out.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Market filter.

/// Keeps records carrying at least one of the given tags.
inline Population filter_markets(const Population& pop, const std::set<std::string>& allowed) {
    if (allowed.empty()) return pop;
    std::vector<ApkRecord> kept;
    for (const auto& r : pop) {
        if (std::any_of(r.markets.begin(), r.markets.end(), [&](const auto& m) { return allowed.count(m) > 0; })) {
            kept.push_back(r);
        }
    }
    return Population(std::move(kept), pop.provenance(), pop.snapshot_date());
}

}  // namespace biaskit
