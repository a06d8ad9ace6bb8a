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
#include "biaskit/ingest.hpp"
#include "biaskit/labeling.hpp"
#include "biaskit/sampler.hpp"

namespace biaskit {

struct MetricPoint {
    Period period;
    std::optional<double> value;  // absent when the metric is undefined for the period

    friend bool operator==(const MetricPoint&, const MetricPoint&) = default;
};

struct MetricSeries {
    std::string metric;
    std::vector<MetricPoint> points;

    void validate() const {
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (points[i].period.granularity != points[0].period.granularity) {
                throw DomainError("metric series mixes granularities");
            }
            if (!(points[i - 1].period < points[i].period)) throw DomainError("metric series periods not ascending");
        }
    }
    [[nodiscard]] bool complete() const {
        return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.value.has_value(); });
    }
    /// The series restricted to defined points.
    [[nodiscard]] MetricSeries defined_only() const {
        MetricSeries out{metric, {}};
        for (const auto& p : points) {
            if (p.value) out.points.push_back(p);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Confusion metrics.

struct Confusion {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    [[nodiscard]] std::optional<double> precision() const {
        if (tp + fp == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    [[nodiscard]] std::optional<double> recall() const {
        if (tp + fn == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    [[nodiscard]] std::optional<double> fpr() const {
        if (fp + tn == 0) return std::nullopt;
        return static_cast<double>(fp) / static_cast<double>(fp + tn);
    }
    /// Undefined without positives in the window.
    [[nodiscard]] std::optional<double> f1() const {
        if (tp + fn == 0) return std::nullopt;
        return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }

    friend bool operator==(const Confusion&, const Confusion&) = default;
};

enum class Metric { F1, FPR, TPR, Precision, Recall };

inline std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::F1: return "f1";
        case Metric::FPR: return "fpr";
        case Metric::TPR: return "tpr";
        case Metric::Precision: return "precision";
        case Metric::Recall: return "recall";
    }
    return "?";
}

inline Metric parse_metric(std::string_view s) {
    if (s == "f1") return Metric::F1;
    if (s == "fpr") return Metric::FPR;
    if (s == "tpr") return Metric::TPR;
    if (s == "precision") return Metric::Precision;
    if (s == "recall") return Metric::Recall;
    throw UsageError("unknown metric '" + std::string(s) + "' (expected f1|fpr|tpr|precision|recall)");
}

inline std::optional<double> metric_value(const Confusion& c, Metric m) {
    switch (m) {
        case Metric::F1: return c.f1();
        case Metric::FPR: return c.fpr();
        case Metric::TPR:
        case Metric::Recall: return c.recall();
        case Metric::Precision: return c.precision();
    }
    return std::nullopt;
}

struct ConfusionReport {
    std::map<Period, Confusion> counts;
    std::vector<std::string> missing;  // truth hashes without a prediction (lenient mode)

    [[nodiscard]] MetricSeries series(Metric m) const {
        MetricSeries s{std::string(to_string(m)), {}};
        for (const auto& [p, c] : counts) s.points.push_back({p, metric_value(c, m)});
        return s;
    }
};

struct ConfusionOptions {
    Granularity per = Granularity::Month;
    /// Periods to report; defaults to the contiguous range spanned by the truth slice.
    std::optional<std::vector<Period>> periods;
    /// Restrict prediction lookup to this rolling split.
    std::optional<int> split;
    bool lenient = false;
};

/// Per-period confusion counts. Positives are malware; greyware entries are ignored.
inline ConfusionReport confusion_metrics(std::span<const ManifestEntry> truth, const PredictionSet& preds,
                                         const ConfusionOptions& opts = {}) {
    ConfusionReport rep;
    if (opts.periods) {
        for (auto p : *opts.periods) {
            if (p.granularity != opts.per) throw UsageError("requested period granularity mismatch");
            rep.counts[p];
        }
    } else if (!truth.empty()) {
        Period lo = period_of(truth.front().date, opts.per), hi = lo;
        for (const auto& e : truth) {
            auto p = period_of(e.date, opts.per);
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        for (auto p : period_range(lo, hi)) rep.counts[p];
    }
    for (const auto& e : truth) {
        if (e.label == ClassLabel::Greyware) continue;
        auto it = rep.counts.find(period_of(e.date, opts.per));
        if (it == rep.counts.end()) continue;
        const auto* row = preds.find(e.sha256, opts.split);
        if (!row) {
            rep.missing.push_back(e.sha256);
            continue;
        }
        const bool actual = e.label == ClassLabel::Malware;
        const bool predicted = preds.predicted_positive(*row);
        auto& c = it->second;
        if (actual && predicted) ++c.tp;
        else if (actual) ++c.fn;
        else if (predicted) ++c.fp;
        else ++c.tn;
    }
    if (!rep.missing.empty() && !opts.lenient) {
        std::string list;
        for (std::size_t i = 0; i < rep.missing.size() && i < 10; ++i) list += " " + rep.missing[i];
        if (rep.missing.size() > 10) list += " ...";
        throw ResolutionError(std::to_string(rep.missing.size()) + " truth hashes lack a prediction in '" +
                              preds.name() + "':" + list);
    }
    return rep;
}

/// Every prediction must refer to a manifest entry.
inline std::vector<std::string> unresolved_predictions(const PredictionSet& preds, std::span<const ManifestEntry> manifest) {
    std::set<std::string_view> known;
    for (const auto& e : manifest) known.insert(e.sha256);
    std::vector<std::string> out;
    for (const auto& r : preds.rows()) {
        if (!known.count(r.sha256)) out.push_back(r.sha256);
    }
    return out;
}

// ---------------------------------------------------------------------------
// AUT and A-AUT.

/// Trapezoidal area under a unit-spaced series, normalised to [0,1].
inline double aut(std::span<const double> values) {
    if (values.empty()) throw DomainError("aut: empty series");
    if (values.size() == 1) return values.front();
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) area += (values[i] + values[i + 1]) / 2.0;
    return area / static_cast<double>(values.size() - 1);
}

inline double aut(const MetricSeries& series) {
    series.validate();
    std::vector<double> values;
    values.reserve(series.points.size());
    for (const auto& p : series.points) {
        if (!p.value) throw DomainError("aut: series '" + series.metric + "' has an undefined value at " + p.period.label());
        values.push_back(*p.value);
    }
    return aut(values);
}

struct AAut {
    double mu = 0.0;
    double sigma = 0.0;  // population standard deviation
};

inline AAut a_aut(std::span<const double> auts) {
    if (auts.empty()) throw DomainError("a_aut: no AUT values");
    double sum = 0.0;
    for (double v : auts) sum += v;
    const double mu = sum / static_cast<double>(auts.size());
    double ss = 0.0;
    for (double v : auts) ss += (v - mu) * (v - mu);
    return {mu, std::sqrt(ss / static_cast<double>(auts.size()))};
}

// ---------------------------------------------------------------------------
// Rolling temporal splits.

struct Split {
    std::vector<Period> train;
    std::vector<Period> test;

    [[nodiscard]] std::string label() const {
        auto span_label = [](const std::vector<Period>& ps) {
            const auto& a = ps.front();
            const auto& b = ps.back();
            if (a.calendar_month() == 1 && b.calendar_month() == 12) {
                return a.calendar_year() == b.calendar_year()
                           ? std::to_string(a.calendar_year())
                           : std::to_string(a.calendar_year()) + "-" + std::to_string(b.calendar_year());
            }
            return a == b ? a.label() : a.label() + ".." + b.label();
        };
        return span_label(train) + "|" + span_label(test);
    }
};

struct SplitPlan {
    int window_months = 0;
    std::vector<Split> splits;
};

/// Train on N months, test on the following N; shift by N until the range is used up.
inline SplitPlan rolling_splits(Period first, Period last, int window_months, bool allow_partial_last = false) {
    if (first.granularity != Granularity::Month || last.granularity != Granularity::Month) {
        throw UsageError("rolling_splits expects month periods");
    }
    if (window_months < 1) throw DomainError("window must be >= 1 month");
    const int span = distance(first, last) + 1;
    if (span < 2 * window_months) {
        throw DomainError("range of " + std::to_string(span) + " months is shorter than two windows of " +
                          std::to_string(window_months));
    }
    SplitPlan plan;
    plan.window_months = window_months;
    for (int t = 0; t + window_months < span; t += window_months) {
        const int test_len = std::min(window_months, span - t - window_months);
        if (test_len < window_months && !allow_partial_last) break;
        Split s;
        for (int i = 0; i < window_months; ++i) s.train.push_back({Granularity::Month, first.index + t + i});
        for (int i = 0; i < test_len; ++i) s.test.push_back({Granularity::Month, first.index + t + window_months + i});
        plan.splits.push_back(std::move(s));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Family overlap.

struct OverlapResult {
    double phi = 0.0;
    std::size_t size = 0;
    std::size_t matched = 0;
    std::size_t unlabeled = 0;  // counted as non-overlapping
};

/// Share of `slice` whose family occurs in `reference`. Unlabeled samples never match.
inline OverlapResult family_overlap(std::span<const std::optional<std::string>> slice,
                                    std::span<const std::optional<std::string>> reference) {
    if (slice.empty()) throw DomainError("family_overlap: empty slice");
    std::set<std::string_view> known;
    for (const auto& f : reference) {
        if (f) known.insert(*f);
    }
    OverlapResult r;
    r.size = slice.size();
    for (const auto& f : slice) {
        if (!f) ++r.unlabeled;
        else if (known.count(*f)) ++r.matched;
    }
    r.phi = static_cast<double>(r.matched) / static_cast<double>(r.size);
    return r;
}

struct MalwareObservation {
    Timestamp date;
    std::optional<std::string> family;
};

inline std::vector<MalwareObservation> malware_observations(const DatasetManifest& m) {
    std::vector<MalwareObservation> out;
    for (const auto& e : m.entries) {
        if (e.label == ClassLabel::Malware) out.push_back({e.date, e.family});
    }
    return out;
}

inline std::vector<MalwareObservation> malware_observations(const Population& pop, const LabelRule& rule,
                                                            const TimestampPolicy& policy) {
    std::vector<MalwareObservation> out;
    for (const auto& r : pop) {
        auto l = try_label(r, rule);
        auto d = timeline_date(r, policy);
        if (l && *l == ClassLabel::Malware && d) out.push_back({*d, r.family});
    }
    return out;
}

/// Family overlap of each test period's malware against the reference period's.
/// A test period without malware yields an undefined point.
inline MetricSeries overlap_series(std::span<const MalwareObservation> malware, Period reference,
                                   const std::vector<Period>& tests) {
    auto bucket = [&](Period p) {
        std::vector<std::optional<std::string>> fams;
        for (const auto& o : malware) {
            if (period_of(o.date, p.granularity) == p) fams.push_back(o.family);
        }
        return fams;
    };
    const auto ref = bucket(reference);
    MetricSeries s{"family_overlap", {}};
    for (auto p : tests) {
        auto fams = bucket(p);
        s.points.push_back({p, fams.empty() ? std::nullopt : std::optional<double>(family_overlap(fams, ref).phi)});
    }
    s.validate();
    return s;
}

}  // namespace biaskit
