#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "biaskit/metrics.hpp"

namespace biaskit {

/// AUT of one prediction set on one rolling split.
struct SplitScore {
    double aut = 0.0;
    /// AUT over all test months, absent if some month's metric is undefined.
    std::optional<double> aut_all_months;
    /// AUT over the months where the metric is defined.
    std::optional<double> aut_defined_months;
    std::size_t months = 0;
    std::size_t defined_months = 0;
    MetricSeries series;
};

struct ReportRow {
    std::string name;
    std::vector<SplitScore> splits;
    AAut summary;

    [[nodiscard]] std::vector<double> auts() const {
        std::vector<double> v;
        for (const auto& s : splits) v.push_back(s.aut);
        return v;
    }
};

struct EvaluationReport {
    Metric metric = Metric::F1;
    int window_months = 0;
    std::vector<std::string> split_labels;
    std::vector<ReportRow> rows;  // ranked
};

/// Higher mean first; equal means go to the more stable (lower sigma) row.
inline void rank_rows(std::vector<ReportRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (a.summary.mu != b.summary.mu) return a.summary.mu > b.summary.mu;
        if (a.summary.sigma != b.summary.sigma) return a.summary.sigma < b.summary.sigma;
        return a.name < b.name;
    });
}

/// A row from externally computed per-split AUT values.
inline ReportRow row_from_auts(std::string name, const std::vector<double>& auts) {
    ReportRow row;
    row.name = std::move(name);
    for (double a : auts) {
        if (!(a >= 0.0 && a <= 1.0)) throw DomainError("AUT value outside [0,1] for '" + row.name + "'");
        SplitScore s;
        s.aut = a;
        s.aut_all_months = a;
        row.splits.push_back(std::move(s));
    }
    row.summary = a_aut(auts);
    return row;
}

struct EvaluateOptions {
    Metric metric = Metric::F1;
    bool lenient = false;
};

/// Scores one prediction set on every split. Each split's test slice is the
/// manifest's entries dated inside the test months; predictions tagged with a
/// split index apply to that split only.
inline ReportRow evaluate_predictions(const DatasetManifest& manifest, const SplitPlan& plan,
                                      const PredictionSet& preds, const EvaluateOptions& opts = {}) {
    if (auto stray = unresolved_predictions(preds, manifest.entries); !stray.empty()) {
        throw ResolutionError(std::to_string(stray.size()) + " predictions in '" + preds.name() +
                              "' do not resolve against the manifest, e.g. " + stray.front());
    }
    ReportRow row;
    row.name = preds.name();
    for (std::size_t i = 0; i < plan.splits.size(); ++i) {
        const auto& split = plan.splits[i];
        std::vector<ManifestEntry> slice;
        for (const auto& e : manifest.entries) {
            if (e.period >= split.test.front() && e.period <= split.test.back()) slice.push_back(e);
        }
        ConfusionOptions copts;
        copts.per = Granularity::Month;
        copts.periods = split.test;
        copts.split = static_cast<int>(i);
        copts.lenient = opts.lenient;
        auto rep = confusion_metrics(slice, preds, copts);
        SplitScore score;
        score.series = rep.series(opts.metric);
        score.months = score.series.points.size();
        auto defined = score.series.defined_only();
        score.defined_months = defined.points.size();
        if (score.series.complete()) score.aut_all_months = aut(score.series);
        if (!defined.points.empty()) score.aut_defined_months = aut(defined);
        if (score.aut_all_months) {
            score.aut = *score.aut_all_months;
        } else if (score.aut_defined_months) {
            score.aut = *score.aut_defined_months;
        } else {
            throw DomainError("split " + split.label() + ": metric undefined in every test month for '" +
                              preds.name() + "'");
        }
        row.splits.push_back(std::move(score));
    }
    row.summary = a_aut(row.auts());
    return row;
}

// ---------------------------------------------------------------------------
// Rendering. Raw values carry 4 decimals; display columns carry 2.

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string render_markdown(const EvaluationReport& r) {
    std::string out = "| Classifier |";
    for (const auto& l : r.split_labels) {
        std::string esc;
        for (char c : l) {
            if (c == '|') esc += "\\|";
            else esc += c;
        }
        out += " " + esc + " |";
    }
    out += " mu_AUT | sigma_AUT | mu (2dp) | sigma (2dp) |\n|---|";
    for (std::size_t i = 0; i < r.split_labels.size(); ++i) out += "---:|";
    out += "---:|---:|---:|---:|\n";
    for (const auto& row : r.rows) {
        out += "| " + row.name + " |";
        for (const auto& s : row.splits) {
            out += " " + fixed(s.aut, 4);
            if (!s.aut_all_months) out += "*";
            out += " |";
        }
        out += " " + fixed(row.summary.mu, 4) + " | " + fixed(row.summary.sigma, 4) + " | " + fixed(row.summary.mu, 2) +
               " | " + fixed(row.summary.sigma, 2) + " |\n";
    }
    bool partial = false;
    for (const auto& row : r.rows) {
        for (const auto& s : row.splits) partial |= !s.aut_all_months;
    }
    if (partial) out += "\n\\* AUT over the months where " + std::string(to_string(r.metric)) + " is defined.\n";
    return out;
}

inline std::string render_csv(const EvaluationReport& r) {
    std::string out = "rank,name";
    for (std::size_t i = 0; i < r.split_labels.size(); ++i) out += ",aut_" + std::to_string(i + 1);
    out += ",mu_aut,sigma_aut,mu_aut_2dp,sigma_aut_2dp\n";
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
        const auto& row = r.rows[k];
        out += std::to_string(k + 1) + "," + io::csv_escape(row.name);
        for (const auto& s : row.splits) out += "," + fixed(s.aut, 4);
        out += "," + fixed(row.summary.mu, 4) + "," + fixed(row.summary.sigma, 4) + "," + fixed(row.summary.mu, 2) + "," +
               fixed(row.summary.sigma, 2) + "\n";
    }
    return out;
}

inline nlohmann::json to_json(const MetricSeries& s) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : s.points) pts.push_back({{"period", p.period.label()}, {"value", p.value ? nlohmann::json(*p.value) : nlohmann::json()}});
    return {{"metric", s.metric}, {"points", pts}};
}

inline nlohmann::json to_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["metric"] = to_string(r.metric);
    j["window_months"] = r.window_months;
    j["splits"] = r.split_labels;
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json splits = nlohmann::json::array();
        for (const auto& s : row.splits) {
            nlohmann::json js{{"aut", s.aut},
                              {"aut_all_months", s.aut_all_months ? nlohmann::json(*s.aut_all_months) : nlohmann::json()},
                              {"aut_defined_months",
                               s.aut_defined_months ? nlohmann::json(*s.aut_defined_months) : nlohmann::json()},
                              {"months", s.months},
                              {"defined_months", s.defined_months}};
            if (!s.series.points.empty()) js["series"] = to_json(s.series);
            splits.push_back(std::move(js));
        }
        rows.push_back({{"name", row.name}, {"splits", splits}, {"mu_aut", row.summary.mu}, {"sigma_aut", row.summary.sigma}});
    }
    return j;
}

inline std::string render_series_csv(const MetricSeries& s) {
    std::string out = "period," + s.metric + "\n";
    for (const auto& p : s.points) out += p.period.label() + "," + (p.value ? fixed(*p.value, 4) : std::string()) + "\n";
    return out;
}

}  // namespace biaskit
