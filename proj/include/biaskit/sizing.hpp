#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "biaskit/core.hpp"
#include "biaskit/labeling.hpp"

namespace biaskit {

/// Inverse of the standard normal CDF. Acklam's rational approximation
/// followed by one Halley step against erfc, good to ~1e-15 absolute.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0,1)");
    static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                             6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                             3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

struct SizingParams {
    double confidence = 0.99;
    double delta = 0.015;
    double p = 0.5;
    std::optional<std::uint32_t> bonferroni_m;

    void validate() const {
        if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0,1)");
        if (!(delta > 0.0 && delta < 1.0)) throw DomainError("margin of error must lie in (0,1)");
        if (!(p > 0.0 && p < 1.0)) throw DomainError("proportion p must lie in (0,1)");
        if (bonferroni_m && *bonferroni_m < 1) throw DomainError("bonferroni_m must be >= 1");
    }

    /// Confidence after the Bonferroni adjustment, if any.
    [[nodiscard]] double effective_confidence() const {
        return bonferroni_m ? 1.0 - (1.0 - confidence) / static_cast<double>(*bonferroni_m) : confidence;
    }
};

/// Two-sided critical value for the given confidence.
inline double z_critical(double confidence) { return normal_quantile(1.0 - (1.0 - confidence) / 2.0); }

/// Infinite-population sample size z^2 p(1-p) / delta^2, unrounded.
inline double base_sample_size(const SizingParams& params) {
    params.validate();
    const double z = z_critical(params.effective_confidence());
    return z * z * params.p * (1.0 - params.p) / (params.delta * params.delta);
}

/// Margin-of-error sample size with finite population correction.
inline std::uint64_t required_sample_size(std::uint64_t population, const SizingParams& params = {}) {
    if (population < 1) throw DomainError("population size must be >= 1");
    const double n0 = base_sample_size(params);
    const double n = n0 / (1.0 + (n0 - 1.0) / static_cast<double>(population));
    // Absorb representation error before rounding up.
    auto out = static_cast<std::uint64_t>(std::ceil(n - 1e-9));
    return std::min<std::uint64_t>(std::max<std::uint64_t>(out, 1), population);
}

// ---------------------------------------------------------------------------
// Stratified plans.

enum class SizingMode { Global, Yearly, Monthly };

inline constexpr double kDefaultMalwareRatio = 0.10;

struct SizingPlan {
    SizingMode mode = SizingMode::Monthly;
    bool spatial = true;
    double ratio_malware = kDefaultMalwareRatio;

    void validate() const {
        if (spatial && !(ratio_malware > 0.0 && ratio_malware < 1.0)) throw DomainError("malware ratio must lie in (0,1)");
    }

    [[nodiscard]] std::string name() const {
        switch (mode) {
            case SizingMode::Global: return spatial ? "MoE/Spatial" : "MoE";
            case SizingMode::Yearly: return spatial ? "MoE/Spatial/Year" : "MoE/Yearly";
            case SizingMode::Monthly: return spatial ? "MoE/Spatial/Month" : "MoE/Monthly";
        }
        return "?";
    }
};

inline SizingPlan parse_sizing_plan(std::string_view name, double ratio = kDefaultMalwareRatio) {
    static const std::map<std::string, std::pair<SizingMode, bool>, std::less<>> names{
        {"MoE", {SizingMode::Global, false}},
        {"MoE/Spatial", {SizingMode::Global, true}},
        {"MoE/Yearly", {SizingMode::Yearly, false}},
        {"MoE/Year", {SizingMode::Yearly, false}},
        {"MoE/Spatial/Year", {SizingMode::Yearly, true}},
        {"MoE/Monthly", {SizingMode::Monthly, false}},
        {"MoE/Month", {SizingMode::Monthly, false}},
        {"MoE/Spatial/Month", {SizingMode::Monthly, true}},
    };
    auto it = names.find(name);
    if (it == names.end()) throw UsageError("unknown sizing plan '" + std::string(name) + "'");
    return SizingPlan{it->second.first, it->second.second, ratio};
}

inline SizingMode parse_sizing_mode(std::string_view s) {
    if (s == "global") return SizingMode::Global;
    if (s == "yearly" || s == "year") return SizingMode::Yearly;
    if (s == "monthly" || s == "month") return SizingMode::Monthly;
    throw UsageError("unknown sizing mode '" + std::string(s) + "' (expected global|yearly|monthly)");
}

inline std::string_view to_string(SizingMode m) {
    switch (m) {
        case SizingMode::Global: return "global";
        case SizingMode::Yearly: return "yearly";
        case SizingMode::Monthly: return "monthly";
    }
    return "?";
}

/// round(x) with halves going up, for non-negative x.
inline std::uint64_t round_half_up(double x) { return static_cast<std::uint64_t>(std::floor(x + 0.5)); }

struct StratumPlan {
    std::optional<Period> period;  // absent for the global stratum
    std::uint64_t goodware_available = 0;
    std::uint64_t malware_available = 0;
    std::uint64_t n = 0;
    // Spatial plans only: class targets after capping by availability.
    std::optional<std::uint64_t> malware_target;
    std::optional<std::uint64_t> goodware_target;
    std::uint64_t malware_shortfall = 0;
    std::uint64_t goodware_shortfall = 0;

    [[nodiscard]] std::uint64_t available() const { return goodware_available + malware_available; }
    [[nodiscard]] std::uint64_t planned() const {
        return malware_target ? *malware_target + *goodware_target : n;
    }
};

struct SizePlanResult {
    SizingPlan plan;
    SizingParams params;
    std::vector<StratumPlan> strata;
    std::size_t excluded_undated = 0;
    std::size_t excluded_greyware = 0;
    std::size_t excluded_unknown = 0;
    std::vector<std::string> warnings;

    [[nodiscard]] std::uint64_t total() const {
        std::uint64_t t = 0;
        for (const auto& s : strata) t += s.n;
        return t;
    }
    [[nodiscard]] const StratumPlan* find(std::optional<Period> p) const {
        for (const auto& s : strata) {
            if (s.period == p) return &s;
        }
        return nullptr;
    }
};

struct ClassTargets {
    std::uint64_t want_goodware = 0;
    std::uint64_t want_malware = 0;
    std::uint64_t goodware = 0;
    std::uint64_t malware = 0;
};

/// Splits n by the malware ratio. When a class runs short, the stratum
/// shrinks to the largest total whose ratio split fits what is available.
inline ClassTargets spatial_targets(std::uint64_t n, std::uint64_t goodware, std::uint64_t malware, double ratio) {
    ClassTargets t;
    t.want_malware = round_half_up(static_cast<double>(n) * ratio);
    t.want_goodware = n - t.want_malware;
    if (t.want_malware <= malware && t.want_goodware <= goodware) {
        t.malware = t.want_malware;
        t.goodware = t.want_goodware;
        return t;
    }
    // A wanted class with nothing available leaves the stratum empty rather than single-class.
    if ((t.want_malware > 0 && malware == 0) || (t.want_goodware > 0 && goodware == 0)) return t;
    std::uint64_t total = std::min(n, malware + goodware);
    for (;; --total) {
        const auto mw = round_half_up(static_cast<double>(total) * ratio);
        if (mw <= malware && total - mw <= goodware) {
            t.malware = mw;
            t.goodware = total - mw;
            break;
        }
    }
    // A tiny stratum may round its malware share away; keep one so both classes stay present.
    if (t.malware == 0 && t.want_malware > 0 && malware > 0 && t.goodware > 0) t.malware = 1;
    return t;
}

/// Sizes one stratum from its class availability.
inline StratumPlan size_stratum(std::optional<Period> period, std::uint64_t goodware, std::uint64_t malware,
                                const SizingPlan& plan, const SizingParams& params) {
    StratumPlan s;
    s.period = period;
    s.goodware_available = goodware;
    s.malware_available = malware;
    const auto total = goodware + malware;
    if (total == 0) return s;
    s.n = required_sample_size(total, params);
    if (plan.spatial) {
        const auto t = spatial_targets(s.n, goodware, malware, plan.ratio_malware);
        s.malware_target = t.malware;
        s.goodware_target = t.goodware;
        s.malware_shortfall = t.want_malware - t.malware;
        s.goodware_shortfall = t.want_goodware - t.goodware;
    }
    return s;
}

/// Candidate counts per month (or a single bucket), the sampling frame for plan_sizes.
struct FrameCounts {
    std::map<Period, std::pair<std::uint64_t, std::uint64_t>> per_month;  // (goodware, malware)
    std::size_t undated = 0;
    std::size_t greyware = 0;
    std::size_t unknown = 0;
};

inline FrameCounts frame_counts(const Population& pop, const LabelRule& rule, const TimestampPolicy& policy) {
    FrameCounts f;
    for (const auto& r : pop) {
        auto l = try_label(r, rule);
        if (!l) {
            ++f.unknown;
            continue;
        }
        if (*l == ClassLabel::Greyware) {
            ++f.greyware;
            continue;
        }
        auto date = timeline_date(r, policy);
        if (!date) {
            ++f.undated;
            continue;
        }
        auto& cell = f.per_month[period_of(*date, Granularity::Month)];
        (*l == ClassLabel::Malware ? cell.second : cell.first)++;
    }
    return f;
}

inline SizePlanResult plan_sizes_from_counts(const FrameCounts& f, const SizingPlan& plan, const SizingParams& params) {
    plan.validate();
    params.validate();
    SizePlanResult res;
    res.plan = plan;
    res.params = params;
    res.excluded_undated = f.undated;
    res.excluded_greyware = f.greyware;
    res.excluded_unknown = f.unknown;
    if (f.per_month.empty()) throw DomainError("plan_sizes: no dated goodware/malware records");

    if (plan.mode == SizingMode::Global) {
        std::uint64_t gw = 0, mw = 0;
        for (const auto& [_, c] : f.per_month) {
            gw += c.first;
            mw += c.second;
        }
        res.strata.push_back(size_stratum(std::nullopt, gw, mw, plan, params));
    } else {
        const auto g = plan.mode == SizingMode::Monthly ? Granularity::Month : Granularity::Year;
        std::map<Period, std::pair<std::uint64_t, std::uint64_t>> buckets;
        for (const auto& [month, c] : f.per_month) {
            auto key = g == Granularity::Month ? month : month.as_year();
            buckets[key].first += c.first;
            buckets[key].second += c.second;
        }
        for (auto p : period_range(buckets.begin()->first, buckets.rbegin()->first)) {
            auto it = buckets.find(p);
            const auto gw = it == buckets.end() ? 0 : it->second.first;
            const auto mw = it == buckets.end() ? 0 : it->second.second;
            if (gw + mw == 0) res.warnings.push_back("stratum " + p.label() + " has no candidates");
            res.strata.push_back(size_stratum(p, gw, mw, plan, params));
        }
    }
    for (const auto& s : res.strata) {
        auto where = s.period ? s.period->label() : std::string("global");
        if (s.malware_shortfall) {
            res.warnings.push_back("stratum " + where + ": malware shortfall " + std::to_string(s.malware_shortfall));
        }
        if (s.goodware_shortfall) {
            res.warnings.push_back("stratum " + where + ": goodware shortfall " + std::to_string(s.goodware_shortfall));
        }
    }
    return res;
}

inline SizePlanResult plan_sizes(const Population& pop, const LabelRule& rule, const TimestampPolicy& policy,
                                 const SizingPlan& plan, const SizingParams& params = {}) {
    if (pop.empty()) throw DomainError("plan_sizes: empty population");
    return plan_sizes_from_counts(frame_counts(pop, rule, policy), plan, params);
}

// ---------------------------------------------------------------------------
// Plan comparison.

struct PlanSummary {
    std::string name;
    std::uint64_t total = 0;       // sum of stratum sizes
    double malware_total = 0.0;    // planned (spatial) or expected (non-spatial) malware
    double malware_per_month_mean = 0.0;
    double malware_per_month_std = 0.0;  // population standard deviation
    std::size_t months = 0;
};

/// Malware attributed to each month. Coarse strata are spread over their
/// months in proportion to each month's malware availability.
inline std::map<Period, double> malware_by_month(const FrameCounts& f, const SizePlanResult& plan) {
    std::map<Period, double> out;
    for (const auto& [m, _] : f.per_month) out[m] = 0.0;
    for (const auto& s : plan.strata) {
        const double mw = s.malware_target
                              ? static_cast<double>(*s.malware_target)
                              : (s.available() ? static_cast<double>(s.n) * static_cast<double>(s.malware_available) /
                                                     static_cast<double>(s.available())
                                               : 0.0);
        if (s.malware_available == 0) continue;
        for (const auto& [m, c] : f.per_month) {
            const bool inside = !s.period || (s.period->granularity == Granularity::Month ? *s.period == m
                                                                                           : *s.period == m.as_year());
            if (inside) out[m] += mw * static_cast<double>(c.second) / static_cast<double>(s.malware_available);
        }
    }
    return out;
}

inline std::vector<PlanSummary> compare_plans(const Population& pop, const LabelRule& rule,
                                              const TimestampPolicy& policy, const std::vector<SizingPlan>& plans,
                                              const SizingParams& params = {}) {
    if (pop.empty()) throw DomainError("compare_plans: empty population");
    const auto frame = frame_counts(pop, rule, policy);
    if (frame.per_month.empty()) throw DomainError("compare_plans: no dated goodware/malware records");
    auto months = period_range(frame.per_month.begin()->first, frame.per_month.rbegin()->first);
    std::vector<PlanSummary> out;
    for (const auto& plan : plans) {
        auto sized = plan_sizes_from_counts(frame, plan, params);
        auto by_month = malware_by_month(frame, sized);
        PlanSummary s;
        s.name = plan.name();
        s.total = sized.total();
        s.months = months.size();
        double sum = 0.0;
        for (auto m : months) sum += by_month.count(m) ? by_month[m] : 0.0;
        s.malware_total = sum;
        s.malware_per_month_mean = sum / static_cast<double>(months.size());
        double var = 0.0;
        for (auto m : months) {
            const double v = (by_month.count(m) ? by_month[m] : 0.0) - s.malware_per_month_mean;
            var += v * v;
        }
        s.malware_per_month_std = std::sqrt(var / static_cast<double>(months.size()));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace biaskit
