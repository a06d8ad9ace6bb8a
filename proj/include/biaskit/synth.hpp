#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "biaskit/core.hpp"
#include "biaskit/labeling.hpp"
#include "biaskit/random.hpp"
#include "biaskit/sampler.hpp"
#include "biaskit/sizing.hpp"

namespace biaskit {

using MarketMixture = std::vector<std::pair<std::string, double>>;

/// crawl_date - dex_date, in days.
struct LagModel {
    enum class Kind { PointMass, LogNormal };
    Kind kind = Kind::LogNormal;
    double days = 0.0;     // point mass value
    double median = 5.0;   // lognormal median
    double sigma = 1.0;    // lognormal shape
    double backfill_fraction = 0.0;  // share of records crawled long after creation
    double backfill_days = 0.0;      // extra delay for those records
};

/// Inclusive detection-count range per class. Goodware noise turns a share
/// of goodware into greyware with detections in [1, design_vtt).
struct VtModel {
    std::uint32_t design_vtt = 4;
    std::uint32_t malware_min = 4;
    std::uint32_t malware_max = 40;
    double goodware_noise = 0.0;
};

struct SynthConfig {
    Period start = Period::month(2014, 1);
    int months = 60;
    int per_month = 200;
    double malware_fraction = 0.1;
    int family_pool = 30;
    int family_birth_rate = 0;
    std::optional<int> family_lifetime;  // months; absent means families never retire
    double family_missing_fraction = 0.0;
    MarketMixture goodware_markets{{"play.google.com", 1.0}};
    MarketMixture malware_markets{{"play.google.com", 1.0}};
    LagModel lag;
    VtModel vt;
    std::uint64_t seed = 1;

    void validate() const {
        if (start.granularity != Granularity::Month) throw DomainError("synth start must be a month");
        if (months < 1 || per_month < 1) throw DomainError("months and per_month must be positive");
        if (start.index + months - 1 >= (kMaxYear - kMinYear + 1) * 12) throw DomainError("synth range beyond 2100");
        if (!(malware_fraction >= 0.0 && malware_fraction <= 1.0)) throw DomainError("malware_fraction outside [0,1]");
        if (!(family_missing_fraction >= 0.0 && family_missing_fraction <= 1.0)) {
            throw DomainError("family_missing_fraction outside [0,1]");
        }
        if (family_pool < 0 || family_birth_rate < 0) throw DomainError("family counts must be non-negative");
        if (family_lifetime && *family_lifetime < 1) throw DomainError("family_lifetime must be >= 1 month");
        for (const auto* mix : {&goodware_markets, &malware_markets}) {
            double total = 0.0;
            for (const auto& [tag, w] : *mix) {
                if (tag.empty() || w < 0.0 || !std::isfinite(w)) throw DomainError("invalid market mixture entry");
                total += w;
            }
            if (!(total > 0.0)) throw DomainError("market mixture has no mass");
        }
        if (lag.kind == LagModel::Kind::LogNormal && (!(lag.median > 0.0) || lag.sigma < 0.0)) {
            throw DomainError("lognormal lag needs median > 0 and sigma >= 0");
        }
        if (lag.kind == LagModel::Kind::PointMass && lag.days < 0.0) throw DomainError("negative lag");
        if (lag.backfill_fraction < 0.0 || lag.backfill_fraction > 1.0 || lag.backfill_days < 0.0) {
            throw DomainError("invalid backfill settings");
        }
        if (vt.design_vtt < 1 || vt.malware_min < vt.design_vtt || vt.malware_max < vt.malware_min) {
            throw DomainError("malware detections must lie at or above the design threshold");
        }
        if (vt.goodware_noise < 0.0 || vt.goodware_noise > 1.0) throw DomainError("goodware_noise outside [0,1]");
        if (vt.goodware_noise > 0.0 && vt.design_vtt < 2) throw DomainError("greyware noise needs design_vtt >= 2");
    }

    [[nodiscard]] int malware_per_month() const {
        return static_cast<int>(round_half_up(static_cast<double>(per_month) * malware_fraction));
    }
};

struct SynthFamily {
    std::string name;
    int birth = 0;  // month offset from start, may be negative for the initial pool
};

struct GroundTruth {
    std::map<Period, std::vector<std::string>> active_families;
    std::map<std::string, ClassLabel> classes;
};

struct SynthOutput {
    Population population;
    GroundTruth truth;
};

namespace detail {

inline std::string synth_hash(Rng& rng) {
    char buf[65];
    for (int i = 0; i < 4; ++i) std::snprintf(buf + 16 * i, 17, "%016llx", static_cast<unsigned long long>(rng.next()));
    return std::string(buf, 64);
}

inline std::vector<SynthFamily> synth_families(const SynthConfig& cfg) {
    std::vector<SynthFamily> fams;
    char name[32];
    int id = 0;
    for (int k = 0; k < cfg.family_pool; ++k) {
        std::snprintf(name, sizeof name, "fam%05d", id++);
        // Stagger the initial pool so retirements are gradual.
        fams.push_back({name, cfg.family_lifetime ? -(k % *cfg.family_lifetime) : 0});
    }
    for (int m = 1; m < cfg.months; ++m) {
        for (int k = 0; k < cfg.family_birth_rate; ++k) {
            std::snprintf(name, sizeof name, "fam%05d", id++);
            fams.push_back({name, m});
        }
    }
    return fams;
}

inline std::vector<std::string> active_at(const std::vector<SynthFamily>& fams, const SynthConfig& cfg, int month) {
    std::vector<std::string> out;
    for (const auto& f : fams) {
        if (f.birth <= month && (!cfg.family_lifetime || month < f.birth + *cfg.family_lifetime)) out.push_back(f.name);
    }
    return out;
}

inline std::string pick_market(Rng& rng, const MarketMixture& mix) {
    std::vector<double> w;
    w.reserve(mix.size());
    for (const auto& [_, x] : mix) w.push_back(x);
    return mix[rng.weighted(w)].first;
}

}  // namespace detail

/// Deterministic synthetic metadata population with known family dynamics.
/// Each month is generated from its own sub-seed, so thread count never
/// changes the output.
inline SynthOutput generate(const SynthConfig& cfg, unsigned threads = 1) {
    cfg.validate();
    const auto families = detail::synth_families(cfg);
    const int n_mw = cfg.malware_per_month();

    GroundTruth truth;
    std::vector<std::vector<std::string>> active(static_cast<std::size_t>(cfg.months));
    for (int m = 0; m < cfg.months; ++m) {
        active[static_cast<std::size_t>(m)] = detail::active_at(families, cfg, m);
        if (n_mw > 0 && active[static_cast<std::size_t>(m)].empty()) {
            throw DomainError("no active malware family in month " + std::to_string(m) +
                              " (check family_pool, family_birth_rate, family_lifetime)");
        }
        truth.active_families[Period{Granularity::Month, cfg.start.index + m}] = active[static_cast<std::size_t>(m)];
    }

    struct Generated {
        std::vector<ApkRecord> records;
        std::vector<ClassLabel> classes;
    };
    std::vector<Generated> per_month(static_cast<std::size_t>(cfg.months));
    detail::run_parallel(static_cast<std::size_t>(cfg.months), threads, [&](std::size_t m) {
        Rng rng(derive_seed(cfg.seed, {static_cast<std::int64_t>(m), 0x5e17}));
        const Period month{Granularity::Month, cfg.start.index + static_cast<std::int32_t>(m)};
        const auto begin = month.begin().seconds;
        const auto length = month.end().seconds - begin;
        auto& out = per_month[m];
        for (int i = 0; i < cfg.per_month; ++i) {
            const bool malware = i < n_mw;
            ApkRecord r;
            r.sha256 = detail::synth_hash(rng);
            r.dex_date = Timestamp{begin + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(length)))};
            double lag_days = cfg.lag.kind == LagModel::Kind::PointMass
                                  ? cfg.lag.days
                                  : cfg.lag.median * std::exp(cfg.lag.sigma * rng.normal());
            if (cfg.lag.backfill_fraction > 0.0 && rng.uniform() < cfg.lag.backfill_fraction) {
                lag_days += cfg.lag.backfill_days;
            }
            r.crawl_date = Timestamp{r.dex_date.seconds + static_cast<std::int64_t>(std::llround(lag_days * kSecondsPerDay))};
            r.vt_scan_date = r.crawl_date;
            r.markets = {detail::pick_market(rng, malware ? cfg.malware_markets : cfg.goodware_markets)};
            ClassLabel cls = ClassLabel::Goodware;
            if (malware) {
                cls = ClassLabel::Malware;
                r.vt_detection = static_cast<std::uint32_t>(rng.between(cfg.vt.malware_min, cfg.vt.malware_max));
                const auto& act = active[m];
                const auto& fam = act[static_cast<std::size_t>(rng.below(act.size()))];
                if (!(cfg.family_missing_fraction > 0.0 && rng.uniform() < cfg.family_missing_fraction)) r.family = fam;
            } else if (cfg.vt.goodware_noise > 0.0 && rng.uniform() < cfg.vt.goodware_noise) {
                cls = ClassLabel::Greyware;
                r.vt_detection = static_cast<std::uint32_t>(rng.between(1, cfg.vt.design_vtt - 1));
            } else {
                r.vt_detection = 0;
            }
            r.apk_size = static_cast<std::uint64_t>(rng.between(100'000, 50'000'000));
            out.classes.push_back(cls);
            out.records.push_back(std::move(r));
        }
    });

    std::vector<ApkRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.months) * static_cast<std::size_t>(cfg.per_month));
    for (auto& g : per_month) {
        for (std::size_t i = 0; i < g.records.size(); ++i) {
            if (!truth.classes.emplace(g.records[i].sha256, g.classes[i]).second) {
                throw DomainError("synthetic hash collision; change the seed");
            }
            records.push_back(std::move(g.records[i]));
        }
    }
    return {Population(std::move(records), "synthetic seed=" + std::to_string(cfg.seed)), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Presets.

inline std::map<std::string, SynthConfig> scenario_presets() {
    std::map<std::string, SynthConfig> out;

    SynthConfig stable;
    stable.family_pool = 30;
    stable.goodware_markets = {{"play.google.com", 0.7}, {"anzhi", 0.15}, {"appchina", 0.15}};
    stable.malware_markets = stable.goodware_markets;
    out["stable"] = stable;

    SynthConfig churn = stable;
    churn.family_pool = 40;
    churn.family_birth_rate = 2;
    churn.family_lifetime = 48;
    out["churn"] = churn;

    SynthConfig skew = stable;
    skew.goodware_markets = {{"play.google.com", 1.0}};
    skew.malware_markets = {{"VirusShare", 1.0}};
    out["market-skew"] = skew;

    SynthConfig backfill = stable;
    backfill.family_pool = 12;
    backfill.family_birth_rate = 3;
    backfill.family_lifetime = 12;
    backfill.lag.backfill_fraction = 0.3;
    backfill.lag.backfill_days = 730.0;
    out["late-backfill"] = backfill;

    return out;
}

inline SynthConfig preset(const std::string& name) {
    auto all = scenario_presets();
    auto it = all.find(name);
    if (it == all.end()) {
        std::string names;
        for (const auto& [k, _] : all) names += " " + k;
        throw UsageError("unknown preset '" + name + "'; available:" + names);
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// Serialization.

inline nlohmann::json to_json(const SynthConfig& c) {
    auto mixture = [](const MarketMixture& m) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& [tag, w] : m) j.push_back({tag, w});
        return j;
    };
    return {{"start", c.start.label()},
            {"months", c.months},
            {"per_month", c.per_month},
            {"malware_fraction", c.malware_fraction},
            {"family_pool", c.family_pool},
            {"family_birth_rate", c.family_birth_rate},
            {"family_lifetime", c.family_lifetime ? nlohmann::json(*c.family_lifetime) : nlohmann::json()},
            {"family_missing_fraction", c.family_missing_fraction},
            {"goodware_markets", mixture(c.goodware_markets)},
            {"malware_markets", mixture(c.malware_markets)},
            {"lag",
             {{"kind", c.lag.kind == LagModel::Kind::PointMass ? "point" : "lognormal"},
              {"days", c.lag.days},
              {"median", c.lag.median},
              {"sigma", c.lag.sigma},
              {"backfill_fraction", c.lag.backfill_fraction},
              {"backfill_days", c.lag.backfill_days}}},
            {"vt",
             {{"design_vtt", c.vt.design_vtt},
              {"malware_min", c.vt.malware_min},
              {"malware_max", c.vt.malware_max},
              {"goodware_noise", c.vt.goodware_noise}}},
            {"seed", c.seed}};
}

inline nlohmann::json to_json(const GroundTruth& t) {
    nlohmann::json j;
    auto& fams = j["active_families"] = nlohmann::json::object();
    for (const auto& [p, names] : t.active_families) fams[p.label()] = names;
    std::map<std::string, std::vector<std::string>> by_class;
    for (const auto& [sha, cls] : t.classes) by_class[std::string(to_string(cls))].push_back(sha);
    j["classes"] = by_class;
    return j;
}

}  // namespace biaskit
