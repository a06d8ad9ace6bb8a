#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "biaskit/core.hpp"
#include "biaskit/labeling.hpp"
#include "biaskit/random.hpp"
#include "biaskit/sizing.hpp"

namespace biaskit {

struct ManifestEntry {
    std::string sha256;
    ClassLabel label = ClassLabel::Goodware;
    Period period;  // month of `date`
    Timestamp date;
    TimestampKind dated_by = TimestampKind::PublicationCrawl;
    std::vector<std::string> markets;
    std::optional<std::string> family;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// What a stratum asked for and what it got.
struct StratumOutcome {
    std::string name;               // period label, "global", or a market cell such as "GP/goodware"
    std::optional<Period> period;
    std::uint64_t requested_total = 0;
    std::optional<std::uint64_t> requested_goodware;  // absent when classes are not split
    std::optional<std::uint64_t> requested_malware;
    std::uint64_t sampled_goodware = 0;
    std::uint64_t sampled_malware = 0;
    std::uint64_t shortfall = 0;

    friend bool operator==(const StratumOutcome&, const StratumOutcome&) = default;
};

struct ManifestSpec {
    std::string kind = "stratified";
    LabelRule rule;
    TimestampPolicy policy;
    SizingPlan plan;
    SizingParams params;
    std::uint64_t seed = 0;
    std::optional<Timestamp> snapshot_date;
    std::set<std::string> market_filter;
    double consistency_threshold = kDefaultConsistencyThreshold;
    std::string provenance;
};

struct DatasetManifest {
    ManifestSpec spec;
    std::vector<ManifestEntry> entries;
    std::vector<StratumOutcome> strata;
    Timestamp created;
    std::vector<std::string> violations;  // stamped when emitted despite failed checks

    [[nodiscard]] std::size_t count(ClassLabel c) const {
        return static_cast<std::size_t>(
            std::count_if(entries.begin(), entries.end(), [c](const auto& e) { return e.label == c; }));
    }
};

/// Market attribution for a manifest: filtered markets rank first.
inline MarketPriority manifest_priority(const ManifestSpec& spec) {
    std::vector<std::string> order(spec.market_filter.begin(), spec.market_filter.end());
    for (auto& m : MarketPriority::default_order()) {
        if (!spec.market_filter.count(m)) order.push_back(m);
    }
    return MarketPriority(std::move(order));
}

inline std::vector<LabeledMarkets> labeled_markets(const DatasetManifest& m) {
    std::vector<LabeledMarkets> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) out.push_back({e.label, &e.markets});
    return out;
}

inline ConsistencyResult market_consistency(const DatasetManifest& m) {
    auto items = labeled_markets(m);
    return market_consistency(items, m.spec.consistency_threshold, manifest_priority(m.spec));
}

struct SampleOptions {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::set<std::string> market_filter;
    double consistency_threshold = kDefaultConsistencyThreshold;
    /// Defaults to the snapshot date, else the latest sampled timeline date.
    std::optional<Timestamp> created;
};

namespace detail {

struct Candidate {
    const ApkRecord* record;
    ClassLabel label;
    DatedBy dated;
};

enum class PoolClass : int { Goodware = 0, Malware = 1, Any = 2 };

inline std::int64_t stratum_key(const std::optional<Period>& p) {
    if (!p) return -1;
    return (p->granularity == Granularity::Year ? 1'000'000 : 0) + p->index;
}

/// Sorted-by-hash candidates, seeded shuffle, prefix. Independent of input order.
inline std::vector<const Candidate*> draw(std::vector<const Candidate*> pool, std::uint64_t count, std::uint64_t seed) {
    std::sort(pool.begin(), pool.end(),
              [](const Candidate* a, const Candidate* b) { return a->record->sha256 < b->record->sha256; });
    Rng rng(seed);
    rng.shuffle(pool);
    if (pool.size() > count) pool.resize(static_cast<std::size_t>(count));
    return pool;
}

template <typename Job>
void run_parallel(std::size_t jobs, unsigned threads, Job&& job) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(jobs, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < jobs; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < jobs;) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
}

inline ManifestEntry make_entry(const Candidate& c) {
    return ManifestEntry{c.record->sha256, c.label,   period_of(c.dated.date, Granularity::Month),
                         c.dated.date,     c.dated.source, c.record->markets, c.record->family};
}

inline void sort_entries(std::vector<ManifestEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
        if (a.period != b.period) return a.period < b.period;
        if (a.label != b.label) return a.label < b.label;
        return a.sha256 < b.sha256;
    });
}

}  // namespace detail

/// Draws every (stratum, class) cell of a size plan without replacement.
/// Greyware, undated records, and records outside the market filter never
/// enter the pool. Shortfalls take everything available.
inline DatasetManifest stratified_sample(const Population& pop, const LabelRule& rule, const TimestampPolicy& policy,
                                         const SizePlanResult& plan, const SampleOptions& opts = {}) {
    std::vector<detail::Candidate> candidates;
    for (const auto& r : pop) {
        auto l = try_label(r, rule);
        if (!l || *l == ClassLabel::Greyware) continue;
        if (!opts.market_filter.empty() &&
            std::none_of(r.markets.begin(), r.markets.end(), [&](const auto& m) { return opts.market_filter.count(m) > 0; })) {
            continue;
        }
        auto dated = timeline_source(r, policy);
        if (!dated) continue;
        candidates.push_back({&r, *l, *dated});
    }
    if (candidates.empty()) throw DomainError("stratified_sample: empty candidate pool");

    auto stratum_of = [&](const detail::Candidate& c) -> std::optional<Period> {
        switch (plan.plan.mode) {
            case SizingMode::Global: return std::nullopt;
            case SizingMode::Yearly: return period_of(c.dated.date, Granularity::Year);
            case SizingMode::Monthly: return period_of(c.dated.date, Granularity::Month);
        }
        return std::nullopt;
    };
    std::map<std::pair<std::int64_t, int>, std::vector<const detail::Candidate*>> pools;
    for (const auto& c : candidates) {
        const auto key = detail::stratum_key(stratum_of(c));
        pools[{key, c.label == ClassLabel::Malware ? 1 : 0}].push_back(&c);
        pools[{key, 2}].push_back(&c);
    }

    struct Slot {
        StratumOutcome outcome;
        std::vector<ManifestEntry> entries;
    };
    std::vector<Slot> slots(plan.strata.size());
    auto sample_stratum = [&](std::size_t i) {
        const auto& s = plan.strata[i];
        const auto key = detail::stratum_key(s.period);
        auto pool_for = [&](detail::PoolClass cls) {
            auto it = pools.find({key, static_cast<int>(cls)});
            return it == pools.end() ? std::vector<const detail::Candidate*>{} : it->second;
        };
        auto seed_for = [&](detail::PoolClass cls) {
            return derive_seed(opts.seed, {key, static_cast<std::int64_t>(cls)});
        };
        Slot slot;
        slot.outcome.name = s.period ? s.period->label() : "global";
        slot.outcome.period = s.period;
        std::vector<const detail::Candidate*> chosen;
        if (plan.plan.spatial) {
            auto mw_pool = pool_for(detail::PoolClass::Malware);
            auto gw_pool = pool_for(detail::PoolClass::Goodware);
            const auto t = spatial_targets(s.n, gw_pool.size(), mw_pool.size(), plan.plan.ratio_malware);
            slot.outcome.requested_total = s.n;
            slot.outcome.requested_malware = t.want_malware;
            slot.outcome.requested_goodware = t.want_goodware;
            auto mw = detail::draw(std::move(mw_pool), t.malware, seed_for(detail::PoolClass::Malware));
            auto gw = detail::draw(std::move(gw_pool), t.goodware, seed_for(detail::PoolClass::Goodware));
            slot.outcome.shortfall = (t.want_malware - mw.size()) + (t.want_goodware - gw.size());
            chosen = std::move(mw);
            chosen.insert(chosen.end(), gw.begin(), gw.end());
        } else {
            slot.outcome.requested_total = s.n;
            chosen = detail::draw(pool_for(detail::PoolClass::Any), s.n, seed_for(detail::PoolClass::Any));
            slot.outcome.shortfall = s.n - chosen.size();
        }
        for (const auto* c : chosen) {
            (c->label == ClassLabel::Malware ? slot.outcome.sampled_malware : slot.outcome.sampled_goodware)++;
            slot.entries.push_back(detail::make_entry(*c));
        }
        slots[i] = std::move(slot);
    };
    detail::run_parallel(plan.strata.size(), opts.threads, sample_stratum);

    DatasetManifest m;
    m.spec.kind = "stratified";
    m.spec.rule = rule;
    m.spec.policy = policy;
    m.spec.plan = plan.plan;
    m.spec.params = plan.params;
    m.spec.seed = opts.seed;
    m.spec.snapshot_date = pop.snapshot_date();
    m.spec.market_filter = opts.market_filter;
    m.spec.consistency_threshold = opts.consistency_threshold;
    m.spec.provenance = pop.provenance();
    for (auto& slot : slots) {
        m.strata.push_back(std::move(slot.outcome));
        for (auto& e : slot.entries) m.entries.push_back(std::move(e));
    }
    detail::sort_entries(m.entries);
    if (opts.created) {
        m.created = *opts.created;
    } else if (pop.snapshot_date()) {
        m.created = *pop.snapshot_date();
    } else {
        for (const auto& e : m.entries) m.created = std::max(m.created, e.date);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Constraint verification.

struct Verdict {
    std::string check;
    bool pass = true;
    bool mandatory = true;
    std::string evidence;
};

inline bool all_mandatory_pass(const std::vector<Verdict>& verdicts) {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass || !v.mandatory; });
}

struct VerifyOptions {
    /// Allowed deviation, in samples, from round(n * ratio) malware per period.
    std::uint64_t ratio_tolerance = 1;
};

inline std::vector<Verdict> verify_constraints(const DatasetManifest& m, const VerifyOptions& opts = {}) {
    std::vector<Verdict> out;

    {
        Verdict v{"integrity", true, true, {}};
        std::set<std::string> seen;
        std::size_t dup = 0, grey = 0;
        for (const auto& e : m.entries) {
            if (!seen.insert(e.sha256).second) ++dup;
            if (e.label == ClassLabel::Greyware) ++grey;
        }
        v.pass = dup == 0 && grey == 0;
        v.evidence = std::to_string(m.entries.size()) + " entries, " + std::to_string(dup) + " duplicate hashes, " +
                     std::to_string(grey) + " greyware";
        out.push_back(std::move(v));
    }

    const bool stratified = m.spec.kind == "stratified";
    // Tallies per stratum period.
    struct Tally {
        std::uint64_t goodware = 0, malware = 0;
    };
    std::map<std::int64_t, Tally> tallies;
    auto key_of = [&](const ManifestEntry& e) -> std::int64_t {
        switch (m.spec.plan.mode) {
            case SizingMode::Global: return -1;
            case SizingMode::Yearly: return detail::stratum_key(e.period.as_year());
            case SizingMode::Monthly: return detail::stratum_key(e.period);
        }
        return -1;
    };
    for (const auto& e : m.entries) {
        auto& t = tallies[key_of(e)];
        (e.label == ClassLabel::Malware ? t.malware : t.goodware)++;
    }
    std::map<std::int64_t, const StratumOutcome*> requested;
    for (const auto& s : m.strata) requested[detail::stratum_key(s.period)] = &s;
    auto label_of = [&](std::int64_t key) -> std::string {
        auto it = requested.find(key);
        return it != requested.end() ? it->second->name : std::to_string(key);
    };

    if (stratified) {
        Verdict v{"C2 temporal gw/mw window consistency", true, true, {}};
        std::vector<std::string> bad;
        for (const auto& [key, t] : tallies) {
            auto it = requested.find(key);
            const StratumOutcome* req = it == requested.end() ? nullptr : it->second;
            const bool mw_expected = !req || !req->requested_malware || *req->requested_malware > 0;
            const bool gw_expected = !req || !req->requested_goodware || *req->requested_goodware > 0;
            if ((t.malware == 0 && t.goodware > 0 && mw_expected) || (t.goodware == 0 && t.malware > 0 && gw_expected)) {
                bad.push_back(label_of(key));
            }
        }
        v.pass = bad.empty();
        v.evidence = bad.empty() ? "every period holds both classes" : "single-class periods:";
        for (const auto& b : bad) v.evidence += " " + b;
        out.push_back(std::move(v));

        Verdict c3{"C3 malware ratio", true, m.spec.plan.spatial, {}};
        if (!m.spec.plan.spatial) {
            c3.evidence = "not enforced by plan " + m.spec.plan.name();
        } else {
            std::vector<std::string> off;
            for (const auto& [key, t] : tallies) {
                const auto n = t.goodware + t.malware;
                const auto target = round_half_up(static_cast<double>(n) * m.spec.plan.ratio_malware);
                const auto diff = t.malware > target ? t.malware - target : target - t.malware;
                if (diff > opts.ratio_tolerance) {
                    off.push_back(label_of(key) + "(" + std::to_string(t.malware) + "/" + std::to_string(n) + ")");
                }
            }
            c3.pass = off.empty();
            c3.evidence = off.empty() ? "every period within +/-" + std::to_string(opts.ratio_tolerance) +
                                            " of round(n*" + std::to_string(m.spec.plan.ratio_malware) + ")"
                                      : "off-ratio periods:";
            for (const auto& o : off) c3.evidence += " " + o;
        }
        out.push_back(std::move(c3));
    }

    {
        Verdict v{"market consistency", true, true, {}};
        try {
            auto res = market_consistency(m);
            v.pass = res.pass;
            char buf[96];
            std::snprintf(buf, sizeof buf, "tv_distance=%.4f threshold=%.4f", res.tv_distance, res.threshold);
            v.evidence = buf;
        } catch (const DomainError& e) {
            v.pass = false;
            v.evidence = e.what();
        }
        out.push_back(std::move(v));
    }

    {
        Verdict v{"timestamp policy", true, true, {}};
        std::size_t bad = 0;
        for (const auto& e : m.entries) {
            const bool source_ok = e.dated_by == m.spec.policy.kind ||
                                   (m.spec.policy.fallback && e.dated_by == *m.spec.policy.fallback);
            if (!source_ok || !e.period.contains(e.date) || e.period.granularity != Granularity::Month) ++bad;
        }
        v.pass = bad == 0;
        v.evidence = std::to_string(bad) + " entries not dated by policy " + std::string(to_string(m.spec.policy.kind));
        out.push_back(std::move(v));
    }

    {
        std::uint64_t shortfall = 0;
        for (const auto& s : m.strata) shortfall += s.shortfall;
        out.push_back({"shortfall", shortfall == 0, false, std::to_string(shortfall) + " requested samples unavailable"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Market scenarios: GooglePlay versus pooled third-party markets.

enum class MarketGroup { GooglePlay, ThirdParty };

/// GP if the record carries the Google Play tag; 3PM if it carries any other
/// tag except "unknown"; otherwise no group.
inline std::optional<MarketGroup> market_group(const ApkRecord& r) {
    if (r.has_market(kGooglePlay)) return MarketGroup::GooglePlay;
    for (const auto& m : r.markets) {
        if (m != kUnknownMarket) return MarketGroup::ThirdParty;
    }
    return std::nullopt;
}

struct ScenarioCells {
    // [goodware GP, goodware 3PM, malware GP, malware 3PM]
    std::array<std::uint64_t, 4> train{};
    std::array<std::uint64_t, 4> test{};
};

inline const std::map<std::string, ScenarioCells>& market_scenarios() {
    static const std::map<std::string, ScenarioCells> table{
        {"D_GP", {{10000, 0, 10000, 0}, {4500, 0, 500, 0}}},
        {"D_3PM", {{0, 10000, 0, 10000}, {0, 4500, 0, 500}}},
        {"D_EVEN", {{5000, 5000, 5000, 5000}, {2250, 2250, 250, 250}}},
        {"D_PROP", {{8000, 2000, 8000, 2000}, {3600, 900, 400, 100}}},
        {"D_GP3PM", {{10000, 0, 0, 10000}, {4500, 0, 0, 500}}},
        {"D_3PMGP", {{0, 10000, 10000, 0}, {0, 4500, 500, 0}}},
    };
    return table;
}

struct ScenarioManifests {
    DatasetManifest train;
    DatasetManifest test;
};

inline ScenarioManifests market_scenario(const Population& pop, const std::string& config, const LabelRule& rule,
                                         const TimestampPolicy& policy, std::uint64_t seed) {
    const auto& table = market_scenarios();
    auto it = table.find(config);
    if (it == table.end()) {
        std::string names;
        for (const auto& [k, _] : table) names += " " + k;
        throw UsageError("unknown market scenario '" + config + "'; known:" + names);
    }
    const auto& cells = it->second;
    static constexpr std::array<const char*, 4> cell_names{"GP/goodware", "3PM/goodware", "GP/malware", "3PM/malware"};

    std::vector<detail::Candidate> candidates;
    std::array<std::vector<const detail::Candidate*>, 4> pools;
    candidates.reserve(pop.size());
    for (const auto& r : pop) {
        auto l = try_label(r, rule);
        auto g = market_group(r);
        auto dated = timeline_source(r, policy);
        if (!l || *l == ClassLabel::Greyware || !g || !dated) continue;
        candidates.push_back({&r, *l, *dated});
    }
    for (const auto& c : candidates) {
        const auto g = *market_group(*c.record);
        const std::size_t idx = (c.label == ClassLabel::Malware ? 2 : 0) + (g == MarketGroup::ThirdParty ? 1 : 0);
        pools[idx].push_back(&c);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        const auto need = cells.train[i] + cells.test[i];
        if (pools[i].size() < need) {
            throw DomainError(std::string("insufficient population for cell (") + cell_names[i] + "): need " +
                              std::to_string(need) + ", have " + std::to_string(pools[i].size()));
        }
    }

    ScenarioManifests out;
    for (auto* m : {&out.train, &out.test}) {
        m->spec.rule = rule;
        m->spec.policy = policy;
        m->spec.seed = seed;
        m->spec.plan = SizingPlan{SizingMode::Global, false, kDefaultMalwareRatio};
        m->spec.snapshot_date = pop.snapshot_date();
        m->spec.provenance = pop.provenance();
    }
    out.train.spec.kind = "market-scenario:" + config + ":train";
    out.test.spec.kind = "market-scenario:" + config + ":test";
    for (std::size_t i = 0; i < 4; ++i) {
        const auto need = cells.train[i] + cells.test[i];
        auto chosen = detail::draw(pools[i], need, derive_seed(seed, {static_cast<std::int64_t>(i), 7}));
        for (std::size_t k = 0; k < chosen.size(); ++k) {
            auto& target = k < cells.train[i] ? out.train : out.test;
            target.entries.push_back(detail::make_entry(*chosen[k]));
        }
        const bool mw = i >= 2;
        for (auto [m, count] : {std::pair{&out.train, cells.train[i]}, std::pair{&out.test, cells.test[i]}}) {
            StratumOutcome s;
            s.name = cell_names[i];
            s.requested_total = count;
            (mw ? s.requested_malware : s.requested_goodware) = count;
            (mw ? s.sampled_malware : s.sampled_goodware) = count;
            m->strata.push_back(std::move(s));
        }
    }
    for (auto* m : {&out.train, &out.test}) {
        detail::sort_entries(m->entries);
        for (const auto& e : m->entries) m->created = std::max(m->created, e.date);
        if (pop.snapshot_date()) m->created = *pop.snapshot_date();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization.

inline nlohmann::json to_json(const ManifestSpec& s) {
    nlohmann::json j;
    j["kind"] = s.kind;
    j["vtt"] = s.rule.vtt;
    j["timestamp"] = to_string(s.policy.kind);
    j["timestamp_fallback"] = s.policy.fallback ? nlohmann::json(to_string(*s.policy.fallback)) : nlohmann::json();
    j["plan"] = {{"name", s.plan.name()},
                 {"mode", to_string(s.plan.mode)},
                 {"spatial", s.plan.spatial},
                 {"ratio_malware", s.plan.ratio_malware}};
    j["params"] = {{"confidence", s.params.confidence},
                   {"delta", s.params.delta},
                   {"p", s.params.p},
                   {"bonferroni_m", s.params.bonferroni_m ? nlohmann::json(*s.params.bonferroni_m) : nlohmann::json()}};
    j["seed"] = s.seed;
    j["snapshot_date"] = s.snapshot_date ? nlohmann::json(format_timestamp(*s.snapshot_date)) : nlohmann::json();
    j["market_filter"] = s.market_filter;
    j["consistency_threshold"] = s.consistency_threshold;
    j["provenance"] = s.provenance;
    return j;
}

inline ManifestSpec manifest_spec_from_json(const nlohmann::json& j) {
    ManifestSpec s;
    s.kind = j.at("kind").get<std::string>();
    s.rule.vtt = j.at("vtt").get<std::uint32_t>();
    s.policy.kind = parse_timestamp_kind(j.at("timestamp").get<std::string>());
    if (!j.at("timestamp_fallback").is_null()) {
        s.policy.fallback = parse_timestamp_kind(j.at("timestamp_fallback").get<std::string>());
    }
    const auto& plan = j.at("plan");
    s.plan.mode = parse_sizing_mode(plan.at("mode").get<std::string>());
    s.plan.spatial = plan.at("spatial").get<bool>();
    s.plan.ratio_malware = plan.at("ratio_malware").get<double>();
    const auto& params = j.at("params");
    s.params.confidence = params.at("confidence").get<double>();
    s.params.delta = params.at("delta").get<double>();
    s.params.p = params.at("p").get<double>();
    if (!params.at("bonferroni_m").is_null()) s.params.bonferroni_m = params.at("bonferroni_m").get<std::uint32_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("snapshot_date").is_null()) s.snapshot_date = parse_timestamp(j.at("snapshot_date").get<std::string>());
    s.market_filter = j.at("market_filter").get<std::set<std::string>>();
    s.consistency_threshold = j.at("consistency_threshold").get<double>();
    s.provenance = j.at("provenance").get<std::string>();
    return s;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["spec"] = to_json(m.spec);
    j["created"] = format_timestamp(m.created);
    j["violations"] = m.violations;
    auto& strata = j["strata"] = nlohmann::json::array();
    for (const auto& s : m.strata) {
        strata.push_back({{"name", s.name},
                          {"period", s.period ? nlohmann::json(s.period->label()) : nlohmann::json()},
                          {"requested_total", s.requested_total},
                          {"requested_goodware", s.requested_goodware ? nlohmann::json(*s.requested_goodware) : nlohmann::json()},
                          {"requested_malware", s.requested_malware ? nlohmann::json(*s.requested_malware) : nlohmann::json()},
                          {"sampled_goodware", s.sampled_goodware},
                          {"sampled_malware", s.sampled_malware},
                          {"shortfall", s.shortfall}});
    }
    auto& entries = j["entries"] = nlohmann::json::array();
    for (const auto& e : m.entries) {
        entries.push_back({{"sha256", e.sha256},
                           {"label", to_string(e.label)},
                           {"period", e.period.label()},
                           {"date", format_timestamp(e.date)},
                           {"dated_by", to_string(e.dated_by)},
                           {"markets", e.markets},
                           {"family", e.family ? nlohmann::json(*e.family) : nlohmann::json()}});
    }
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.spec = manifest_spec_from_json(j.at("spec"));
        m.created = parse_timestamp(j.at("created").get<std::string>());
        m.violations = j.at("violations").get<std::vector<std::string>>();
        for (const auto& s : j.at("strata")) {
            StratumOutcome o;
            o.name = s.at("name").get<std::string>();
            if (!s.at("period").is_null()) o.period = parse_period(s.at("period").get<std::string>());
            o.requested_total = s.at("requested_total").get<std::uint64_t>();
            if (!s.at("requested_goodware").is_null()) o.requested_goodware = s.at("requested_goodware").get<std::uint64_t>();
            if (!s.at("requested_malware").is_null()) o.requested_malware = s.at("requested_malware").get<std::uint64_t>();
            o.sampled_goodware = s.at("sampled_goodware").get<std::uint64_t>();
            o.sampled_malware = s.at("sampled_malware").get<std::uint64_t>();
            o.shortfall = s.at("shortfall").get<std::uint64_t>();
            m.strata.push_back(std::move(o));
        }
        for (const auto& e : j.at("entries")) {
            ManifestEntry x;
            x.sha256 = normalize_sha256(e.at("sha256").get<std::string>());
            x.label = parse_class_label(e.at("label").get<std::string>());
            x.period = parse_period(e.at("period").get<std::string>());
            x.date = parse_timestamp(e.at("date").get<std::string>());
            x.dated_by = parse_timestamp_kind(e.at("dated_by").get<std::string>());
            x.markets = normalize_markets(e.at("markets").get<std::vector<std::string>>());
            if (!e.at("family").is_null()) x.family = e.at("family").get<std::string>();
            m.entries.push_back(std::move(x));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

/// Flat hand-off list for feature pipelines.
inline std::string manifest_csv(const DatasetManifest& m) {
    std::string out = "sha256,label,period\n";
    for (const auto& e : m.entries) {
        out += e.sha256;
        out += ',';
        out += to_string(e.label);
        out += ',';
        out += e.period.label();
        out += '\n';
    }
    return out;
}

}  // namespace biaskit
