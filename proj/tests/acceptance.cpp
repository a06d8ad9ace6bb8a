// Acceptance run: one [PASS]/[FAIL] line per criterion; exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"

using namespace biaskit;
namespace wf = biaskit::workflow;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kSampleSizeBudgetMs = 1.0;
constexpr double kSpatialBudgetSeconds = 10.0;
constexpr double kTwoDecimalTolerance = 1e-9;        // compared after rounding to 2 decimals
constexpr double kThreeDecimalTolerance = 0.0005 + 1e-9;
constexpr int kPropertyCases = 10000;

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
    std::printf("[%s] %s %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    if (!pass) ++failures;
}

void run(const char* id, const std::function<std::pair<bool, std::string>()>& body) {
    try {
        auto [pass, detail] = body();
        report(id, pass, detail);
    } catch (const std::exception& e) {
        report(id, false, std::string("threw: ") + e.what());
    }
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string raw_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_files(const fs::path& a, const fs::path& b, std::string& diff) {
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename();
        if (raw_bytes(e.path()) != raw_bytes(b / name)) {
            diff = name.string();
            return false;
        }
    }
    return true;
}

double round_to(double x, int digits) {
    const double s = std::pow(10.0, digits);
    return std::round(x * s) / s;
}

std::pair<bool, std::string> ac1() {
    const SizingParams params{0.99, 0.015, 0.5, std::nullopt};
    auto t0 = Clock::now();
    const auto n = required_sample_size(200000, params);
    const double ms = ms_since(t0);
    return {n == 7111 && ms < kSampleSizeBudgetMs,
            "n=" + std::to_string(n) + " expected=7111 " + fmt("runtime=%.4fms budget=%.1fms", ms, kSampleSizeBudgetMs)};
}

std::pair<bool, std::string> ac2() {
    struct Row {
        const char* name;
        std::vector<double> auts;
        double mu, sigma;
    };
    const std::vector<Row> rows{{"Drebin/DT", {0.69, 0.67, 0.79, 0.64}, 0.70, 0.06},
                                {"DeepDrebin/DT", {0.66, 0.72, 0.52, 0.82}, 0.68, 0.11},
                                {"MalScan/DT", {0.45, 0.42, 0.53, 0.83}, 0.56, 0.16},
                                {"Drebin/DA", {0.90, 0.87, 0.87, 0.80}, 0.86, 0.04}};
    bool ok = true;
    std::string detail;
    for (const auto& r : rows) {
        auto a = a_aut(r.auts);
        const bool pass = std::abs(round_to(a.mu, 2) - r.mu) <= kTwoDecimalTolerance &&
                          std::abs(round_to(a.sigma, 2) - r.sigma) <= kTwoDecimalTolerance;
        ok = ok && pass;
        detail += std::string(r.name) + fmt("=(%.2f,%.2f) ", round_to(a.mu, 2), round_to(a.sigma, 2));
    }
    return {ok, detail};
}

std::pair<bool, std::string> ac3() {
    testing_util::TempDir dir("acc3");
    wf::EvaluateArgs a;
    a.auts = {{"Drebin", {0.573, 0.488}}, {"Other", {0.620, 0.561}}};
    a.out = dir.path();
    auto rep = wf::cmd_evaluate(a);
    const auto* drebin = rep.rows[0].name == "Drebin" ? &rep.rows[0] : &rep.rows[1];
    const auto* other = drebin == &rep.rows[0] ? &rep.rows[1] : &rep.rows[0];
    const bool ok = std::abs(drebin->summary.mu - 0.531) <= kThreeDecimalTolerance &&
                    std::abs(drebin->summary.sigma - 0.043) <= kThreeDecimalTolerance &&
                    std::abs(other->summary.mu - 0.590) <= kThreeDecimalTolerance &&
                    std::abs(other->summary.sigma - 0.030) <= kThreeDecimalTolerance;
    return {ok, fmt("Drebin=(%.4f,%.4f) ", drebin->summary.mu, drebin->summary.sigma) +
                    fmt("Other=(%.4f,%.4f) ", other->summary.mu, other->summary.sigma) +
                    fmt("tol=%.4f", kThreeDecimalTolerance)};
}

std::pair<bool, std::string> ac4() {
    auto plan = rolling_splits(Period::month(2014, 1), Period::month(2018, 12), 12);
    const std::vector<std::string> expect{"2014|2015", "2015|2016", "2016|2017", "2017|2018"};
    std::vector<std::string> got;
    for (const auto& s : plan.splits) got.push_back(s.label());
    std::string detail;
    for (const auto& g : got) detail += g + " ";
    return {got == expect, detail};
}

std::pair<bool, std::string> ac5() {
    auto t0 = Clock::now();
    auto cfg = preset("stable");
    cfg.months = 24;
    cfg.per_month = 2000;
    auto pop = generate(cfg).population;
    auto plan = plan_sizes(pop, {}, {}, parse_sizing_plan("MoE/Spatial/Month"));
    auto m = stratified_sample(pop, {}, {}, plan, {});
    std::map<Period, std::pair<std::uint64_t, std::uint64_t>> per_month;
    for (const auto& e : m.entries) (e.label == ClassLabel::Malware ? per_month[e.period].second : per_month[e.period].first)++;
    std::size_t off = 0;
    for (const auto& [p, c] : per_month) {
        const auto n = c.first + c.second;
        if (c.second != round_half_up(0.1 * static_cast<double>(n))) ++off;
    }
    const auto verdicts = verify_constraints(m);
    const bool verified = all_mandatory_pass(verdicts);
    std::string failed;
    for (const auto& v : verdicts) {
        if (!v.pass && v.mandatory) failed += " [" + v.check + ": " + v.evidence + "]";
    }
    const double secs = ms_since(t0) / 1000.0;
    return {off == 0 && verified && secs < kSpatialBudgetSeconds,
            std::to_string(per_month.size()) + " months, " + std::to_string(off) + " off-ratio, verify=" +
                (verified ? "pass" : "fail" + failed) + fmt(" runtime=%.2fs budget=%.0fs", secs, kSpatialBudgetSeconds)};
}

std::pair<bool, std::string> ac6() {
    testing_util::TempDir dir("acc6");
    wf::SynthArgs s;
    s.preset = "market-skew";
    s.months = 12;
    s.per_month = 300;
    s.out = dir / "synth";
    auto out = wf::cmd_synth(s);
    auto cons = market_consistency(out.population, {});
    wf::SampleArgs a;
    a.population = dir / "synth" / "population.csv";
    a.out = dir / "sample";
    a.seed = 1;
    auto outcome = wf::cmd_sample(a);
    const bool refused = outcome.exit_code == wf::kExitConstraint && !fs::exists(dir / "sample" / "manifest.json");
    return {cons.tv_distance == 1.0 && !cons.pass && refused,
            fmt("tv=%.4f", cons.tv_distance) + " sample_exit=" + std::to_string(outcome.exit_code)};
}

std::pair<bool, std::string> ac7() {
    auto cfg = preset("churn");
    cfg.per_month = 100;
    auto pop = generate(cfg).population;
    std::vector<std::optional<std::string>> all;
    for (const auto& r : pop) all.push_back(r.family);
    Rng rng(2024);
    std::size_t mismatches = 0;
    for (int i = 0; i < 200; ++i) {
        auto pick = [&](std::size_t max) {
            std::vector<std::optional<std::string>> out;
            const auto n = 1 + rng.below(max);
            const auto start = rng.below(all.size() - n + 1);
            for (std::size_t k = 0; k < n; ++k) out.push_back(all[start + k]);
            return out;
        };
        auto slice = pick(1000);
        auto ref = pick(1000);
        std::size_t matched = 0;
        for (const auto& a : slice) {
            for (const auto& b : ref) {
                if (a && b && *a == *b) {
                    ++matched;
                    break;
                }
            }
        }
        const double brute = static_cast<double>(matched) / static_cast<double>(slice.size());
        if (family_overlap(slice, ref).phi != brute) ++mismatches;
    }
    return {mismatches == 0, "200 slices, " + std::to_string(mismatches) + " mismatches"};
}

std::pair<bool, std::string> ac8() {
    auto cfg = preset("late-backfill");
    cfg.months = 36;
    auto pop = generate(cfg).population;
    const auto cutoff = end_of_day(make_timestamp(2014, 12, 31));
    auto snap = snapshot_filter(pop, cutoff);
    const auto removed = pop.size() - snap.population.size();
    auto again = snapshot_filter(snap.population, cutoff);
    const bool idempotent = again.population.records() == snap.population.records();
    const TimestampPolicy dex{TimestampKind::CreationDex, {}};
    const auto tests = period_range(Period::month(2014, 2), Period::month(2014, 12));
    auto full = overlap_series(malware_observations(pop, {}, dex), Period::month(2014, 1), tests);
    auto cut = overlap_series(malware_observations(snap.population, {}, dex), Period::month(2014, 1), tests);
    const bool differ = full.points != cut.points;
    return {removed >= 1 && idempotent && differ, "removed=" + std::to_string(removed) +
                                                      " idempotent=" + (idempotent ? "yes" : "no") +
                                                      " series_differ=" + (differ ? "yes" : "no")};
}

std::pair<bool, std::string> ac9() {
    testing_util::TempDir dir("acc9");
    auto synth = [&](const std::string& name, unsigned threads) {
        wf::SynthArgs s;
        s.preset = "churn";
        s.months = 24;
        s.per_month = 500;
        s.threads = threads;
        s.out = dir / name;
        wf::cmd_synth(s);
    };
    auto sample = [&](const std::string& name, unsigned threads) {
        wf::SampleArgs a;
        a.population = dir / "synth1" / "population.csv";
        a.plan = parse_sizing_plan("MoE/Spatial/Month");
        a.seed = 77;
        a.threads = threads;
        a.out = dir / name;
        wf::cmd_sample(a);
    };
    synth("synth1", 1);
    synth("synth2", 1);
    synth("synth8", 8);
    sample("sample1", 1);
    sample("sample2", 1);
    sample("sample8", 8);
    std::string diff;
    bool ok = true;
    for (auto [a, b] : {std::pair{"synth1", "synth2"}, std::pair{"synth1", "synth8"}, std::pair{"sample1", "sample2"},
                        std::pair{"sample1", "sample8"}}) {
        if (!same_files(dir / a, dir / b, diff)) {
            ok = false;
            diff = std::string(a) + " vs " + b + ": " + diff;
            break;
        }
    }
    return {ok, ok ? "synth and sample byte-identical across reruns and 1 vs 8 threads" : diff};
}

std::pair<bool, std::string> ac10() {
    Rng rng(10);
    std::size_t bad = 0;
    for (int i = 0; i < kPropertyCases; ++i) {
        const auto vtt = static_cast<std::uint32_t>(1 + rng.below(40));
        const auto n = static_cast<std::uint32_t>(rng.below(80));
        const auto l = label_detections(n, LabelRule{vtt});
        if ((l == ClassLabel::Goodware) != (n == 0) || (l == ClassLabel::Malware) != (n >= vtt)) ++bad;
    }
    const std::size_t partition = bad;

    for (int i = 0; i < kPropertyCases; ++i) {
        const auto n = static_cast<std::uint32_t>(rng.below(60));
        const auto lo = static_cast<std::uint32_t>(1 + rng.below(40));
        const auto hi = lo + static_cast<std::uint32_t>(rng.below(10));
        if (label_detections(n, LabelRule{hi}) == ClassLabel::Malware && label_detections(n, LabelRule{lo}) != ClassLabel::Malware) ++bad;
    }
    const std::size_t monotone = bad - partition;

    for (int i = 0; i < kPropertyCases; ++i) {
        std::vector<double> v(1 + rng.below(24));
        for (auto& x : v) x = rng.uniform();
        const double a = aut(v);
        if (!(a >= 0.0 && a <= 1.0)) ++bad;
        const double c = rng.uniform();
        auto k = a_aut(std::vector<double>(1 + rng.below(10), c));
        if (std::abs(k.mu - c) > 1e-15 || k.sigma > 1e-15) ++bad;
    }
    const std::size_t metric = bad - partition - monotone;

    auto dist = [&] {
        Distribution d;
        double total = 0.0;
        for (const char* key : {"a", "b", "c", "d"}) {
            if (rng.below(3) == 0) continue;
            d[key] = rng.uniform() + 1e-3;
            total += d[key];
        }
        if (d.empty()) return Distribution{{"a", 1.0}};
        for (auto& [_, w] : d) w /= total;
        return d;
    };
    for (int i = 0; i < kPropertyCases; ++i) {
        auto p = dist(), q = dist(), r = dist();
        const double pq = tv_distance(p, q);
        if (pq < 0.0 || pq > 1.0 + 1e-12 || std::abs(pq - tv_distance(q, p)) > 1e-15 || tv_distance(p, p) > 1e-15 ||
            pq > tv_distance(p, r) + tv_distance(r, q) + 1e-12) {
            ++bad;
        }
    }
    const std::size_t tv = bad - partition - monotone - metric;
    return {bad == 0, std::to_string(kPropertyCases) + " cases each; violations partition=" + std::to_string(partition) +
                          " vtt_monotone=" + std::to_string(monotone) + " aut/a_aut=" + std::to_string(metric) +
                          " tv=" + std::to_string(tv)};
}

}  // namespace

int main() {
    std::setvbuf(stdout, nullptr, _IOLBF, 0);
    run("AC1 sample-size anchor", ac1);
    run("AC2 A-AUT table", ac2);
    run("AC3 case-study breakdown", ac3);
    run("AC4 rolling splits", ac4);
    run("AC5 spatial ratio per month", ac5);
    run("AC6 market skew refused", ac6);
    run("AC7 family overlap oracle", ac7);
    run("AC8 late backfill snapshot", ac8);
    run("AC9 determinism", ac9);
    run("AC10 metric properties", ac10);
    return failures;
}
