#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"

using namespace biaskit;
using testing_util::day;
using testing_util::record;

namespace {

constexpr int kCases = 10000;

Distribution random_distribution(Rng& rng) {
    static const char* keys[] = {"a", "b", "c", "d", "e"};
    Distribution d;
    double total = 0.0;
    for (const char* k : keys) {
        if (rng.below(3) == 0) continue;
        const double w = rng.uniform() + 1e-3;
        d[k] = w;
        total += w;
    }
    if (d.empty()) return {{"a", 1.0}};
    for (auto& [_, w] : d) w /= total;
    return d;
}

std::vector<std::optional<std::string>> random_families(Rng& rng, std::size_t n, int pool) {
    std::vector<std::optional<std::string>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.below(10) == 0) out.emplace_back(std::nullopt);
        else out.emplace_back("f" + std::to_string(rng.below(static_cast<std::uint64_t>(pool))));
    }
    return out;
}

}  // namespace

TEST(Property, LabelsPartitionEveryDetectionCount) {
    Rng rng(101);
    for (int i = 0; i < kCases; ++i) {
        const auto vtt = static_cast<std::uint32_t>(1 + rng.below(40));
        const auto n = static_cast<std::uint32_t>(rng.below(80));
        const auto l = label_detections(n, LabelRule{vtt});
        const int hits = (l == ClassLabel::Goodware) + (l == ClassLabel::Greyware) + (l == ClassLabel::Malware);
        ASSERT_EQ(hits, 1);
        ASSERT_EQ(l == ClassLabel::Goodware, n == 0);
        ASSERT_EQ(l == ClassLabel::Malware, n >= vtt);
    }
}

TEST(Property, LabelCountsSumToPopulation) {
    Rng rng(102);
    for (int i = 0; i < kCases; ++i) {
        std::vector<ApkRecord> recs;
        const auto n = 1 + rng.below(60);
        for (std::uint64_t k = 0; k < n; ++k) {
            std::optional<std::uint32_t> vt;
            if (rng.below(5)) vt = static_cast<std::uint32_t>(rng.below(30));
            recs.push_back(record(k + 1, day(2014, 1, 1), vt));
        }
        Population pop(recs);
        const LabelRule rule{static_cast<std::uint32_t>(1 + rng.below(20))};
        auto c = label_counts(pop, rule);
        ASSERT_EQ(c.goodware + c.greyware + c.malware + c.unknown, pop.size());
    }
}

TEST(Property, RaisingThresholdNeverAddsMalware) {
    Rng rng(103);
    for (int i = 0; i < kCases; ++i) {
        const auto n = static_cast<std::uint32_t>(rng.below(60));
        const auto lo = static_cast<std::uint32_t>(1 + rng.below(40));
        const auto hi = lo + static_cast<std::uint32_t>(rng.below(10));
        if (label_detections(n, LabelRule{hi}) == ClassLabel::Malware) {
            ASSERT_EQ(label_detections(n, LabelRule{lo}), ClassLabel::Malware);
        }
    }
    std::vector<ApkRecord> recs;
    for (int k = 0; k < 500; ++k) recs.push_back(record(k + 1, day(2014, 1, 1), static_cast<std::uint32_t>(rng.below(45))));
    Population pop(recs);
    double prev = 1.0;
    for (std::uint32_t v = 1; v <= 40; ++v) {
        const double c = vtt_coverage(pop, v);
        ASSERT_LE(c, prev);
        prev = c;
    }
}

TEST(Property, AutStaysInUnitInterval) {
    Rng rng(104);
    for (int i = 0; i < kCases; ++i) {
        std::vector<double> v(1 + rng.below(24));
        for (auto& x : v) x = rng.uniform();
        const double a = aut(v);
        ASSERT_GE(a, 0.0);
        ASSERT_LE(a, 1.0);
        ASSERT_GE(a, *std::min_element(v.begin(), v.end()) - 1e-12);
        ASSERT_LE(a, *std::max_element(v.begin(), v.end()) + 1e-12);
    }
}

TEST(Property, AutOfLinearSeriesIsItsMean) {
    Rng rng(105);
    for (int i = 0; i < kCases; ++i) {
        const double a = rng.uniform(), b = rng.uniform();
        const auto k = 2 + rng.below(24);
        std::vector<double> v(k);
        double mean = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            v[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(k - 1);
            mean += v[j];
        }
        ASSERT_NEAR(aut(v), mean / static_cast<double>(k), 1e-12);
    }
}

TEST(Property, AAutOfConstantIsExact) {
    Rng rng(106);
    for (int i = 0; i < kCases; ++i) {
        const double c = rng.uniform();
        std::vector<double> v(1 + rng.below(10), c);
        auto r = a_aut(v);
        ASSERT_NEAR(r.mu, c, 1e-15);
        ASSERT_NEAR(r.sigma, 0.0, 1e-15);
    }
}

TEST(Property, AAutIgnoresOrder) {
    Rng rng(107);
    for (int i = 0; i < kCases; ++i) {
        std::vector<double> v(1 + rng.below(10));
        for (auto& x : v) x = rng.uniform();
        auto a = a_aut(v);
        rng.shuffle(v);
        auto b = a_aut(v);
        ASSERT_NEAR(a.mu, b.mu, 1e-12);
        ASSERT_NEAR(a.sigma, b.sigma, 1e-12);
    }
}

TEST(Property, TvDistanceAxioms) {
    Rng rng(108);
    for (int i = 0; i < kCases; ++i) {
        auto p = random_distribution(rng), q = random_distribution(rng), r = random_distribution(rng);
        const double pq = tv_distance(p, q);
        ASSERT_GE(pq, 0.0);
        ASSERT_LE(pq, 1.0 + 1e-12);
        ASSERT_NEAR(pq, tv_distance(q, p), 1e-15);
        ASSERT_NEAR(tv_distance(p, p), 0.0, 1e-15);
        ASSERT_LE(pq, tv_distance(p, r) + tv_distance(r, q) + 1e-12);
    }
}

TEST(Property, FamilyOverlapMatchesBruteForce) {
    Rng rng(109);
    for (int i = 0; i < kCases; ++i) {
        const int pool = 1 + static_cast<int>(rng.below(30));
        auto slice = random_families(rng, 1 + rng.below(40), pool);
        auto ref = random_families(rng, rng.below(40), pool);
        std::size_t matched = 0;
        for (const auto& s : slice) {
            if (!s) continue;
            for (const auto& r : ref) {
                if (r && *r == *s) {
                    ++matched;
                    break;
                }
            }
        }
        auto res = family_overlap(slice, ref);
        ASSERT_EQ(res.matched, matched);
        ASSERT_DOUBLE_EQ(res.phi, static_cast<double>(matched) / static_cast<double>(slice.size()));
    }
}

TEST(Property, FamilyOverlapGrowsWithReference) {
    Rng rng(110);
    for (int i = 0; i < kCases; ++i) {
        auto slice = random_families(rng, 1 + rng.below(30), 20);
        auto ref = random_families(rng, rng.below(20), 20);
        const double before = family_overlap(slice, ref).phi;
        auto more = random_families(rng, 1 + rng.below(5), 20);
        ref.insert(ref.end(), more.begin(), more.end());
        ASSERT_GE(family_overlap(slice, ref).phi, before);
    }
}

TEST(Property, ConfusionCountsMatchBruteForce) {
    Rng rng(111);
    for (int i = 0; i < kCases; ++i) {
        std::vector<ManifestEntry> truth;
        std::vector<PredictionRow> rows;
        Confusion expect;
        const auto n = 1 + rng.below(50);
        for (std::uint64_t k = 0; k < n; ++k) {
            ManifestEntry e;
            e.sha256 = testing_util::sha(k + 1);
            e.label = rng.below(3) == 0 ? ClassLabel::Malware : ClassLabel::Goodware;
            e.date = day(2015, 1, 1 + static_cast<unsigned>(rng.below(28)));
            e.period = Period::month(2015, 1);
            truth.push_back(e);
            const double score = rng.uniform();
            rows.push_back({e.sha256, score, std::nullopt, std::nullopt});
            const bool actual = e.label == ClassLabel::Malware, predicted = score >= 0.5;
            if (actual && predicted) ++expect.tp;
            else if (actual) ++expect.fn;
            else if (predicted) ++expect.fp;
            else ++expect.tn;
        }
        auto rep = confusion_metrics(truth, PredictionSet("p", rows));
        ASSERT_EQ(rep.counts.size(), 1u);
        ASSERT_EQ(rep.counts.begin()->second, expect);
        if (auto f1 = expect.f1()) {
            ASSERT_GE(*f1, 0.0);
            ASSERT_LE(*f1, 1.0);
        }
    }
}

TEST(Property, SnapshotFilterIsIdempotentAndMonotone) {
    Rng rng(112);
    for (int i = 0; i < 500; ++i) {
        std::vector<ApkRecord> recs;
        for (int k = 0; k < 40; ++k) {
            const auto dex = day(2014, 1 + static_cast<unsigned>(rng.below(12)), 1);
            auto crawl = Timestamp{dex.seconds + static_cast<std::int64_t>(rng.below(800)) * kSecondsPerDay};
            recs.push_back(record(static_cast<unsigned long long>(k + 1), dex, 0, {"play.google.com"}, crawl));
        }
        Population pop(recs);
        const auto a = day(2014, 6, 1);
        const auto b = Timestamp{a.seconds + static_cast<std::int64_t>(rng.below(600)) * kSecondsPerDay};
        auto sa = snapshot_filter(pop, a).population;
        auto sb = snapshot_filter(pop, b).population;
        ASSERT_EQ(snapshot_filter(sa, a).population.records(), sa.records());
        ASSERT_LE(sa.size(), sb.size());
        for (const auto& r : sa) ASSERT_NE(sb.find(r.sha256), nullptr);
    }
}
