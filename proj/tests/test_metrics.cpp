#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace biaskit;
using testing_util::day;
using testing_util::sha;

namespace {

ManifestEntry entry(int id, Timestamp date, ClassLabel label) {
    ManifestEntry e;
    e.sha256 = sha(static_cast<unsigned>(id));
    e.label = label;
    e.date = date;
    e.period = period_of(date, Granularity::Month);
    e.markets = {"play.google.com"};
    return e;
}

double round_to(double x, int digits) {
    const double s = std::pow(10.0, digits);
    return std::round(x * s) / s;
}

std::vector<std::optional<std::string>> fams(std::initializer_list<const char*> names) {
    std::vector<std::optional<std::string>> out;
    for (const char* n : names) {
        if (n) out.emplace_back(n);
        else out.emplace_back(std::nullopt);
    }
    return out;
}

}  // namespace

TEST(Confusion, F1FromCounts) {
    Confusion c{8, 4, 0, 2};
    EXPECT_NEAR(*c.f1(), 16.0 / 22.0, 1e-12);
    EXPECT_NEAR(round_to(*c.f1(), 3), 0.727, 1e-12);
    EXPECT_NEAR(*c.precision(), 8.0 / 12.0, 1e-12);
    EXPECT_NEAR(*c.recall(), 0.8, 1e-12);
    EXPECT_DOUBLE_EQ(*c.fpr(), 1.0);
}

TEST(Confusion, NoPositivesLeavesF1Undefined) {
    Confusion c{0, 3, 7, 0};
    EXPECT_FALSE(c.f1().has_value());
    EXPECT_NEAR(*c.fpr(), 0.3, 1e-12);
}

TEST(Confusion, PerMonthCountsFromPredictions) {
    std::vector<ManifestEntry> truth{entry(1, day(2015, 1, 3), ClassLabel::Malware),
                                     entry(2, day(2015, 1, 4), ClassLabel::Goodware),
                                     entry(3, day(2015, 3, 9), ClassLabel::Malware),
                                     entry(4, day(2015, 3, 9), ClassLabel::Greyware)};
    PredictionSet preds("x", {{sha(1), 0.9, std::nullopt, std::nullopt},
                              {sha(2), 0.5, std::nullopt, std::nullopt},
                              {sha(3), 0.1, std::nullopt, std::nullopt}});
    auto rep = confusion_metrics(truth, preds);
    ASSERT_EQ(rep.counts.size(), 3u);
    EXPECT_EQ(rep.counts.at(Period::month(2015, 1)), (Confusion{1, 1, 0, 0}));
    EXPECT_EQ(rep.counts.at(Period::month(2015, 2)), Confusion{});
    EXPECT_EQ(rep.counts.at(Period::month(2015, 3)), (Confusion{0, 0, 0, 1}));
    auto f1 = rep.series(Metric::F1);
    EXPECT_FALSE(f1.points[1].value.has_value());
    EXPECT_THROW(aut(f1), DomainError);
    EXPECT_NEAR(aut(f1.defined_only()), (2.0 / 3.0 + 0.0) / 2.0, 1e-12);
}

TEST(Confusion, MissingPredictionIsResolutionError) {
    std::vector<ManifestEntry> truth{entry(1, day(2015, 1, 3), ClassLabel::Malware),
                                     entry(2, day(2015, 1, 4), ClassLabel::Goodware)};
    PredictionSet preds("x", {{sha(1), 0.9, std::nullopt, std::nullopt}});
    EXPECT_THROW(confusion_metrics(truth, preds), ResolutionError);
    ConfusionOptions lenient;
    lenient.lenient = true;
    auto rep = confusion_metrics(truth, preds, lenient);
    ASSERT_EQ(rep.missing.size(), 1u);
    EXPECT_EQ(rep.missing[0], sha(2));
}

TEST(Confusion, SplitSpecificRowsWin) {
    std::vector<ManifestEntry> truth{entry(1, day(2015, 1, 3), ClassLabel::Malware)};
    PredictionSet preds("x", {{sha(1), 0.9, std::nullopt, std::nullopt}, {sha(1), 0.1, std::nullopt, 2}});
    ConfusionOptions o;
    o.split = 2;
    EXPECT_EQ(confusion_metrics(truth, preds, o).counts.begin()->second.fn, 1u);
    o.split = 1;
    EXPECT_EQ(confusion_metrics(truth, preds, o).counts.begin()->second.tp, 1u);
}

TEST(Aut, Examples) {
    const std::vector<double> ones(12, 1.0);
    EXPECT_DOUBLE_EQ(aut(ones), 1.0);
    EXPECT_DOUBLE_EQ(aut(std::vector<double>{1.0, 0.0}), 0.5);
    EXPECT_DOUBLE_EQ(aut(std::vector<double>{0.7}), 0.7);
    EXPECT_NEAR(aut(std::vector<double>{0.2, 0.4, 0.6, 0.8}), 0.5, 1e-15);
    EXPECT_THROW(aut(std::vector<double>{}), DomainError);
}

TEST(AAut, PublishedRowsAtTwoDecimals) {
    struct Row {
        std::vector<double> auts;
        double mu, sigma;
    };
    const std::vector<Row> rows{
        {{0.69, 0.67, 0.79, 0.64}, 0.70, 0.06},
        {{0.66, 0.72, 0.52, 0.82}, 0.68, 0.11},
        {{0.45, 0.42, 0.53, 0.83}, 0.56, 0.16},
        {{0.90, 0.87, 0.87, 0.80}, 0.86, 0.04},
    };
    for (const auto& r : rows) {
        auto a = a_aut(r.auts);
        EXPECT_NEAR(round_to(a.mu, 2), r.mu, 1e-9);
        EXPECT_NEAR(round_to(a.sigma, 2), r.sigma, 1e-9);
    }
}

TEST(AAut, CaseStudyRows) {
    auto drebin = a_aut(std::vector<double>{0.573, 0.488});
    EXPECT_NEAR(drebin.mu, 0.531, 0.0005 + 1e-9);
    EXPECT_NEAR(drebin.sigma, 0.043, 0.0005 + 1e-9);
    auto other = a_aut(std::vector<double>{0.620, 0.561});
    EXPECT_NEAR(other.mu, 0.590, 0.0005 + 1e-9);
    EXPECT_NEAR(other.sigma, 0.030, 0.0005 + 1e-9);
}

TEST(AAut, PopulationStandardDeviation) {
    auto a = a_aut(std::vector<double>{0.0, 1.0});
    EXPECT_DOUBLE_EQ(a.mu, 0.5);
    EXPECT_DOUBLE_EQ(a.sigma, 0.5);
    EXPECT_THROW(a_aut(std::vector<double>{}), DomainError);
}

TEST(RollingSplits, FiveYearsYieldFourYearlySplits) {
    auto plan = rolling_splits(Period::month(2014, 1), Period::month(2018, 12), 12);
    ASSERT_EQ(plan.splits.size(), 4u);
    const std::vector<std::string> labels{"2014|2015", "2015|2016", "2016|2017", "2017|2018"};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(plan.splits[i].label(), labels[i]);
        EXPECT_EQ(plan.splits[i].train.size(), 12u);
        EXPECT_EQ(plan.splits[i].test.size(), 12u);
    }
}

TEST(RollingSplits, ExactlyTwoWindows) {
    auto plan = rolling_splits(Period::month(2020, 1), Period::month(2020, 12), 6);
    ASSERT_EQ(plan.splits.size(), 1u);
    EXPECT_EQ(plan.splits[0].test.back(), Period::month(2020, 12));
}

TEST(RollingSplits, ShortRangeRejected) {
    EXPECT_THROW(rolling_splits(Period::month(2020, 1), Period::month(2020, 11), 6), DomainError);
    EXPECT_THROW(rolling_splits(Period::year(2020), Period::year(2022), 12), UsageError);
    EXPECT_THROW(rolling_splits(Period::month(2020, 1), Period::month(2022, 1), 0), DomainError);
}

TEST(RollingSplits, PartialLastWindow) {
    auto strict = rolling_splits(Period::month(2014, 1), Period::month(2016, 6), 12);
    EXPECT_EQ(strict.splits.size(), 1u);
    auto partial = rolling_splits(Period::month(2014, 1), Period::month(2016, 6), 12, true);
    ASSERT_EQ(partial.splits.size(), 2u);
    EXPECT_EQ(partial.splits[1].test.size(), 6u);
}

TEST(FamilyOverlap, Examples) {
    auto ref = fams({"a", "b"});
    EXPECT_DOUBLE_EQ(family_overlap(fams({"a", "b"}), ref).phi, 1.0);
    EXPECT_DOUBLE_EQ(family_overlap(fams({"c", "d"}), ref).phi, 0.0);
    EXPECT_DOUBLE_EQ(family_overlap(fams({"a", "a", "c", "d"}), ref).phi, 0.5);
    auto r = family_overlap(fams({"a", nullptr}), ref);
    EXPECT_DOUBLE_EQ(r.phi, 0.5);
    EXPECT_EQ(r.unlabeled, 1u);
    EXPECT_THROW(family_overlap(fams({}), ref), DomainError);
}

namespace {

SynthConfig overlap_config(int per_month) {
    auto cfg = preset("stable");
    cfg.months = 36;
    cfg.per_month = per_month;
    return cfg;
}

std::vector<Period> years(int a, int b) { return period_range(Period::year(a), Period::year(b)); }

}  // namespace

TEST(OverlapSeries, StableFamiliesOverlapFully) {
    auto out = generate(overlap_config(500));
    auto obs = malware_observations(out.population, {}, {TimestampKind::CreationDex, {}});
    auto s = overlap_series(obs, Period::year(2014), years(2015, 2016));
    ASSERT_EQ(s.points.size(), 2u);
    for (const auto& p : s.points) EXPECT_DOUBLE_EQ(*p.value, 1.0);
}

TEST(OverlapSeries, FreshFamiliesNeverOverlap) {
    auto cfg = overlap_config(100);
    cfg.family_pool = 5;
    cfg.family_birth_rate = 5;
    cfg.family_lifetime = 1;
    auto out = generate(cfg);
    auto obs = malware_observations(out.population, {}, {TimestampKind::CreationDex, {}});
    auto s = overlap_series(obs, Period::month(2014, 1), period_range(Period::month(2014, 2), Period::month(2014, 12)));
    for (const auto& p : s.points) EXPECT_DOUBLE_EQ(*p.value, 0.0);
}

TEST(OverlapSeries, MonthWithoutMalwareIsUndefined) {
    std::vector<MalwareObservation> obs{{day(2014, 1, 5), "a"}, {day(2014, 3, 5), "a"}};
    auto s = overlap_series(obs, Period::month(2014, 1), {Period::month(2014, 2), Period::month(2014, 3)});
    EXPECT_FALSE(s.points[0].value.has_value());
    EXPECT_DOUBLE_EQ(*s.points[1].value, 1.0);
}

TEST(OverlapSeries, IndependentSamplesAgree) {
    auto cfg = preset("churn");
    cfg.per_month = 1000;
    auto out = generate(cfg);
    const TimestampPolicy policy{TimestampKind::CreationDex, {}};
    auto plan = plan_sizes(out.population, {}, policy, parse_sizing_plan("MoE/Spatial/Month"));
    std::vector<MetricSeries> runs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SampleOptions o;
        o.seed = seed;
        auto m = stratified_sample(out.population, {}, policy, plan, o);
        auto obs = malware_observations(m);
        runs.push_back(overlap_series(obs, Period::year(2014), years(2015, 2018)));
    }
    for (std::size_t i = 0; i < runs[0].points.size(); ++i) {
        double mean = 0.0;
        for (const auto& r : runs) mean += *r.points[i].value;
        mean /= static_cast<double>(runs.size());
        for (const auto& r : runs) EXPECT_NEAR(*r.points[i].value, mean, 0.05) << runs[0].points[i].period.label();
    }
    // Churn retires families, so the last year overlaps less than the first.
    EXPECT_LT(*runs[0].points.back().value, *runs[0].points.front().value);
}
