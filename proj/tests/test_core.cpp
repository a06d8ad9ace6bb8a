#include <gtest/gtest.h>

#include <set>

#include "helpers.hpp"

using namespace biaskit;
using testing_util::day;
using testing_util::record;
using testing_util::sha;

TEST(Period, MonthOfMidMonthTimestamp) {
    auto p = period_of(make_timestamp(2014, 1, 15), Granularity::Month);
    EXPECT_EQ(p, Period::month(2014, 1));
    EXPECT_EQ(p.label(), "2014-01");
}

TEST(Period, LastSecondOfYearStaysInYear) {
    auto p = period_of(make_timestamp(2014, 12, 31, 23, 59, 59), Granularity::Year);
    EXPECT_EQ(p, Period::year(2014));
    EXPECT_EQ(p.label(), "2014");
    EXPECT_EQ(period_of(make_timestamp(2015, 1, 1), Granularity::Year), Period::year(2015));
}

TEST(Period, MonthDistance) {
    auto from = Period::month(2014, 1);
    auto to = period_of(make_timestamp(2018, 6, 1), Granularity::Month);
    EXPECT_EQ(distance(from, to), 53);
}

TEST(Period, SuccessorAndPredecessorCrossYears) {
    EXPECT_EQ(Period::month(2014, 12).successor(), Period::month(2015, 1));
    EXPECT_EQ(Period::month(2015, 1).predecessor(), Period::month(2014, 12));
    EXPECT_EQ(Period::year(2014).successor(), Period::year(2015));
    EXPECT_EQ(Period::month(2016, 7).as_year(), Period::year(2016));
}

TEST(Period, BeginEndContains) {
    auto feb = Period::month(2016, 2);
    EXPECT_EQ(feb.begin(), make_timestamp(2016, 2, 1));
    EXPECT_EQ(feb.end(), make_timestamp(2016, 3, 1));
    EXPECT_TRUE(feb.contains(make_timestamp(2016, 2, 29, 23, 59, 59)));
    EXPECT_FALSE(feb.contains(make_timestamp(2016, 3, 1)));
}

TEST(Period, OutOfRangeTimestampThrows) {
    EXPECT_THROW(period_of(Timestamp{-1}, Granularity::Month), RangeError);
    EXPECT_THROW(make_timestamp(2101, 1, 1), RangeError);
    EXPECT_THROW(make_timestamp(1969, 12, 31), RangeError);
    EXPECT_THROW(make_timestamp(2015, 2, 29), RangeError);
}

TEST(Period, ParseLabels) {
    EXPECT_EQ(parse_period("2014"), Period::year(2014));
    EXPECT_EQ(parse_period("2014-03"), Period::month(2014, 3));
    EXPECT_THROW(parse_period("2014-13"), RangeError);
    EXPECT_THROW(parse_period("14-03"), FormatError);
}

TEST(PeriodRange, YearlyInclusive) {
    auto r = period_range(Period::year(2014), Period::year(2018));
    ASSERT_EQ(r.size(), 5u);
    EXPECT_EQ(r.front().label(), "2014");
    EXPECT_EQ(r.back().label(), "2018");
}

TEST(PeriodRange, MonthlyAndSingleton) {
    EXPECT_EQ(period_range(Period::month(2014, 1), Period::month(2014, 3)).size(), 3u);
    auto one = period_range(Period::year(2014), Period::year(2014));
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0], Period::year(2014));
}

TEST(PeriodRange, MismatchedGranularityIsUsageError) {
    EXPECT_THROW(period_range(Period::year(2014), Period::month(2014, 5)), UsageError);
    EXPECT_THROW(period_range(Period::year(2015), Period::year(2014)), UsageError);
}

TEST(PeriodProperty, MonthLiesWithinYear) {
    Rng rng(11);
    const auto lo = make_timestamp(1970, 1, 1).seconds;
    const auto hi = make_timestamp(2100, 12, 31, 23, 59, 59).seconds;
    for (int i = 0; i < 20000; ++i) {
        Timestamp ts{lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)))};
        auto m = period_of(ts, Granularity::Month);
        auto y = period_of(ts, Granularity::Year);
        ASSERT_EQ(m.as_year(), y);
        ASSERT_TRUE(m.contains(ts));
        ASSERT_TRUE(y.contains(ts));
        ASSERT_LE(y.begin(), m.begin());
        ASSERT_LE(m.end(), y.end());
    }
}

TEST(PeriodProperty, RangeLengthMatchesDistance) {
    Rng rng(12);
    for (int i = 0; i < 10000; ++i) {
        const auto a = static_cast<std::int32_t>(rng.below(600));
        const auto b = a + static_cast<std::int32_t>(rng.below(200));
        Period s{Granularity::Month, a}, e{Granularity::Month, b};
        auto r = period_range(s, e);
        ASSERT_EQ(static_cast<std::int32_t>(r.size()), distance(s, e) + 1);
        for (std::size_t k = 1; k < r.size(); ++k) ASSERT_EQ(r[k], r[k - 1].successor());
    }
}

TEST(Timestamp, ParseVariants) {
    EXPECT_EQ(parse_timestamp("2014-03-05"), make_timestamp(2014, 3, 5));
    EXPECT_EQ(parse_timestamp("2014-03-05 10:11:12"), make_timestamp(2014, 3, 5, 10, 11, 12));
    EXPECT_EQ(parse_timestamp("2014-03-05T10:11:12Z"), make_timestamp(2014, 3, 5, 10, 11, 12));
    EXPECT_EQ(parse_timestamp("2014-03-05T10:11:12.345"), make_timestamp(2014, 3, 5, 10, 11, 12));
    EXPECT_EQ(parse_timestamp("2014-03-05 02:00:00", 3600), make_timestamp(2014, 3, 5, 1, 0, 0));
    EXPECT_THROW(parse_timestamp("2014/03/05"), FormatError);
    EXPECT_THROW(parse_timestamp("2014-03-05 10:11"), FormatError);
}

TEST(Timestamp, FormatRoundTrip) {
    auto ts = make_timestamp(2019, 12, 31, 23, 0, 7);
    EXPECT_EQ(format_timestamp(ts), "2019-12-31 23:00:07");
    EXPECT_EQ(parse_timestamp(format_timestamp(ts)), ts);
    EXPECT_EQ(format_date(ts), "2019-12-31");
}

TEST(Identity, Sha256Normalization) {
    std::string upper(64, 'A');
    EXPECT_TRUE(is_sha256(upper));
    EXPECT_EQ(normalize_sha256(upper), std::string(64, 'a'));
    EXPECT_FALSE(is_sha256(std::string(63, 'a')));
    EXPECT_FALSE(is_sha256(std::string(64, 'g')));
}

TEST(Identity, MarketsNeverEmpty) {
    EXPECT_EQ(normalize_markets({}), std::vector<std::string>{"unknown"});
    EXPECT_EQ(normalize_markets({"b", "a", "b"}), (std::vector<std::string>{"a", "b"}));
}

TEST(PopulationModel, SortedUniqueAndSearchable) {
    Population pop({record(3, day(2014, 1, 1), 0), record(1, day(2014, 1, 1), 5)}, "toy");
    ASSERT_EQ(pop.size(), 2u);
    EXPECT_EQ(pop.records().front().sha256, sha(1));
    ASSERT_NE(pop.find(sha(3)), nullptr);
    EXPECT_EQ(pop.find(sha(2)), nullptr);
    EXPECT_EQ(pop.provenance(), "toy");
}

TEST(PopulationModel, DuplicateHashRejected) {
    EXPECT_THROW(Population({record(1, day(2014, 1, 1), 0), record(1, day(2015, 1, 1), 0)}), DomainError);
}

TEST(PopulationModel, EmptyMarketsRejected) {
    auto r = record(1, day(2014, 1, 1), 0);
    r.markets.clear();
    EXPECT_THROW(Population({r}), DomainError);
}

TEST(PopulationModel, SnapshotDateBoundsCrawlDates) {
    auto r = record(1, day(2014, 1, 1), 0, {"play.google.com"}, day(2017, 9, 1));
    EXPECT_THROW(Population({r}, "", day(2017, 6, 30)), DomainError);
    EXPECT_NO_THROW(Population({r}, "", day(2017, 9, 1)));
}

TEST(Rng, DeterministicAndBounded) {
    Rng a(5), b(5);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
    Rng c(6);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 10000; ++i) {
        auto v = c.below(7);
        ASSERT_LT(v, 7u);
        seen.insert(v);
        auto u = c.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
    EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, DerivedSeedsDifferByKey) {
    EXPECT_NE(derive_seed(1, {1, 0}), derive_seed(1, {0, 1}));
    EXPECT_NE(derive_seed(1, {5}), derive_seed(2, {5}));
    EXPECT_EQ(derive_seed(9, {3, 4}), derive_seed(9, {3, 4}));
}

TEST(Rng, ShuffleIsPermutation) {
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i) v[i] = i;
    Rng rng(3);
    rng.shuffle(v);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i) ASSERT_EQ(sorted[i], i);
    EXPECT_NE(v, sorted);
}
