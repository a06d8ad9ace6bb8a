#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace biaskit {

inline constexpr const char* kVersion = "0.3.1";

// Error taxonomy. Everything derives from Error so callers can catch broadly.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RangeError : Error {
    using Error::Error;
};
struct UsageError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct ResolutionError : Error {
    using Error::Error;
};
struct FetchError : Error {
    using Error::Error;
};
struct ConstraintError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Timestamps: seconds since 1970-01-01T00:00:00 UTC.

struct Timestamp {
    std::int64_t seconds = 0;

    constexpr auto operator<=>(const Timestamp&) const = default;
};

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr int kMinYear = 1970;
inline constexpr int kMaxYear = 2100;

namespace detail {

inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    using namespace std::chrono;
    return sys_days{year{y} / month{m} / day{d}}.time_since_epoch().count();
}

struct Civil {
    int year;
    unsigned month;
    unsigned day;
    int hour;
    int minute;
    int second;
};

inline Civil to_civil(Timestamp ts) {
    using namespace std::chrono;
    std::int64_t days = ts.seconds / kSecondsPerDay;
    std::int64_t rem = ts.seconds % kSecondsPerDay;
    if (rem < 0) {
        rem += kSecondsPerDay;
        --days;
    }
    year_month_day ymd{sys_days{std::chrono::days{days}}};
    return Civil{static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                 static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                 static_cast<int>((rem % 3600) / 60), static_cast<int>(rem % 60)};
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

}  // namespace detail

inline Timestamp make_timestamp(int y, unsigned m, unsigned d, int hh = 0, int mm = 0, int ss = 0) {
    using namespace std::chrono;
    if (y < kMinYear || y > kMaxYear) {
        throw RangeError("year " + std::to_string(y) + " outside supported range 1970-2100");
    }
    if (!year_month_day{year{y} / month{m} / day{d}}.ok() || hh < 0 || hh > 23 || mm < 0 || mm > 59 ||
        ss < 0 || ss > 60) {
        throw RangeError("invalid calendar date/time");
    }
    return Timestamp{detail::days_from_civil(y, m, d) * kSecondsPerDay + hh * 3600 + mm * 60 + ss};
}

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM:SS", "YYYY-MM-DDTHH:MM:SS" with an
/// optional trailing "Z" or fractional seconds. Date-only means midnight UTC.
/// `utc_offset_seconds` is subtracted to convert local wall time to UTC.
inline Timestamp parse_timestamp(std::string_view text, std::int64_t utc_offset_seconds = 0) {
    auto s = detail::trim(text);
    int y = 0, mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
    if (s.size() < 10 || s[4] != '-' || s[7] != '-' || !detail::parse_fixed_int(s, 0, 4, y) ||
        !detail::parse_fixed_int(s, 5, 2, mo) || !detail::parse_fixed_int(s, 8, 2, d)) {
        throw FormatError("unparseable timestamp '" + std::string(text) + "'");
    }
    if (s.size() > 10) {
        if ((s[10] != ' ' && s[10] != 'T') || s.size() < 19 || s[13] != ':' || s[16] != ':' ||
            !detail::parse_fixed_int(s, 11, 2, hh) || !detail::parse_fixed_int(s, 14, 2, mi) ||
            !detail::parse_fixed_int(s, 17, 2, ss)) {
            throw FormatError("unparseable timestamp '" + std::string(text) + "'");
        }
        auto tail = s.substr(19);
        if (!tail.empty() && tail.front() == '.') {
            tail.remove_prefix(1);
            while (!tail.empty() && std::isdigit(static_cast<unsigned char>(tail.front()))) tail.remove_prefix(1);
        }
        if (tail == "Z") tail = {};
        if (!tail.empty()) throw FormatError("unparseable timestamp '" + std::string(text) + "'");
    }
    if (mo < 1 || mo > 12) throw RangeError("invalid month in '" + std::string(text) + "'");
    auto ts = make_timestamp(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), hh, mi, ss);
    ts.seconds -= utc_offset_seconds;
    return ts;
}

inline std::string format_timestamp(Timestamp ts) {
    auto c = detail::to_civil(ts);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", c.year, c.month, c.day, c.hour, c.minute,
                  c.second);
    return buf;
}

inline std::string format_date(Timestamp ts) {
    auto c = detail::to_civil(ts);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

// ---------------------------------------------------------------------------
// Calendar periods.

enum class Granularity { Month, Year };

inline std::string_view to_string(Granularity g) { return g == Granularity::Month ? "month" : "year"; }

/// A calendar month or year. `index` counts from 1970-01 (months) or 1970 (years).
struct Period {
    Granularity granularity = Granularity::Month;
    std::int32_t index = 0;

    static Period month(int y, unsigned m) {
        if (y < kMinYear || y > kMaxYear || m < 1 || m > 12) throw RangeError("month period out of range");
        return {Granularity::Month, (y - kMinYear) * 12 + static_cast<std::int32_t>(m) - 1};
    }
    static Period year(int y) {
        if (y < kMinYear || y > kMaxYear) throw RangeError("year period out of range");
        return {Granularity::Year, y - kMinYear};
    }

    [[nodiscard]] int calendar_year() const {
        return granularity == Granularity::Year ? kMinYear + index : kMinYear + index / 12;
    }
    [[nodiscard]] unsigned calendar_month() const {
        return granularity == Granularity::Month ? static_cast<unsigned>(index % 12) + 1 : 1;
    }
    [[nodiscard]] Period successor() const { return {granularity, index + 1}; }
    [[nodiscard]] Period predecessor() const { return {granularity, index - 1}; }

    /// The enclosing year of a month period (identity for years).
    [[nodiscard]] Period as_year() const { return {Granularity::Year, calendar_year() - kMinYear}; }

    [[nodiscard]] Timestamp begin() const {
        return make_timestamp(calendar_year(), calendar_month(), 1);
    }
    /// First instant after the period.
    [[nodiscard]] Timestamp end() const {
        auto next = successor();
        if (next.calendar_year() > kMaxYear) {
            return Timestamp{detail::days_from_civil(kMaxYear + 1, 1, 1) * kSecondsPerDay};
        }
        return next.begin();
    }
    [[nodiscard]] bool contains(Timestamp ts) const { return ts >= begin() && ts < end(); }

    [[nodiscard]] std::string label() const {
        char buf[16];
        if (granularity == Granularity::Year) {
            std::snprintf(buf, sizeof buf, "%04d", calendar_year());
        } else {
            std::snprintf(buf, sizeof buf, "%04d-%02u", calendar_year(), calendar_month());
        }
        return buf;
    }

    friend bool operator==(const Period&, const Period&) = default;
    friend std::strong_ordering operator<=>(const Period& a, const Period& b) {
        if (auto c = a.granularity <=> b.granularity; c != 0) return c;
        return a.index <=> b.index;
    }
};

inline Period period_of(Timestamp ts, Granularity g) {
    auto c = detail::to_civil(ts);
    if (ts.seconds < 0 || c.year > kMaxYear) throw RangeError("timestamp outside supported range 1970-2100");
    return g == Granularity::Month ? Period::month(c.year, c.month) : Period::year(c.year);
}

/// Parses "YYYY" (year) or "YYYY-MM" (month).
inline Period parse_period(std::string_view text) {
    auto s = detail::trim(text);
    int y = 0, m = 0;
    if (s.size() == 4 && detail::parse_fixed_int(s, 0, 4, y)) return Period::year(y);
    if (s.size() == 7 && s[4] == '-' && detail::parse_fixed_int(s, 0, 4, y) && detail::parse_fixed_int(s, 5, 2, m)) {
        if (m < 1 || m > 12) throw RangeError("invalid month in '" + std::string(text) + "'");
        return Period::month(y, static_cast<unsigned>(m));
    }
    throw FormatError("unparseable period '" + std::string(text) + "'");
}

inline std::int32_t distance(Period from, Period to) {
    if (from.granularity != to.granularity) throw UsageError("period granularity mismatch");
    return to.index - from.index;
}

inline std::vector<Period> period_range(Period start, Period end) {
    if (start.granularity != end.granularity) throw UsageError("period_range: mismatched granularity");
    if (end < start) throw UsageError("period_range: start after end");
    std::vector<Period> out;
    out.reserve(static_cast<std::size_t>(end.index - start.index + 1));
    for (auto p = start; p <= end; p = p.successor()) out.push_back(p);
    return out;
}

// ---------------------------------------------------------------------------
// Domain records.

enum class ClassLabel { Goodware, Greyware, Malware };

inline std::string_view to_string(ClassLabel c) {
    switch (c) {
        case ClassLabel::Goodware: return "goodware";
        case ClassLabel::Greyware: return "greyware";
        case ClassLabel::Malware: return "malware";
    }
    return "?";
}

inline ClassLabel parse_class_label(std::string_view s) {
    s = detail::trim(s);
    if (s == "goodware" || s == "0") return ClassLabel::Goodware;
    if (s == "malware" || s == "1") return ClassLabel::Malware;
    if (s == "greyware") return ClassLabel::Greyware;
    throw FormatError("unknown class label '" + std::string(s) + "'");
}

inline constexpr std::string_view kUnknownMarket = "unknown";
inline constexpr std::string_view kGooglePlay = "play.google.com";

inline bool is_sha256(std::string_view s) {
    return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

inline std::string normalize_sha256(std::string_view s) {
    s = detail::trim(s);
    if (!is_sha256(s)) throw FormatError("invalid sha256 '" + std::string(s) + "'");
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Sorted, de-duplicated market tags; an empty input becomes {"unknown"}.
inline std::vector<std::string> normalize_markets(std::vector<std::string> tags) {
    std::vector<std::string> out;
    for (auto& t : tags) {
        auto v = detail::trim(t);
        if (!v.empty()) out.emplace_back(v);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty()) out.emplace_back(kUnknownMarket);
    return out;
}

struct ApkRecord {
    std::string sha256;
    Timestamp dex_date;
    std::optional<Timestamp> crawl_date;
    std::optional<std::uint32_t> vt_detection;
    std::optional<Timestamp> vt_scan_date;
    std::vector<std::string> markets{std::string(kUnknownMarket)};
    std::uint64_t apk_size = 0;
    std::optional<std::string> family;

    [[nodiscard]] bool has_market(std::string_view tag) const {
        return std::find(markets.begin(), markets.end(), tag) != markets.end();
    }

    friend bool operator==(const ApkRecord&, const ApkRecord&) = default;
};

/// A set of records with unique hashes. Records are kept sorted by sha256.
class Population {
public:
    Population() = default;

    explicit Population(std::vector<ApkRecord> records, std::string provenance = {},
                        std::optional<Timestamp> snapshot_date = std::nullopt)
        : records_(std::move(records)), provenance_(std::move(provenance)), snapshot_date_(snapshot_date) {
        std::sort(records_.begin(), records_.end(),
                  [](const ApkRecord& a, const ApkRecord& b) { return a.sha256 < b.sha256; });
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (records_[i].markets.empty()) throw DomainError("record " + records_[i].sha256 + " has no market tag");
            if (i > 0 && records_[i].sha256 == records_[i - 1].sha256) {
                throw DomainError("duplicate sha256 in population: " + records_[i].sha256);
            }
        }
        if (snapshot_date_) {
            for (const auto& r : records_) {
                if (!r.crawl_date || *r.crawl_date > *snapshot_date_) {
                    throw DomainError("record " + r.sha256 + " crawled after snapshot date");
                }
            }
        }
    }

    [[nodiscard]] const std::vector<ApkRecord>& records() const noexcept { return records_; }
    [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
    [[nodiscard]] bool empty() const noexcept { return records_.empty(); }
    [[nodiscard]] const std::string& provenance() const noexcept { return provenance_; }
    [[nodiscard]] const std::optional<Timestamp>& snapshot_date() const noexcept { return snapshot_date_; }

    [[nodiscard]] const ApkRecord* find(std::string_view sha) const {
        auto it = std::lower_bound(records_.begin(), records_.end(), sha,
                                   [](const ApkRecord& r, std::string_view h) { return r.sha256 < h; });
        return (it != records_.end() && it->sha256 == sha) ? &*it : nullptr;
    }

    auto begin() const { return records_.begin(); }
    auto end() const { return records_.end(); }

private:
    std::vector<ApkRecord> records_;
    std::string provenance_;
    std::optional<Timestamp> snapshot_date_;
};

}  // namespace biaskit
