#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "biaskit.hpp"

namespace testing_util {

// Hex identity derived from an integer, so fixtures stay readable.
inline std::string sha(unsigned long long i) {
    char buf[65];
    std::snprintf(buf, sizeof buf, "%064llx", i);
    return buf;
}

inline biaskit::ApkRecord record(unsigned long long id, biaskit::Timestamp dex, std::optional<std::uint32_t> vt,
                                 std::vector<std::string> markets = {"play.google.com"},
                                 std::optional<biaskit::Timestamp> crawl = std::nullopt) {
    biaskit::ApkRecord r;
    r.sha256 = sha(id);
    r.dex_date = dex;
    r.crawl_date = crawl ? crawl : std::optional(dex);
    r.vt_detection = vt;
    r.markets = std::move(markets);
    return r;
}

inline biaskit::Timestamp day(int y, unsigned m, unsigned d) { return biaskit::make_timestamp(y, m, d); }

// Fresh scratch directory under the system temp dir.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("biaskit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing_util
