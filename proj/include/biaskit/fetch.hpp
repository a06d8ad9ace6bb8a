#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "httplib.h"

#include "biaskit/core.hpp"
#include "biaskit/io.hpp"

namespace biaskit {

struct FetchOptions {
    bool resume = true;
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::seconds timeout{60};
};

struct FetchResult {
    std::filesystem::path path;
    std::uint64_t bytes_downloaded = 0;  // this call only
    int attempts_used = 0;
    bool resumed = false;
    bool decompressed = false;
};

namespace detail {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string target;  // /path?query
    std::string path;    // /path
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw UsageError("not an absolute URL: " + url);
    auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw UsageError("unsupported URL scheme: " + scheme);
    auto slash = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, slash);
    out.target = slash == std::string::npos ? "/" : url.substr(slash);
    out.path = out.target.substr(0, out.target.find_first_of("?#"));
    return out;
}

inline std::mutex& destination_lock(const std::filesystem::path& dest) {
    static std::mutex registry_mutex;
    static std::map<std::string, std::unique_ptr<std::mutex>> locks;
    std::lock_guard guard(registry_mutex);
    auto key = std::filesystem::absolute(dest).lexically_normal().string();
    auto& slot = locks[key];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

inline std::uint64_t file_size_or_zero(const std::filesystem::path& p) {
    std::error_code ec;
    auto s = std::filesystem::file_size(p, ec);
    return ec ? 0 : s;
}

}  // namespace detail

/// Downloads `url` to `destination`. A ".gz" URL is inflated on arrival.
/// Partial data lives in "<destination>.part" and is resumed with a byte
/// range request when the server honours one.
inline FetchResult fetch_metadata(const std::string& url, const std::filesystem::path& destination,
                                  const FetchOptions& opts = {}) {
    auto parts = detail::split_url(url);
    const bool gz = parts.path.size() > 3 && parts.path.substr(parts.path.size() - 3) == ".gz";
    std::lock_guard single_flight(detail::destination_lock(destination));

    if (destination.has_parent_path()) std::filesystem::create_directories(destination.parent_path());
    const std::filesystem::path part = destination.string() + ".part";
    if (!opts.resume) std::filesystem::remove(part);

    FetchResult result;
    result.path = destination;
    std::string last_error;
    auto backoff = opts.initial_backoff;

    for (int attempt = 1; attempt <= opts.attempts; ++attempt) {
        result.attempts_used = attempt;
        httplib::Client client(parts.origin);
        client.set_follow_location(true);
        client.set_connection_timeout(opts.timeout);
        client.set_read_timeout(opts.timeout);

        const std::uint64_t offset = detail::file_size_or_zero(part);
        httplib::Headers headers;
        if (offset > 0) headers.emplace("Range", "bytes=" + std::to_string(offset) + "-");

        std::ofstream out;
        int status = 0;
        bool complete_already = false;
        auto res = client.Get(
            parts.target, headers,
            [&](const httplib::Response& r) {
                status = r.status;
                if (r.status == 206 && offset > 0) {
                    out.open(part, std::ios::binary | std::ios::app);
                    result.resumed = true;
                    return true;
                }
                if (r.status == 200) {
                    out.open(part, std::ios::binary | std::ios::trunc);
                    return true;
                }
                if (r.status == 416 && offset > 0) complete_already = true;
                return false;
            },
            [&](const char* data, std::size_t len) {
                out.write(data, static_cast<std::streamsize>(len));
                result.bytes_downloaded += len;
                return static_cast<bool>(out);
            });
        out.close();

        if (complete_already || (res && (status == 200 || status == 206))) {
            if (gz) {
                auto inflated = io::read_file(part);
                io::write_file(destination, inflated);
                std::filesystem::remove(part);
                result.decompressed = true;
            } else {
                std::filesystem::rename(part, destination);
            }
            return result;
        }
        last_error = status != 0 ? "HTTP status " + std::to_string(status) : httplib::to_string(res.error());
        if (attempt < opts.attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw FetchError("fetch " + url + " failed after " + std::to_string(opts.attempts) + " attempts: " + last_error);
}

}  // namespace biaskit
