#pragma once

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "biaskit/core.hpp"

namespace biaskit::io {

inline bool has_gzip_magic(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    unsigned char magic[2] = {0, 0};
    in.read(reinterpret_cast<char*>(magic), 2);
    return in.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
}

/// Reads a whole file, inflating it when it is gzip-compressed.
inline std::string read_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw FormatError("no such file: " + path.string());
    if (has_gzip_magic(path)) {
        gzFile gz = gzopen(path.c_str(), "rb");
        if (!gz) throw FormatError("cannot open gzip file: " + path.string());
        std::string out;
        char buf[1 << 16];
        int n;
        while ((n = gzread(gz, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
        int err = 0;
        const char* msg = gzerror(gz, &err);
        gzclose(gz);
        if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) {
            throw FormatError("corrupt gzip file " + path.string() + ": " + msg);
        }
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes `data`, gzip-compressing when the path ends in ".gz". gzip output
/// carries no timestamp, so equal input gives byte-identical files.
inline void write_file(const std::filesystem::path& path, std::string_view data) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (path.extension() == ".gz") {
        gzFile gz = gzopen(path.c_str(), "wb9");
        if (!gz) throw FormatError("cannot write " + path.string());
        if (!data.empty() && gzwrite(gz, data.data(), static_cast<unsigned>(data.size())) == 0) {
            gzclose(gz);
            throw FormatError("gzip write failed: " + path.string());
        }
        gzclose(gz);
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw FormatError("unterminated quote");
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

/// Line iterator over an in-memory document; strips a trailing '\r'.
class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    bool next(std::string_view& line) {
        if (pos_ >= text_.size()) return false;
        auto nl = text_.find('\n', pos_);
        if (nl == std::string_view::npos) nl = text_.size();
        line = text_.substr(pos_, nl - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = nl + 1;
        ++number_;
        return true;
    }
    [[nodiscard]] std::size_t line_number() const { return number_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t number_ = 0;
};

}  // namespace biaskit::io
