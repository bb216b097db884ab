#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sskf/errors.hpp"

namespace sskf::csv {

/// Shortest round-trip representation; NaN prints as "NA".
inline std::string format(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Accumulates rows in memory; call `str()` or `save()` when done.
class Writer {
public:
    explicit Writer(const std::vector<std::string>& header) { row(header); }
    Writer() = default;

    void comment(std::string_view text) {
        out_ << "# " << text << '\n';
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t k = 0; k < fields.size(); ++k) {
            if (k) out_ << ',';
            out_ << quote(fields[k]);
        }
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never observe a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open " + tmp.string() + " for writing");
        f << content;
        if (!f) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        return header.size();
    }
};

/// RFC-4180 style parser. Lines starting with '#' before the header are skipped.
inline Table parse(std::string_view text) {
    Table t;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false, field_started = false, have_header = false;
    std::size_t line = 1;
    auto finish_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
        if (!have_header) {
            t.header = std::move(record);
            have_header = true;
        } else if (!(record.size() == 1 && record[0].empty())) {
            t.rows.push_back(std::move(record));
        }
        record.clear();
    };
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (!have_header && record.empty() && !field_started && c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
            ++i;
            ++line;
            continue;
        }
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            finish_record();
            ++line;
        } else {
            field += c;
            field_started = true;
        }
        ++i;
    }
    if (in_quotes) throw IngestionError("unterminated quoted field", line, "");
    if (field_started || !record.empty()) finish_record();
    return t;
}

inline bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace sskf::csv
