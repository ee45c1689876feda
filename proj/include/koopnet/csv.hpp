#pragma once

// Comma-separated files: UTF-8, LF line endings, one header row, '#' comment
// lines ignored on read. Doubles are written in the shortest form that parses
// back to the same binary64 value.

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopnet/error.hpp"
#include "koopnet/snapshot.hpp"

namespace koopnet::csv {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw InternalError("format_double: to_chars failed");
    return std::string(buf.data(), end);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError("'" + std::string(s) + "' is not a number");
    }
    return v;
}

inline std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Header plus string rows, written in one go.
class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_comment(std::string text) { comments_.push_back(std::move(text)); }

    void add_row(std::vector<std::string> row) {
        if (row.size() != header_.size()) throw ShapeError("csv row width does not match header");
        rows_.push_back(std::move(row));
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_.size(); }

    [[nodiscard]] std::string str() const {
        std::string out;
        for (const auto& c : comments_) out += "# " + c + "\n";
        append_line(out, header_);
        for (const auto& r : rows_) append_line(out, r);
        return out;
    }

private:
    static void append_line(std::string& out, const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += fields[i];
        }
        out += '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never see a half-written file.
inline void write_atomic(const fs::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Rows of a CSV file after comment stripping, each with its 1-based line number.
struct ParsedCsv {
    std::vector<std::string> header;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::vector<std::string> comments;
};

inline ParsedCsv parse(std::string_view text, const std::string& origin) {
    ParsedCsv out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto c = line.substr(1);
            while (!c.empty() && c.front() == ' ') c.remove_prefix(1);
            out.comments.emplace_back(c);
            continue;
        }
        auto fields = split_fields(line);
        if (!have_header) {
            out.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != out.header.size()) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(out.header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        out.rows.emplace_back(line_no, std::move(fields));
    }
    if (!have_header) throw ParseError(origin + ": missing header row");
    return out;
}

/// Looks for a "# dt=<value>" comment.
inline std::optional<double> dt_from_comments(const std::vector<std::string>& comments) {
    for (const auto& c : comments) {
        if (c.rfind("dt=", 0) == 0) return parse_double(std::string_view(c).substr(3));
    }
    return std::nullopt;
}

inline std::string snapshots_str(const SnapshotMatrix& s) {
    Table t(s.effective_labels());
    t.add_comment("dt=" + format_double(s.dt()));
    const auto& d = s.data();
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(d.cols()));
        for (Eigen::Index c = 0; c < d.cols(); ++c) row.push_back(format_double(d(r, c)));
        t.add_row(std::move(row));
    }
    return t.str();
}

inline void write_snapshots(const fs::path& path, const SnapshotMatrix& s) { write_atomic(path, snapshots_str(s)); }

/// Parses a snapshot matrix. dt comes from `dt` when given, else from a
/// "# dt=" comment, else defaults to 1.
inline SnapshotMatrix parse_snapshots(std::string_view text, const std::string& origin,
                                      std::optional<double> dt = std::nullopt) {
    const auto csv = parse(text, origin);
    if (csv.rows.size() < 2) {
        throw ParseError(origin + ": need at least 2 snapshot rows, found " + std::to_string(csv.rows.size()));
    }
    Eigen::MatrixXd data(static_cast<Eigen::Index>(csv.rows.size()), static_cast<Eigen::Index>(csv.header.size()));
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& [line_no, fields] = csv.rows[r];
        for (std::size_t c = 0; c < fields.size(); ++c) {
            try {
                data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_double(fields[c]);
            } catch (const ParseError& e) {
                throw ParseError(origin + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 1) + ": " +
                                 e.what());
            }
        }
    }
    double step = 1.0;
    try {
        step = dt ? *dt : dt_from_comments(csv.comments).value_or(1.0);
    } catch (const ParseError& e) {
        throw ParseError(origin + ": bad dt comment: " + e.what());
    }
    try {
        return SnapshotMatrix(std::move(data), step, csv.header);
    } catch (const Error& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

inline SnapshotMatrix read_snapshots(const fs::path& path, std::optional<double> dt = std::nullopt) {
    return parse_snapshots(read_file(path), path.string(), dt);
}

}  // namespace koopnet::csv
