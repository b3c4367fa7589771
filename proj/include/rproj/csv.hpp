#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rproj/error.hpp"

namespace rproj::csv {

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view field, std::size_t line_no) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
        field.remove_prefix(1);
    }
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
        field.remove_suffix(1);
    }
    if (!field.empty() && field.front() == '+') {
        field.remove_prefix(1);
    }
    double v = 0.0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        detail::fail(ErrorKind::parse,
                     "line " + std::to_string(line_no) + ": not a number: '" + std::string(field) + "'");
    }
    return v;
}

inline std::vector<double> parse_row(std::string_view line, std::size_t line_no) {
    std::vector<double> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(parse_double(line.substr(start, comma - start), line_no));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

/// Reads a numeric CSV without header. Blank lines are skipped; every row must
/// have the same number of columns.
inline std::vector<std::vector<double>> read_table(const std::string& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorKind::invalid_input, "cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto row = parse_row(line, line_no);
        if (!rows.empty() && row.size() != rows.front().size()) {
            detail::fail(ErrorKind::parse, path + ": line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(rows.front().size()) + " columns, found " +
                                               std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_text(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    detail::require(static_cast<bool>(out), ErrorKind::invalid_input, "cannot write " + path);
    out << contents;
    detail::require(static_cast<bool>(out), ErrorKind::invalid_input, "write failed: " + path);
}

} // namespace rproj::csv
