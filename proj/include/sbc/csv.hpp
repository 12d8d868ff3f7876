#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sbc::csv {

/// Parsed RFC-4180 table. The header row is required.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name, or npos.
    std::size_t column(const std::string& name) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

Table parse(const std::string& text);
Table read_file(const std::string& path);

/// Quotes a field when it contains a delimiter, quote or line break.
std::string escape(const std::string& field);
std::string format_row(const std::vector<std::string>& fields);
std::string format(const Table& table);
void write_file(const std::string& path, const std::string& content);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);
/// Strict decimal parse of a whole field; throws std::invalid_argument.
double parse_double(const std::string& field);

}  // namespace sbc::csv
