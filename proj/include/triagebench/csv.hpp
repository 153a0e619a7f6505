#pragma once

// Minimal RFC-4180 style CSV reading/writing used by the cohort loaders and
// the plot-data emitters.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace triagebench::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // 1-based line number in the source for each row (header is line 1)
    std::vector<std::size_t> line_numbers;

    std::optional<std::size_t> column(std::string_view name) const;
    std::size_t require_column(std::string_view name) const;
};

std::vector<std::string> split_line(std::string_view line);
Table parse(std::istream& in);
Table read_file(const std::string& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

std::string trim(std::string_view s);

}  // namespace triagebench::csv
