#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "cryptoprem/error.hpp"

namespace cryptoprem::csv {

// Plain comma-separated files: no quoting, no embedded commas. Every file the
// toolkit reads or writes follows this dialect.

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string source;  // path, for error messages

    [[nodiscard]] std::ptrdiff_t column(std::string_view name) const {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j] == name) return static_cast<std::ptrdiff_t>(j);
        }
        return -1;
    }
};

inline std::vector<std::string> split_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.emplace_back(line.substr(start));
            break;
        }
        cells.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    for (auto& c : cells) {
        const auto b = c.find_first_not_of(" \t");
        const auto e = c.find_last_not_of(" \t");
        c = (b == std::string::npos) ? std::string{} : c.substr(b, e - b + 1);
    }
    return cells;
}

/// Parses CSV text with a header row. Blank lines are skipped; short rows are
/// padded with empty cells, long rows are an error.
inline Table parse(std::string_view text, std::string source = "<memory>") {
    Table table;
    table.source = std::move(source);
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.empty() || line == "\r") {
            if (nl == text.size()) break;
            continue;
        }
        auto cells = split_line(line);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
        } else {
            if (cells.size() > table.header.size()) {
                throw DataError(fmt::format("{}:{}: {} cells but header has {}", table.source,
                                            line_no, cells.size(), table.header.size()));
            }
            cells.resize(table.header.size());
            table.rows.push_back(std::move(cells));
        }
        if (nl == text.size()) break;
    }
    if (!have_header) throw DataError(table.source + ": empty file");
    return table;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline Table read(const std::filesystem::path& path) { return parse(read_text(path), path.string()); }

/// Writes `content` through a temporary sibling and renames it into place, so
/// readers never observe a half-written file.
inline void write_text(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Parses a numeric cell. Returns false for a blank cell; throws on garbage.
inline bool parse_number(std::string_view cell, double& out, std::string_view where) {
    if (cell.empty()) return false;
    std::string tmp(cell);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || !std::isfinite(out)) {
        throw DataError(fmt::format("non-numeric value '{}' at {}", cell, where));
    }
    return true;
}

/// Shortest representation that parses back to the identical double.
inline std::string number(double x) { return fmt::format("{}", x); }

inline std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t j = 0; j < cells.size(); ++j) {
        if (j) out += ',';
        out += cells[j];
    }
    return out;
}

}  // namespace cryptoprem::csv
