#pragma once

#include <chrono>
#include <charconv>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "cryptoprem/error.hpp"

namespace cryptoprem {

using Date = std::chrono::sys_days;

/// Parses a strict `YYYY-MM-DD` string.
inline Date parse_date(std::string_view text) {
    auto fail = [&] { return DataError("malformed date '" + std::string(text) + "'"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto field = [&](std::size_t pos, std::size_t len, auto& out) {
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
        if (ec != std::errc{} || ptr != text.data() + pos + len) throw fail();
    };
    field(0, 4, y);
    field(5, 2, m);
    field(8, 2, d);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw fail();
    return Date{ymd};
}

inline std::string format_date(Date date) {
    const std::chrono::year_month_day ymd{date};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

/// The Sunday that closes the ISO week containing `date`.
inline Date week_ending(Date date) {
    const unsigned dow = std::chrono::weekday{date}.c_encoding();  // Sunday == 0
    return date + std::chrono::days{(7 - dow) % 7};
}

inline Date add_weeks(Date date, long weeks) { return date + std::chrono::days{7 * weeks}; }

}  // namespace cryptoprem
