#include "comove/date.hpp"

#include <charconv>
#include <cstdio>

#include "comove/error.hpp"

namespace comove {
namespace {

bool parse_uint(std::string_view s, unsigned& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

Date make_checked(int y, unsigned m, unsigned d, std::string_view text) {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw ValidationError("invalid calendar date '" + std::string(text) + "'");
    return Date{std::chrono::sys_days{ymd}};
}

}  // namespace

Date Date::parse(std::string_view text) {
    unsigned y = 0, m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_uint(text.substr(0, 4), y) ||
        !parse_uint(text.substr(5, 2), m) || !parse_uint(text.substr(8, 2), d))
        throw ValidationError("expected date YYYY-MM-DD, got '" + std::string(text) + "'");
    return make_checked(static_cast<int>(y), m, d, text);
}

Date Date::parse_flexible(std::string_view text) {
    if (text.find('/') == std::string_view::npos) return parse(text);
    const auto s1 = text.find('/');
    const auto s2 = text.find('/', s1 + 1);
    unsigned y = 0, m = 0, d = 0;
    if (s2 == std::string_view::npos || !parse_uint(text.substr(0, s1), m) ||
        !parse_uint(text.substr(s1 + 1, s2 - s1 - 1), d) || !parse_uint(text.substr(s2 + 1), y) ||
        text.size() - s2 - 1 != 4)
        throw ValidationError("expected date M/D/YYYY or YYYY-MM-DD, got '" + std::string(text) + "'");
    return make_checked(static_cast<int>(y), m, d, text);
}

std::string Date::iso() const {
    const auto ymd = this->ymd();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

Date Date::plus_months(int months) const {
    using namespace std::chrono;
    const auto ymd = this->ymd();
    year_month_day shifted = ymd + std::chrono::months{months};
    if (!shifted.ok()) shifted = shifted.year() / shifted.month() / last;
    return Date{sys_days{shifted}};
}

unsigned Date::iso_weekday_index() const {
    return std::chrono::weekday{days_}.iso_encoding() - 1;
}

long weekday_distance(Date a, Date b) {
    if (b < a) std::swap(a, b);
    const long span = days_between(a, b);
    const long full_weeks = span / 7;
    long count = full_weeks * 5;
    unsigned wd = a.iso_weekday_index();
    for (long i = 0; i < span % 7; ++i) {
        if (wd < 5) ++count;
        wd = (wd + 1) % 7;
    }
    return count;
}

}  // namespace comove
