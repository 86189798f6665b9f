#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace comove {

// Calendar date with day resolution. Stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days d) : days_(d) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}}) {}

    // Parses YYYY-MM-DD; throws ValidationError on anything else.
    static Date parse(std::string_view text);
    // Like parse but also accepts the M/D/YYYY form used in crash lists.
    static Date parse_flexible(std::string_view text);

    std::string iso() const;

    constexpr std::chrono::sys_days sys() const { return days_; }
    constexpr long serial() const { return days_.time_since_epoch().count(); }
    std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }

    constexpr Date plus_days(long n) const { return Date{days_ + std::chrono::days{n}}; }

    // Calendar month arithmetic; day-of-month is clamped (Feb 29 + 12 months = Feb 28).
    Date plus_months(int months) const;
    Date plus_years(int years) const { return plus_months(12 * years); }

    // 0 = Monday ... 6 = Sunday.
    unsigned iso_weekday_index() const;
    bool is_weekday() const { return iso_weekday_index() < 5; }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    std::chrono::sys_days days_{};
};

constexpr long days_between(Date from, Date to) { return to.serial() - from.serial(); }

// Number of Mon-Fri days in [min(a,b), max(a,b)), i.e. trading-day distance
// on a weekday calendar.
long weekday_distance(Date a, Date b);

// Half-open date interval [start, end).
struct DateRange {
    Date start;
    Date end;

    bool contains(Date d) const { return start <= d && d < end; }
    long days() const { return days_between(start, end); }
};

}  // namespace comove
