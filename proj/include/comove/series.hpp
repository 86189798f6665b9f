#pragma once

#include <span>
#include <string>
#include <vector>

#include "comove/date.hpp"

namespace comove {

// One stock's daily simple return (0.01 = +1%).
struct ReturnRecord {
    Date date;
    std::string ticker;
    double ret = 0.0;
};

// Daily co-movement count: k_up of n_day non-zero returns were positive.
struct DayCount {
    Date date;
    int k_up = 0;
    int n_day = 0;

    double fraction() const { return static_cast<double>(k_up) / n_day; }
};

class ComovementSeries {
public:
    ComovementSeries() = default;
    // Throws ValidationError unless dates strictly increase and 0 <= k_up <= n_day, n_day >= 1.
    explicit ComovementSeries(std::vector<DayCount> entries);

    std::span<const DayCount> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const DayCount& front() const { return entries_.front(); }
    const DayCount& back() const { return entries_.back(); }

    // Entries with range.start <= date < range.end.
    std::span<const DayCount> window(const DateRange& range) const;
    std::vector<double> fractions(const DateRange& range) const;

private:
    std::vector<DayCount> entries_;
};

}  // namespace comove
