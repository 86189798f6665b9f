#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "comove/csv.hpp"
#include "comove/error.hpp"
#include "comove/parallel.hpp"
#include "comove/pipeline.hpp"
#include "comove/rng.hpp"

namespace comove::pipeline {
namespace {

long period_key(Date d, Step step) {
    switch (step) {
        case Step::Daily: return d.serial();
        case Step::Weekly: return d.serial() - static_cast<long>(d.iso_weekday_index());
        case Step::Monthly: {
            const auto ymd = d.ymd();
            return static_cast<int>(ymd.year()) * 12L + static_cast<unsigned>(ymd.month());
        }
    }
    return d.serial();
}

}  // namespace

IndicatorSeries rolling_indicator(const ComovementSeries& series, const IndicatorOptions& options) {
    if (series.empty()) throw ValidationError("rolling indicator: empty series");
    const Date first = series.front().date;
    const Date sentinel = series.back().date.plus_days(1);
    if (sentinel.plus_months(-options.window_months) < first)
        throw ValidationError("series spans less than " + std::to_string(options.window_months) +
                              " months");

    std::vector<Date> candidates;
    auto consider = [&](Date t) {
        if (t.plus_months(-options.window_months) < first) return;
        if (!candidates.empty() &&
            period_key(candidates.back(), options.step) == period_key(t, options.step))
            return;
        candidates.push_back(t);
    };
    for (const auto& e : series.entries()) consider(e.date);
    consider(sentinel);

    struct Slot {
        std::optional<IndicatorPoint> point;
        std::optional<IndicatorGap> gap;
    };
    std::vector<Slot> slots(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) {
        const Date t = candidates[i];
        const DateRange window{t.plus_months(-options.window_months), t};
        const auto occupancy = series.window(window).size();
        if (static_cast<int>(occupancy) < options.fit.min_days) {
            slots[i].gap = IndicatorGap{t, "window holds " + std::to_string(occupancy) + " days"};
            return;
        }
        estimation::FitOptions fit = options.fit;
        fit.bootstrap.seed = splitmix64(options.fit.bootstrap.seed ^
                                        splitmix64(static_cast<std::uint64_t>(t.serial())));
        try {
            const auto r = estimation::fit_symmetric(series, window, fit);
            slots[i].point = IndicatorPoint{t, r.u_eq_d, r.std_error, r.n_days, r.n_ref};
        } catch (const FitError& e) {
            slots[i].gap = IndicatorGap{t, e.what()};
        }
    });

    IndicatorSeries out;
    for (auto& s : slots) {
        if (s.point) out.points.push_back(*s.point);
        if (s.gap) out.gaps.push_back(std::move(*s.gap));
    }
    return out;
}

void write_indicator_csv(std::ostream& out, const IndicatorSeries& indicator) {
    out << "date,u_hat,stderr,n_days,n_ref\n";
    for (const auto& p : indicator.points)
        out << p.date.iso() << ',' << csv::fmt17(p.u_hat) << ',' << csv::fmt17(p.std_error) << ','
            << p.n_days << ',' << p.n_ref << '\n';
}

IndicatorSeries parse_indicator(std::istream& in, const std::string& source) {
    std::string line;
    if (!csv::next_line(in, line)) throw ParseError(source, 1, "empty indicator file");
    csv::expect_header(line, "date,u_hat,stderr,n_days,n_ref", source);
    IndicatorSeries out;
    std::size_t line_no = 1;
    while (csv::next_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 5) throw ParseError(source, line_no, "expected 5 fields");
        IndicatorPoint p;
        try {
            p.date = Date::parse(f[0]);
        } catch (const ValidationError& e) {
            throw ParseError(source, line_no, e.what());
        }
        p.u_hat = csv::parse_double(f[1], source, line_no, "u_hat");
        p.std_error = csv::parse_double(f[2], source, line_no, "stderr");
        p.n_days = static_cast<int>(csv::parse_int(f[3], source, line_no, "n_days"));
        p.n_ref = static_cast<int>(csv::parse_int(f[4], source, line_no, "n_ref"));
        if (!out.points.empty() && !(out.points.back().date < p.date))
            throw ParseError(source, line_no, "dates must strictly increase");
        out.points.push_back(p);
    }
    return out;
}

IndicatorSeries read_indicator(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file '" + path + "'");
    return parse_indicator(in, path);
}

SignalSeries normalized_change(const IndicatorSeries& indicator, const SignalOptions& options) {
    const auto& pts = indicator.points;
    if (pts.size() < 2 || pts.back().date < pts.front().date.plus_months(2 * options.lag_months))
        throw ValidationError("change signal needs an indicator spanning more than two years");

    struct Change {
        std::size_t index;
        double raw, normalized, base_stderr;
    };
    std::vector<Change> changes;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Date target = pts[i].date.plus_months(-options.lag_months);
        auto it = std::lower_bound(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(i), target,
                                   [](const IndicatorPoint& p, Date d) { return p.date < d; });
        // Nearest neighbour of target among points before i.
        std::optional<std::size_t> best;
        long best_dist = 0;
        for (auto cand : {it, it == pts.begin() ? it : it - 1}) {
            const auto j = static_cast<std::size_t>(cand - pts.begin());
            if (j >= i) continue;
            const long dist = weekday_distance(pts[j].date, target);
            if (!best || dist < best_dist) {
                best = j;
                best_dist = dist;
            }
        }
        if (!best || best_dist > options.match_tolerance_days) continue;
        const auto& base = pts[*best];
        if (!(base.std_error > 0.0)) continue;
        const double raw = pts[i].u_hat - base.u_hat;
        changes.push_back({i, raw, raw / base.std_error, base.std_error});
    }

    SignalSeries out;
    out.order = options.order;
    std::size_t lo = 0;
    for (std::size_t hi = 0; hi < changes.size(); ++hi) {
        const Date t = pts[changes[hi].index].date;
        const Date horizon = t.plus_months(-options.smooth_months);
        while (!(pts[changes[lo].index].date > horizon)) ++lo;
        double sum_norm = 0.0, sum_raw = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            sum_norm += changes[j].normalized;
            sum_raw += changes[j].raw;
        }
        const double count = static_cast<double>(hi - lo + 1);
        SignalPoint p;
        p.date = t;
        p.raw_change = changes[hi].raw;
        p.normalized = changes[hi].normalized;
        p.smoothed = options.order == SignalOrder::NormalizeFirst
                         ? sum_norm / count
                         : (sum_raw / count) / changes[hi].base_stderr;
        out.points.push_back(p);
    }
    return out;
}

void write_signal_csv(std::ostream& out, const SignalSeries& signal) {
    out << "date,raw_change,normalized,smoothed\n";
    for (const auto& p : signal.points)
        out << p.date.iso() << ',' << csv::fmt17(p.raw_change) << ',' << csv::fmt17(p.normalized)
            << ',' << csv::fmt17(p.smoothed) << '\n';
}

}  // namespace comove::pipeline
