#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "comove/csv.hpp"
#include "comove/error.hpp"
#include "comove/parallel.hpp"
#include "comove/pipeline.hpp"
#include "comove/rng.hpp"

namespace comove::pipeline {

std::vector<WarningWindow> detect_warnings(const SignalSeries& signal, const DetectOptions& options) {
    if (!(options.threshold > 0.0)) throw ValidationError("threshold must be positive");
    std::vector<WarningWindow> out;
    std::optional<Date> open_until;
    std::optional<Date> last_positive;
    for (const auto& p : signal.points) {
        const bool blocked = open_until && p.date < *open_until;
        if (!blocked && p.smoothed <= -options.threshold && last_positive &&
            !(*last_positive < p.date.plus_months(-options.lookback_months))) {
            WarningWindow w;
            w.start = p.date;
            w.end = p.date.plus_months(options.window_months);
            w.trigger_value = p.smoothed;
            w.preceded_by_positive = true;
            out.push_back(w);
            open_until = w.end;
        }
        if (p.smoothed > 0.0) last_positive = p.date;
    }
    return out;
}

void write_windows_csv(std::ostream& out, const std::vector<WarningWindow>& windows) {
    out << "start,end,trigger_date,trigger_value\n";
    for (const auto& w : windows)
        out << w.start.iso() << ',' << w.end.iso() << ',' << w.start.iso() << ','
            << csv::fmt17(w.trigger_value) << '\n';
}

std::vector<WarningWindow> parse_windows(std::istream& in, const std::string& source) {
    std::string line;
    if (!csv::next_line(in, line)) throw ParseError(source, 1, "empty windows file");
    csv::expect_header(line, "start,end,trigger_date,trigger_value", source);
    std::vector<WarningWindow> out;
    std::size_t line_no = 1;
    while (csv::next_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 4) throw ParseError(source, line_no, "expected 4 fields");
        WarningWindow w;
        try {
            w.start = Date::parse(f[0]);
            w.end = Date::parse(f[1]);
        } catch (const ValidationError& e) {
            throw ParseError(source, line_no, e.what());
        }
        if (!(w.start < w.end)) throw ParseError(source, line_no, "window end must follow start");
        w.trigger_value = f[3].empty() ? 0.0 : csv::parse_double(f[3], source, line_no, "trigger_value");
        out.push_back(w);
    }
    return out;
}

std::vector<WarningWindow> read_windows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file '" + path + "'");
    return parse_windows(in, path);
}

EventReport evaluate_events(const std::vector<WarningWindow>& windows,
                            const std::vector<CrashEvent>& crashes, const DateRange& study_period) {
    if (!(study_period.start < study_period.end)) throw ValidationError("empty study period");
    EventReport report;
    for (const auto& c : crashes) {
        CrashHit hit;
        hit.crash = c;
        hit.in_period = study_period.contains(c.date);
        if (!hit.in_period)
            report.warnings.push_back("crash " + c.date.iso() + " lies outside the study period");
        for (std::size_t w = 0; w < windows.size(); ++w)
            if (windows[w].range().contains(c.date)) {
                hit.covered = true;
                hit.window = w;
                hit.covering = windows[w].range();
                break;
            }
        report.hits += hit.covered;
        report.crashes.push_back(std::move(hit));
    }
    long covered_days = 0;
    for (const auto& w : windows) {
        const Date a = std::max(w.start, study_period.start);
        const Date b = std::min(w.end, study_period.end);
        if (a < b) covered_days += days_between(a, b);
    }
    report.coverage_fraction = static_cast<double>(covered_days) / study_period.days();
    return report;
}

WilsonInterval wilson_interval(long long successes, long long trials, double z) {
    if (trials <= 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double phat = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (phat + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
    const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
    const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
    return {lo, hi};
}

PermutationResult permutation_pvalue(const std::vector<WarningWindow>& windows,
                                     const std::vector<CrashEvent>& crashes,
                                     const DateRange& study_period, long long n_trials,
                                     PermutationMode mode, std::uint64_t seed) {
    if (n_trials < 10000) throw ValidationError("permutation test needs at least 10^4 trials");
    const long period = study_period.days();
    if (period <= 0) throw ValidationError("empty study period");

    std::vector<WarningWindow> sorted = windows;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].start < sorted[i - 1].end) throw ValidationError("warning windows overlap");

    std::vector<long> lengths;
    std::vector<std::pair<long, long>> fixed;  // window offsets [a, b)
    long total = 0;
    for (const auto& w : sorted) {
        lengths.push_back(days_between(w.start, w.end));
        total += lengths.back();
        fixed.emplace_back(days_between(study_period.start, w.start),
                           days_between(study_period.start, w.end));
    }
    if (total > period) throw ValidationError("total window length exceeds the study period");

    std::vector<long> crash_offsets;
    for (const auto& c : crashes)
        if (study_period.contains(c.date)) crash_offsets.push_back(days_between(study_period.start, c.date));

    auto count_hits = [](const std::vector<std::pair<long, long>>& wins, const std::vector<long>& cs) {
        int hits = 0;
        for (long c : cs)
            for (const auto& [a, b] : wins)
                if (a <= c && c < b) {
                    ++hits;
                    break;
                }
        return hits;
    };

    PermutationResult result;
    result.n_trials = n_trials;
    result.observed_hits = count_hits(fixed, crash_offsets);

    constexpr long long kChunk = 1 << 14;
    const long long chunks = (n_trials + kChunk - 1) / kChunk;
    std::vector<long long> ge(chunks, 0), eq(chunks, 0);
    const long slack = period - total;
    parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
        Rng rng = make_stream(seed, c);
        const long long begin = static_cast<long long>(c) * kChunk;
        const long long end = std::min(n_trials, begin + kChunk);
        std::vector<std::pair<long, long>> wins(lengths.size());
        std::vector<long> cuts(lengths.size());
        std::vector<std::size_t> order(lengths.size());
        std::vector<long> cs = crash_offsets;
        for (long long t = begin; t < end; ++t) {
            int hits;
            if (mode == PermutationMode::ShiftWindows) {
                for (auto& u : cuts) u = static_cast<long>(uniform_below(rng, static_cast<std::uint64_t>(slack) + 1));
                std::sort(cuts.begin(), cuts.end());
                std::iota(order.begin(), order.end(), 0);
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[uniform_below(rng, i)]);
                long used = 0;
                for (std::size_t i = 0; i < order.size(); ++i) {
                    const long a = cuts[i] + used;
                    wins[i] = {a, a + lengths[order[i]]};
                    used += lengths[order[i]];
                }
                hits = count_hits(wins, crash_offsets);
            } else {
                for (auto& x : cs) x = static_cast<long>(uniform_below(rng, static_cast<std::uint64_t>(period)));
                hits = count_hits(fixed, cs);
            }
            ge[c] += hits >= result.observed_hits;
            eq[c] += hits == result.observed_hits;
        }
    });
    const long long exceed = std::accumulate(ge.begin(), ge.end(), 0LL);
    const long long ties = std::accumulate(eq.begin(), eq.end(), 0LL);
    result.exceed = exceed;
    result.p_value = static_cast<double>(exceed) / static_cast<double>(n_trials);
    const auto ci = wilson_interval(exceed, n_trials);
    result.wilson_lo = ci.lo;
    result.wilson_hi = ci.hi;
    Rng tie_rng = make_stream(seed, 0xFFFFFFFFULL);
    result.p_randomized =
        (static_cast<double>(exceed - ties) + uniform01(tie_rng) * static_cast<double>(ties)) /
        static_cast<double>(n_trials);
    return result;
}

void write_event_report(std::ostream& out, const EventReport& report,
                        const std::optional<PermutationResult>& permutation) {
    out << "crash_date,label,in_period,covered,window_start,window_end\n";
    for (const auto& h : report.crashes) {
        out << h.crash.date.iso() << ',' << h.crash.label << ',' << (h.in_period ? 1 : 0) << ','
            << (h.covered ? 1 : 0) << ',';
        if (h.covering) out << h.covering->start.iso() << ',' << h.covering->end.iso();
        else out << ',';
        out << '\n';
    }
    out << "# hits=" << report.hits << ",crashes=" << report.crashes.size()
        << ",coverage_fraction=" << csv::fmt17(report.coverage_fraction) << '\n';
    for (const auto& w : report.warnings) out << "# warning: " << w << '\n';
    if (permutation)
        out << "# p_value=" << csv::fmt17(permutation->p_value)
            << ",wilson_lo=" << csv::fmt17(permutation->wilson_lo)
            << ",wilson_hi=" << csv::fmt17(permutation->wilson_hi)
            << ",p_randomized=" << csv::fmt17(permutation->p_randomized)
            << ",observed_hits=" << permutation->observed_hits
            << ",n_trials=" << permutation->n_trials << '\n';
}

}  // namespace comove::pipeline
