#pragma once

// Market pipeline: returns ingestion, rolling 12-month indicator, annual
// change signal, warning-window detection and its evaluation against crash
// dates, plus a synthetic market generator driven by the copy dynamics.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "comove/estimation.hpp"
#include "comove/series.hpp"

namespace comove::pipeline {

// ---- ingestion -----------------------------------------------------------

struct IngestOptions {
    bool lenient = false;  // skip malformed lines (recorded) instead of throwing
};

struct IngestResult {
    std::vector<ReturnRecord> records;  // sorted by (date, ticker)
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;
    std::vector<std::string> diagnostics;
};

// CSV with header "date,ticker,return".
IngestResult parse_returns(std::istream& in, const std::string& source,
                           const IngestOptions& options = {});
IngestResult ingest_returns(const std::string& path, const IngestOptions& options = {});
void write_returns_csv(std::ostream& out, const std::vector<ReturnRecord>& records);

// CSV with header "date,n_up,n_total".
ComovementSeries parse_fractions(std::istream& in, const std::string& source);
ComovementSeries read_fractions(const std::string& path);
void write_fractions_csv(std::ostream& out, const ComovementSeries& series);

// Either file format, recognised by its header line. Returns files are
// reduced with positive_fraction; both paths apply the min_stocks floor.
ComovementSeries load_series(const std::string& path, int min_stocks,
                             std::size_t* dropped_days = nullptr);

// ---- rolling indicator -----------------------------------------------------

enum class Step { Daily, Weekly, Monthly };

struct IndicatorOptions {
    Step step = Step::Daily;
    int window_months = 12;
    estimation::FitOptions fit;  // fit.bootstrap.seed is mixed with each point's date
};

struct IndicatorPoint {
    Date date;
    double u_hat = 0.0;
    double std_error = 0.0;
    int n_days = 0;
    int n_ref = 0;
};

struct IndicatorGap {
    Date date;
    std::string reason;
};

struct IndicatorSeries {
    std::vector<IndicatorPoint> points;
    std::vector<IndicatorGap> gaps;
};

// Evaluation dates: every series date (plus the day after the last one)
// whose trailing window [t - window_months, t) starts on or after the first
// observation, thinned to the first such date per week or month. Windows
// with fewer than fit.min_days observations are skipped; fit failures are
// recorded as gaps.
IndicatorSeries rolling_indicator(const ComovementSeries& series, const IndicatorOptions& options);

void write_indicator_csv(std::ostream& out, const IndicatorSeries& indicator);
IndicatorSeries parse_indicator(std::istream& in, const std::string& source);
IndicatorSeries read_indicator(const std::string& path);

// ---- change signal ---------------------------------------------------------

enum class SignalOrder { NormalizeFirst, AverageFirst };

struct SignalOptions {
    SignalOrder order = SignalOrder::NormalizeFirst;
    int lag_months = 12;
    int smooth_months = 12;
    int match_tolerance_days = 10;  // trading (weekday) distance
};

struct SignalPoint {
    Date date;
    double raw_change = 0.0;  // U(t) - U(t - 1y)
    double normalized = 0.0;  // raw_change / stderr(t - 1y)
    double smoothed = 0.0;    // trailing-year average (see SignalOrder)
};

struct SignalSeries {
    std::vector<SignalPoint> points;
    SignalOrder order = SignalOrder::NormalizeFirst;
};

SignalSeries normalized_change(const IndicatorSeries& indicator, const SignalOptions& options = {});

void write_signal_csv(std::ostream& out, const SignalSeries& signal);

// ---- warnings --------------------------------------------------------------

struct WarningWindow {
    Date start;  // trigger date
    Date end;    // start + window length (exclusive)
    double trigger_value = 0.0;
    bool preceded_by_positive = true;

    DateRange range() const { return {start, end}; }
};

struct DetectOptions {
    double threshold = 2.0;
    int lookback_months = 12;
    int window_months = 12;
};

// A window opens at the first date with smoothed <= -threshold that has a
// strictly positive smoothed value within the preceding lookback; no
// trigger fires while a window is open.
std::vector<WarningWindow> detect_warnings(const SignalSeries& signal,
                                           const DetectOptions& options = {});

// Header "start,end,trigger_date,trigger_value".
void write_windows_csv(std::ostream& out, const std::vector<WarningWindow>& windows);
std::vector<WarningWindow> parse_windows(std::istream& in, const std::string& source);
std::vector<WarningWindow> read_windows(const std::string& path);

// ---- evaluation ------------------------------------------------------------

struct CrashEvent {
    Date date;
    std::string label;
};

// Lines "date,label"; an optional "date,label" header; ISO or M/D/YYYY dates.
std::vector<CrashEvent> parse_crash_list(std::istream& in, const std::string& source);
std::vector<CrashEvent> read_crash_list(const std::string& path);

// The eight largest DJI percentage drops in 1985-2010 used in the study.
std::vector<CrashEvent> reference_crashes();

struct CrashHit {
    CrashEvent crash;
    bool in_period = true;
    bool covered = false;
    std::optional<std::size_t> window;
    std::optional<DateRange> covering;
};

struct EventReport {
    std::vector<CrashHit> crashes;
    int hits = 0;
    double coverage_fraction = 0.0;  // window days inside the period / period days
    std::vector<std::string> warnings;
};

EventReport evaluate_events(const std::vector<WarningWindow>& windows,
                            const std::vector<CrashEvent>& crashes, const DateRange& study_period);

enum class PermutationMode { ShiftWindows, ShiftCrashes };

struct PermutationResult {
    double p_value = 0.0;      // fraction of trials with hits >= observed
    double wilson_lo = 0.0;    // 95% Wilson score interval
    double wilson_hi = 0.0;
    double p_randomized = 0.0; // P(hits > obs) + V * P(hits == obs), V ~ U(0,1)
    long long exceed = 0;
    long long n_trials = 0;
    int observed_hits = 0;
};

PermutationResult permutation_pvalue(const std::vector<WarningWindow>& windows,
                                     const std::vector<CrashEvent>& crashes,
                                     const DateRange& study_period, long long n_trials,
                                     PermutationMode mode, std::uint64_t seed);

struct WilsonInterval {
    double lo, hi;
};
WilsonInterval wilson_interval(long long successes, long long trials, double z = 1.959963984540054);

void write_event_report(std::ostream& out, const EventReport& report,
                        const std::optional<PermutationResult>& permutation);

// ---- synthetic market --------------------------------------------------------

struct ScheduleSegment {
    Date start;
    Date end;  // exclusive
    int u = 1;
    int d = 1;
};

// CSV "start,end,u,d"; segments must tile time without gaps or overlaps.
std::vector<ScheduleSegment> parse_schedule(std::istream& in, const std::string& source);
std::vector<ScheduleSegment> read_schedule(const std::string& path);
void validate_schedule(const std::vector<ScheduleSegment>& schedule);

struct SynthOptions {
    int n_stocks = 500;
    int days = 0;  // trading days (Mon-Fri); 0 = until the schedule ends
    std::uint64_t seed = 1;
    int burn_in_sweeps = 50;  // at the start and at every schedule change
    int sweeps_per_day = 0;   // 0 = auto: enough sweeps to decorrelate successive days
    double p = 0.0;
};

struct SynthResult {
    std::vector<ReturnRecord> records;
    std::vector<DayCount> chain_counts;  // the chain's k recorded each day
};

// Full-graph copy dynamics, one snapshot per trading day; each stock's
// return is sign * |r| with log|r| ~ Normal(-4.6, 0.5).
SynthResult synth_market(const std::vector<ScheduleSegment>& schedule, const SynthOptions& options);

// Sweeps per day for which the day-to-day autocorrelation of k is about
// exp(-3): ceil(3 (N + U + D - 1) / (U + D)).
int auto_sweeps_per_day(int n_stocks, int u, int d);

}  // namespace comove::pipeline
