#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "comove/csv.hpp"
#include "comove/error.hpp"
#include "comove/pipeline.hpp"

namespace comove::pipeline {
namespace {

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file '" + path + "'");
    return in;
}

}  // namespace

IngestResult parse_returns(std::istream& in, const std::string& source,
                           const IngestOptions& options) {
    IngestResult out;
    std::string line;
    if (!csv::next_line(in, line)) throw ParseError(source, 1, "empty returns file");
    csv::expect_header(line, "date,ticker,return", source);

    std::size_t line_no = 1;
    while (csv::next_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        ++out.rows_read;
        try {
            const auto fields = csv::split(line);
            if (fields.size() != 3)
                throw ParseError(source, line_no, "expected 3 fields, got " + std::to_string(fields.size()));
            ReturnRecord r;
            try {
                r.date = Date::parse(fields[0]);
            } catch (const ValidationError& e) {
                throw ParseError(source, line_no, e.what());
            }
            r.ticker = std::string(fields[1]);
            if (r.ticker.empty()) throw ParseError(source, line_no, "empty ticker");
            r.ret = csv::parse_double(fields[2], source, line_no, "return");
            if (r.ret <= -1.0)
                throw ParseError(source, line_no, "return " + std::string(fields[2]) +
                                                      " <= -1 is not a valid simple return");
            out.records.push_back(std::move(r));
        } catch (const ParseError& e) {
            if (!options.lenient) throw;
            ++out.rows_dropped;
            out.diagnostics.emplace_back(e.what());
        }
    }

    std::sort(out.records.begin(), out.records.end(), [](const auto& a, const auto& b) {
        return a.date != b.date ? a.date < b.date : a.ticker < b.ticker;
    });
    for (std::size_t i = 1; i < out.records.size(); ++i)
        if (out.records[i].date == out.records[i - 1].date &&
            out.records[i].ticker == out.records[i - 1].ticker)
            throw ValidationError(source + ": duplicate record for (" + out.records[i].date.iso() +
                                  ", " + out.records[i].ticker + ")");
    return out;
}

IngestResult ingest_returns(const std::string& path, const IngestOptions& options) {
    auto in = open_input(path);
    return parse_returns(in, path, options);
}

void write_returns_csv(std::ostream& out, const std::vector<ReturnRecord>& records) {
    out << "date,ticker,return\n";
    for (const auto& r : records) out << r.date.iso() << ',' << r.ticker << ',' << csv::fmt17(r.ret) << '\n';
}

ComovementSeries parse_fractions(std::istream& in, const std::string& source) {
    std::string line;
    if (!csv::next_line(in, line)) throw ParseError(source, 1, "empty fractions file");
    csv::expect_header(line, "date,n_up,n_total", source);
    std::vector<DayCount> days;
    std::size_t line_no = 1;
    while (csv::next_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto fields = csv::split(line);
        if (fields.size() != 3)
            throw ParseError(source, line_no, "expected 3 fields, got " + std::to_string(fields.size()));
        DayCount d;
        try {
            d.date = Date::parse(fields[0]);
        } catch (const ValidationError& e) {
            throw ParseError(source, line_no, e.what());
        }
        d.k_up = static_cast<int>(csv::parse_int(fields[1], source, line_no, "n_up"));
        d.n_day = static_cast<int>(csv::parse_int(fields[2], source, line_no, "n_total"));
        if (d.n_day < 1 || d.k_up < 0 || d.k_up > d.n_day)
            throw ParseError(source, line_no, "need 0 <= n_up <= n_total and n_total >= 1");
        if (!days.empty() && !(days.back().date < d.date))
            throw ParseError(source, line_no, "dates must strictly increase");
        days.push_back(d);
    }
    return ComovementSeries(std::move(days));
}

ComovementSeries read_fractions(const std::string& path) {
    auto in = open_input(path);
    return parse_fractions(in, path);
}

void write_fractions_csv(std::ostream& out, const ComovementSeries& series) {
    out << "date,n_up,n_total\n";
    for (const auto& d : series.entries()) out << d.date.iso() << ',' << d.k_up << ',' << d.n_day << '\n';
}

ComovementSeries load_series(const std::string& path, int min_stocks, std::size_t* dropped_days) {
    auto in = open_input(path);
    std::string header;
    if (!csv::next_line(in, header)) throw ParseError(path, 1, "empty input file");
    in.clear();
    in.seekg(0);
    if (csv::trim(header) == "date,n_up,n_total")
        return estimation::filter_min_stocks(parse_fractions(in, path), min_stocks, dropped_days);
    const auto ingested = parse_returns(in, path);
    auto result = estimation::positive_fraction(ingested.records, {min_stocks});
    if (dropped_days) *dropped_days = result.dropped_days;
    return std::move(result.series);
}

std::vector<CrashEvent> parse_crash_list(std::istream& in, const std::string& source) {
    std::vector<CrashEvent> out;
    std::string line;
    std::size_t line_no = 0;
    while (csv::next_line(in, line)) {
        ++line_no;
        const auto trimmed = csv::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        if (line_no == 1 && trimmed == "date,label") continue;
        const auto comma = trimmed.find(',');
        CrashEvent c;
        try {
            c.date = Date::parse_flexible(csv::trim(trimmed.substr(0, comma)));
        } catch (const ValidationError& e) {
            throw ParseError(source, line_no, e.what());
        }
        if (comma != std::string_view::npos) c.label = std::string(csv::trim(trimmed.substr(comma + 1)));
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<CrashEvent> read_crash_list(const std::string& path) {
    auto in = open_input(path);
    return parse_crash_list(in, path);
}

std::vector<CrashEvent> reference_crashes() {
    return {{Date(1987, 10, 19), "Black Monday"},
            {Date(1987, 10, 26), "Black Monday aftershock"},
            {Date(1997, 10, 27), "Asian market crisis"},
            {Date(2001, 9, 17), "post-September 11 reopening"},
            {Date(2008, 9, 29), "financial crisis"},
            {Date(2008, 10, 9), "financial crisis"},
            {Date(2008, 10, 15), "financial crisis"},
            {Date(2008, 12, 1), "financial crisis"}};
}

std::vector<ScheduleSegment> parse_schedule(std::istream& in, const std::string& source) {
    std::string line;
    if (!csv::next_line(in, line)) throw ParseError(source, 1, "empty schedule file");
    csv::expect_header(line, "start,end,u,d", source);
    std::vector<ScheduleSegment> out;
    std::size_t line_no = 1;
    while (csv::next_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto fields = csv::split(line);
        if (fields.size() != 4)
            throw ParseError(source, line_no, "expected 4 fields, got " + std::to_string(fields.size()));
        ScheduleSegment s;
        try {
            s.start = Date::parse(fields[0]);
            s.end = Date::parse(fields[1]);
        } catch (const ValidationError& e) {
            throw ParseError(source, line_no, e.what());
        }
        s.u = static_cast<int>(csv::parse_int(fields[2], source, line_no, "u"));
        s.d = static_cast<int>(csv::parse_int(fields[3], source, line_no, "d"));
        out.push_back(s);
    }
    validate_schedule(out);
    return out;
}

std::vector<ScheduleSegment> read_schedule(const std::string& path) {
    auto in = open_input(path);
    return parse_schedule(in, path);
}

void validate_schedule(const std::vector<ScheduleSegment>& schedule) {
    if (schedule.empty()) throw ValidationError("schedule has no segments");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const auto& s = schedule[i];
        if (!(s.start < s.end))
            throw ValidationError("schedule segment " + std::to_string(i) + " is empty or reversed");
        if (s.u < 0 || s.d < 0)
            throw ValidationError("schedule segment " + std::to_string(i) + " has negative strength");
        if (i > 0 && schedule[i - 1].end != s.start)
            throw ValidationError("schedule gap or overlap between " + schedule[i - 1].end.iso() +
                                  " and " + s.start.iso());
    }
}

}  // namespace comove::pipeline
