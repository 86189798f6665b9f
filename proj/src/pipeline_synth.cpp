#include <cmath>
#include <memory>
#include <random>

#include "comove/error.hpp"
#include "comove/netsim.hpp"
#include "comove/pipeline.hpp"
#include "comove/rng.hpp"

namespace comove::pipeline {

int auto_sweeps_per_day(int n_stocks, int u, int d) {
    if (u + d <= 0) return 1;
    return static_cast<int>(std::ceil(3.0 * (n_stocks + u + d - 1.0) / (u + d)));
}

SynthResult synth_market(const std::vector<ScheduleSegment>& schedule, const SynthOptions& options) {
    validate_schedule(schedule);
    if (options.n_stocks < 2) throw ValidationError("synthetic market needs at least 2 stocks");
    if (options.days < 0) throw ValidationError("days must be >= 0");
    if (options.burn_in_sweeps < 0 || options.sweeps_per_day < 0)
        throw ValidationError("sweep counts must be >= 0");
    if (!(options.p >= 0.0 && options.p < 1.0)) throw ValidationError("p must lie in [0, 1)");

    std::vector<Date> days;
    for (Date d = schedule.front().start;; d = d.plus_days(1)) {
        if (options.days > 0 && static_cast<int>(days.size()) == options.days) break;
        if (!(d < schedule.back().end)) {
            if (options.days > 0)
                throw ValidationError("schedule ends on " + schedule.back().end.iso() + " after " +
                                      std::to_string(days.size()) + " of " +
                                      std::to_string(options.days) + " requested trading days");
            break;
        }
        if (d.is_weekday()) days.push_back(d);
    }

    auto topology = std::make_shared<const TopologySpec>(netsim::full_topology(options.n_stocks));
    Rng chain_rng = make_stream(options.seed, 0);
    Rng size_rng = make_stream(options.seed, 1);
    std::normal_distribution<double> log_size(-4.6, 0.5);

    netsim::NetworkState state(topology, schedule.front().u, schedule.front().d, chain_rng);

    const int width = static_cast<int>(std::to_string(options.n_stocks - 1).size());
    std::vector<std::string> tickers(options.n_stocks);
    for (int i = 0; i < options.n_stocks; ++i) {
        std::string digits = std::to_string(i);
        tickers[i] = "S" + std::string(width - digits.size(), '0') + digits;
    }

    SynthResult out;
    out.records.reserve(days.size() * static_cast<std::size_t>(options.n_stocks));
    out.chain_counts.reserve(days.size());
    std::size_t seg = schedule.size();
    int sweeps = 1;
    for (const Date day : days) {
        std::size_t s = 0;
        while (!(day < schedule[s].end)) ++s;
        if (s != seg) {
            seg = s;
            state.set_frozen(schedule[s].u, schedule[s].d);
            for (int b = 0; b < options.burn_in_sweeps; ++b) state.sweep(options.p, chain_rng);
            sweeps = options.sweeps_per_day > 0
                         ? options.sweeps_per_day
                         : static_cast<int>(std::ceil(
                               auto_sweeps_per_day(options.n_stocks, schedule[s].u, schedule[s].d) /
                               (1.0 - options.p)));
        }
        for (int w = 0; w < sweeps; ++w) state.sweep(options.p, chain_rng);
        out.chain_counts.push_back({day, state.up_count(), options.n_stocks});
        const auto signs = state.signs();
        for (int i = 0; i < options.n_stocks; ++i) {
            const double magnitude = std::exp(log_size(size_rng));
            out.records.push_back({day, tickers[i], signs[i] > 0 ? magnitude : -magnitude});
        }
    }
    return out;
}

}  // namespace comove::pipeline
