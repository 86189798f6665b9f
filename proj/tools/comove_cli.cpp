// comove: command-line front end for the co-movement model library.
//
// Exit codes: 0 success, 2 invalid input or failed fit, 3 internal numeric
// failure. Every command writes <command>.meta.json into the output
// directory, also when it fails.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "comove/csv.hpp"
#include "comove/digest.hpp"
#include "comove/error.hpp"
#include "comove/estimation.hpp"
#include "comove/kernels.hpp"
#include "comove/model.hpp"
#include "comove/netsim.hpp"
#include "comove/parallel.hpp"
#include "comove/pipeline.hpp"
#include "comove/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using comove::csv::fmt17;

namespace {

constexpr const char* kVersion = COMOVE_VERSION;

// An option bound to a variable, remembered so the effective value can be
// recorded in the metadata and replayed.
struct Param {
    std::string name;
    std::function<json()> value;
    bool is_path = false;
};

class Command {
public:
    Command(CLI::App& app, std::string name, std::string help)
        : name_(std::move(name)), sub_(app.add_subcommand(name_, std::move(help))) {}

    template <class T>
    CLI::Option* option(const std::string& name, T& var, const std::string& help) {
        params_.push_back({name, [&var] { return json(var); }, false});
        return sub_->add_option("--" + name, var, help)->capture_default_str();
    }
    CLI::Option* path(const std::string& name, std::string& var, const std::string& help) {
        params_.push_back({name, [&var] { return json(var); }, true});
        return sub_->add_option("--" + name, var, help);
    }
    CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
        params_.push_back({name, [&var] { return json(var); }, false});
        return sub_->add_flag("--" + name, var, help);
    }

    const std::string& name() const { return name_; }
    CLI::App* app() const { return sub_; }
    const std::vector<Param>& params() const { return params_; }

    std::function<void()> run;

private:
    std::string name_;
    CLI::App* sub_;
    std::vector<Param> params_;
};

struct Globals {
    std::string output_dir = ".";
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string config;
};

// Collected while a command runs and written to the metadata file.
struct RunRecord {
    std::vector<std::string> outputs;
    json summary = json::object();
};

fs::path output_path(const Globals& g, const std::string& file) { return fs::path(g.output_dir) / file; }

void write_output(const Globals& g, RunRecord& record, const std::string& file,
                  const std::function<void(std::ostream&)>& body) {
    std::ostringstream buffer;
    body(buffer);
    fs::create_directories(g.output_dir);
    const fs::path target = output_path(g, file);
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) throw comove::ValidationError("cannot write output file '" + target.string() + "'");
    out << buffer.str();
    if (!out) throw comove::ValidationError("failed writing output file '" + target.string() + "'");
    record.outputs.push_back(file);
}

std::string value_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

comove::Date parse_date_option(const std::string& text, const char* what) {
    try {
        return comove::Date::parse(text);
    } catch (const comove::ValidationError&) {
        throw comove::ValidationError(std::string("--") + what + ": invalid date '" + text + "'");
    }
}

// Window over the series: explicit bounds override the data span.
comove::DateRange resolve_window(const comove::ComovementSeries& series, const std::string& start,
                                 const std::string& end) {
    if (series.empty()) throw comove::ValidationError("input has no days after filtering");
    comove::DateRange w{series.front().date, series.back().date.plus_days(1)};
    if (!start.empty()) w.start = parse_date_option(start, "window-start");
    if (!end.empty()) w.end = parse_date_option(end, "window-end");
    if (!(w.start < w.end)) throw comove::ValidationError("window end must follow window start");
    return w;
}

comove::pipeline::Step parse_step(const std::string& s) {
    if (s == "daily") return comove::pipeline::Step::Daily;
    if (s == "weekly") return comove::pipeline::Step::Weekly;
    return comove::pipeline::Step::Monthly;
}

void csv_kv(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& rows) {
    out << "key,value\n";
    for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
}

// ---- commands ------------------------------------------------------------

struct FitArgs {
    std::string input, window_start, window_end, overlay = "smoothed";
    int min_stocks = 140, min_days = 200, n_boot = 1000, block_len = 20, grid_points = 512;
    int target_bins = 20;
    double sigma = 0.06;
    bool iid = false, free = false;
};

void run_fit(const Globals& g, const FitArgs& a, RunRecord& rec) {
    namespace est = comove::estimation;
    std::size_t dropped = 0;
    const auto series = comove::pipeline::load_series(a.input, a.min_stocks, &dropped);
    const auto window = resolve_window(series, a.window_start, a.window_end);

    est::FitOptions fo;
    fo.min_days = a.min_days;
    fo.bootstrap = {a.n_boot, a.block_len, g.seed, a.iid};
    const auto fit = est::fit_symmetric(series, window, fo);

    std::vector<std::pair<std::string, std::string>> rows = {
        {"window_start", fit.window.start.iso()},
        {"window_end", fit.window.end.iso()},
        {"n_days", std::to_string(fit.n_days)},
        {"n_ref", std::to_string(fit.n_ref)},
        {"dropped_days", std::to_string(dropped)},
        {"c2", fmt17(fit.c2)},
        {"u_eq_d", fmt17(fit.u_eq_d)},
        {"stderr", fmt17(fit.std_error)},
    };
    if (a.free) {
        const auto ff = est::fit_free(series, window, fo);
        rows.insert(rows.end(), {{"xi", fmt17(ff.xi)},
                                 {"xi_stderr", fmt17(ff.xi_se)},
                                 {"a", fmt17(ff.a)},
                                 {"a_stderr", fmt17(ff.a_se)},
                                 {"u_free", fmt17(ff.u)},
                                 {"u_free_stderr", fmt17(ff.u_se)},
                                 {"d_free", fmt17(ff.d)},
                                 {"d_free_stderr", fmt17(ff.d_se)}});
    }
    write_output(g, rec, "fit.csv", [&](std::ostream& o) { csv_kv(o, rows); });
    rec.summary["u_eq_d"] = fit.u_eq_d;
    rec.summary["stderr"] = fit.std_error;
    rec.summary["n_days"] = fit.n_days;
    std::cout << "U = D = " << fmt17(fit.u_eq_d) << " +/- " << fmt17(fit.std_error) << " ("
              << fit.n_days << " days, N_ref " << fit.n_ref << ")\n";

    const comove::model::ModelParams params{fit.n_ref, fit.u_eq_d, fit.u_eq_d, 0.0};
    est::GofOptions go;
    go.target_bins = a.target_bins;
    const auto gof = est::chi2_gof(series, window, params, go);
    write_output(g, rec, "gof.csv", [&](std::ostream& o) { est::write_gof_csv(o, gof); });
    rec.summary["chi2_p_value"] = gof.p_value;

    est::KdeOptions ko{a.sigma, a.grid_points,
                       a.overlay == "raw" ? est::ModelOverlay::Raw : est::ModelOverlay::Smoothed};
    const auto curve = est::kde(series, window, ko, params);
    write_output(g, rec, "density.csv", [&](std::ostream& o) { est::write_density_csv(o, curve); });
}

struct SimArgs {
    std::string topology = "full", edges;
    int n_nodes = 100, degree = 0, u = 1, d = 1, replicas = 1;
    long long burn_in = 1000, samples = 10000, thin = 1;
    double p = 0.0;
    bool relaxation = false;
};

void run_simulate(const Globals& g, const SimArgs& a, RunRecord& rec) {
    namespace ns = comove::netsim;
    ns::TopologyRequest req;
    if (a.topology == "full") {
        req.kind = comove::TopologyKind::Full;
    } else if (a.topology == "regular") {
        req.kind = comove::TopologyKind::RegularRandom;
        req.degree = a.degree;
        req.seed = g.seed;
    } else {
        req.kind = comove::TopologyKind::EdgeList;
        req.path = a.edges;
    }
    auto topology = std::make_shared<const comove::TopologySpec>(ns::build_topology(req, a.n_nodes));

    ns::SimConfig cfg;
    cfg.burn_in_sweeps = a.burn_in;
    cfg.sample_sweeps = a.samples;
    cfg.thin = a.thin;
    cfg.seed = g.seed;
    cfg.p = a.p;
    cfg.replicas = a.replicas;
    const auto hist = ns::run(topology, a.u, a.d, cfg);
    write_output(g, rec, "histogram.csv", [&](std::ostream& o) { ns::write_histogram_csv(o, hist); });

    const int n = topology->n_nodes;
    std::vector<std::pair<std::string, std::string>> rows = {
        {"topology", topology->describe()},
        {"n_nodes", std::to_string(n)},
        {"k_av", fmt17(topology->k_av)},
        {"rescale_factor", fmt17(topology->rescale_factor)},
        {"n_samples", std::to_string(hist.n_samples)},
    };
    if (a.u > 0 && a.d > 0) {
        const auto eff = comove::model::effective_params(a.u, a.d, *topology);
        const auto pmf = comove::model::stationary_pmf({n, eff.u, eff.d, 0.0});
        const double tv = comove::model::total_variation(hist.frequencies(), pmf.probs());
        rows.emplace_back("u_ef", fmt17(eff.u));
        rows.emplace_back("d_ef", fmt17(eff.d));
        // Exact on the full graph, the rescaling approximation otherwise.
        rows.emplace_back(topology->kind == comove::TopologyKind::Full ? "tv_exact" : "tv_effective",
                          fmt17(tv));
        rec.summary["total_variation"] = tv;
        std::cout << "total variation to the " << (topology->kind == comove::TopologyKind::Full ? "exact" : "effective")
                  << " stationary law: " << fmt17(tv) << "\n";
    }
    if (a.relaxation) {
        const auto rel = ns::relaxation_estimate(topology, a.u, a.d, cfg);
        rows.emplace_back("relaxation_decaying", rel.decaying ? "true" : "false");
        rows.emplace_back("relaxation_rate", fmt17(rel.rate));
        rows.emplace_back("relaxation_stderr", fmt17(rel.std_error));
        if (rel.analytic_rate) rows.emplace_back("relaxation_analytic", fmt17(*rel.analytic_rate));
        if (!rel.warning.empty()) {
            rows.emplace_back("relaxation_warning", rel.warning);
            std::cerr << "warning: " << rel.warning << "\n";
        }
    }
    write_output(g, rec, "simulate_report.csv", [&](std::ostream& o) { csv_kv(o, rows); });
}

struct IndicatorArgs {
    std::string input, step = "daily";
    int min_stocks = 140, min_days = 200, n_boot = 1000, block_len = 20, window_months = 12;
    bool iid = false;
};

void run_indicator(const Globals& g, const IndicatorArgs& a, RunRecord& rec) {
    namespace pl = comove::pipeline;
    std::size_t dropped = 0;
    const auto series = pl::load_series(a.input, a.min_stocks, &dropped);
    pl::IndicatorOptions io;
    io.step = parse_step(a.step);
    io.window_months = a.window_months;
    io.fit.min_days = a.min_days;
    io.fit.bootstrap = {a.n_boot, a.block_len, g.seed, a.iid};
    const auto ind = pl::rolling_indicator(series, io);
    write_output(g, rec, "indicator.csv", [&](std::ostream& o) { pl::write_indicator_csv(o, ind); });
    write_output(g, rec, "indicator_gaps.csv", [&](std::ostream& o) {
        o << "date,reason\n";
        for (const auto& gap : ind.gaps) o << gap.date.iso() << ',' << gap.reason << '\n';
    });
    rec.summary["points"] = ind.points.size();
    rec.summary["gaps"] = ind.gaps.size();
    rec.summary["dropped_days"] = dropped;
    std::cout << ind.points.size() << " indicator points, " << ind.gaps.size() << " gaps\n";
}

struct DetectArgs {
    std::string input, windows, crashes, period_start, period_end;
    std::string signal_order = "normalize-first", mode = "shift-windows";
    double threshold = 2.0;
    int lookback_months = 12, window_months = 12, match_tolerance = 10;
    long long n_trials = 1000000;
    bool reference_crashes = false;
};

void run_detect(const Globals& g, const DetectArgs& a, RunRecord& rec) {
    namespace pl = comove::pipeline;
    if (a.input.empty() && a.windows.empty())
        throw comove::ValidationError("detect needs --input (indicator CSV) or --windows");

    std::vector<pl::WarningWindow> windows;
    std::optional<comove::DateRange> span;
    if (!a.input.empty()) {
        const auto ind = pl::read_indicator(a.input);
        if (ind.points.empty()) throw comove::ValidationError("indicator file '" + a.input + "' has no points");
        span = comove::DateRange{ind.points.front().date, ind.points.back().date.plus_days(1)};
        pl::SignalOptions so;
        so.order = a.signal_order == "average-first" ? pl::SignalOrder::AverageFirst
                                                     : pl::SignalOrder::NormalizeFirst;
        so.match_tolerance_days = a.match_tolerance;
        const auto signal = pl::normalized_change(ind, so);
        write_output(g, rec, "signal.csv", [&](std::ostream& o) { pl::write_signal_csv(o, signal); });
        if (a.windows.empty()) {
            pl::DetectOptions dop{a.threshold, a.lookback_months, a.window_months};
            windows = pl::detect_warnings(signal, dop);
        }
        rec.summary["signal_points"] = signal.points.size();
    }
    if (!a.windows.empty()) windows = pl::read_windows(a.windows);
    write_output(g, rec, "windows.csv", [&](std::ostream& o) { pl::write_windows_csv(o, windows); });
    rec.summary["windows"] = windows.size();
    std::cout << windows.size() << " warning window(s)\n";

    if (a.crashes.empty() && !a.reference_crashes) return;
    const auto crashes = a.reference_crashes ? pl::reference_crashes() : pl::read_crash_list(a.crashes);
    if (!a.period_start.empty()) {
        if (!span) span = comove::DateRange{};
        span->start = parse_date_option(a.period_start, "period-start");
    }
    if (!a.period_end.empty()) {
        if (!span) span = comove::DateRange{};
        span->end = parse_date_option(a.period_end, "period-end");
    }
    if (!span || (a.input.empty() && (a.period_start.empty() || a.period_end.empty())))
        throw comove::ValidationError("--period-start and --period-end are required without --input");

    const auto report = pl::evaluate_events(windows, crashes, *span);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    std::optional<pl::PermutationResult> perm;
    if (!windows.empty()) {
        const auto mode = a.mode == "shift-crashes" ? pl::PermutationMode::ShiftCrashes
                                                    : pl::PermutationMode::ShiftWindows;
        perm = pl::permutation_pvalue(windows, crashes, *span, a.n_trials, mode, g.seed);
        rec.summary["p_value"] = perm->p_value;
        rec.summary["wilson_lo"] = perm->wilson_lo;
        rec.summary["wilson_hi"] = perm->wilson_hi;
    }
    write_output(g, rec, "events.csv", [&](std::ostream& o) { pl::write_event_report(o, report, perm); });
    rec.summary["hits"] = report.hits;
    rec.summary["coverage_fraction"] = report.coverage_fraction;
    std::cout << report.hits << " of " << crashes.size() << " crashes covered";
    if (perm) std::cout << ", permutation p = " << fmt17(perm->p_value);
    std::cout << "\n";
}

struct ValidateArgs {
    int trials = 200;
};

// Analytic identities of the exact solution, each against an independent route.
void run_validate(const Globals& g, const ValidateArgs& a, RunRecord& rec) {
    namespace m = comove::model;
    struct Check {
        std::string name;
        double value, tolerance;
    };
    std::vector<Check> checks;

    double flat = 0.0;
    for (int n : {1, 10, 500, 3000}) {
        const auto rho = m::stationary_pmf({n, 1.0, 1.0, 0.0});
        for (double p : rho.probs()) flat = std::max(flat, std::abs(p - 1.0 / (n + 1)));
    }
    checks.push_back({"critical_flatness_max_abs", flat, 1e-12});

    comove::Rng rng = comove::make_stream(g.seed, 1);
    double norm = 0.0, moment = 0.0, roundtrip = 0.0;
    for (int t = 0; t < a.trials; ++t) {
        const int n = 2 + static_cast<int>(comove::uniform_below(rng, 2999));
        const double u = 0.05 + 99.95 * comove::uniform01(rng);
        const double d = 0.05 + 99.95 * comove::uniform01(rng);
        const auto rho = m::stationary_pmf({n, u, d, 0.0});
        norm = std::max(norm, std::abs(std::accumulate(rho.probs().begin(), rho.probs().end(), 0.0) - 1.0));
        const auto mo = m::moments_of({n, u, d, 0.0});
        moment = std::max({moment, std::abs(rho.mean_fraction() - mo.c1), std::abs(rho.variance_fraction() - mo.c2)});
        const auto back = m::invert_moments(mo.c1, mo.c2, n);
        roundtrip = std::max({roundtrip, std::abs(back.u() - u) / std::max(1.0, u),
                              std::abs(back.d() - d) / std::max(1.0, d)});
    }
    checks.push_back({"normalization_max_abs", norm, 1e-12});
    checks.push_back({"moments_max_abs", moment, 1e-10});
    checks.push_back({"moment_roundtrip_max_rel", roundtrip, 1e-12});

    double spectral = 0.0, fixed_point = 0.0;
    for (int n : {2, 5, 20, 50}) {
        const m::ModelParams p{n, 0.5 + 4 * comove::uniform01(rng), 0.5 + 4 * comove::uniform01(rng),
                               0.5 * comove::uniform01(rng)};
        const auto lambda = m::analytic_eigenvalues(p);
        const auto dense = m::dense_eigenvalues(m::EvolutionMatrix(p));
        for (std::size_t r = 0; r < lambda.size(); ++r) spectral = std::max(spectral, std::abs(lambda[r] - dense[r]));
        const auto rho = m::stationary_pmf(p);
        const auto next = m::EvolutionMatrix(p).apply(rho.probs());
        for (std::size_t k = 0; k < next.size(); ++k) fixed_point = std::max(fixed_point, std::abs(next[k] - rho[k]));
    }
    checks.push_back({"spectral_max_abs", spectral, 1e-9});
    checks.push_back({"fixed_point_max_abs", fixed_point, 1e-10});

    bool ok = true;
    write_output(g, rec, "validate.csv", [&](std::ostream& o) {
        o << "check,value,tolerance,pass\n";
        for (const auto& c : checks) {
            const bool pass = c.value <= c.tolerance;
            ok = ok && pass;
            o << c.name << ',' << fmt17(c.value) << ',' << fmt17(c.tolerance) << ',' << (pass ? "true" : "false") << '\n';
            std::cout << (pass ? "PASS " : "FAIL ") << c.name << " = " << fmt17(c.value) << "\n";
        }
    });
    rec.summary["all_passed"] = ok;
    if (!ok) throw comove::NumericError("analytic identity check failed");
}

struct SynthArgs {
    std::string schedule, format = "returns";
    int n_stocks = 500, days = 0, sweeps_per_day = 0, burn_in = 50;
    double p = 0.0;
};

void run_gensynth(const Globals& g, const SynthArgs& a, RunRecord& rec) {
    namespace pl = comove::pipeline;
    const auto schedule = pl::read_schedule(a.schedule);
    pl::SynthOptions so;
    so.n_stocks = a.n_stocks;
    so.days = a.days;
    so.seed = g.seed;
    so.burn_in_sweeps = a.burn_in;
    so.sweeps_per_day = a.sweeps_per_day;
    so.p = a.p;
    const auto out = pl::synth_market(schedule, so);
    if (a.format == "fractions") {
        const comove::ComovementSeries series(out.chain_counts);
        write_output(g, rec, "fractions.csv", [&](std::ostream& o) { pl::write_fractions_csv(o, series); });
    } else {
        write_output(g, rec, "returns.csv", [&](std::ostream& o) { pl::write_returns_csv(o, out.records); });
    }
    rec.summary["days"] = out.chain_counts.size();
    std::cout << out.chain_counts.size() << " trading days, " << a.n_stocks << " stocks\n";
}

struct DensityArgs {
    std::string input, window_start, window_end, overlay = "smoothed";
    int min_stocks = 140, grid_points = 512, n_nodes = 0;
    double sigma = 0.06, u = 0.0;
};

void run_export_density(const Globals& g, const DensityArgs& a, RunRecord& rec) {
    namespace est = comove::estimation;
    const auto series = comove::pipeline::load_series(a.input, a.min_stocks);
    const auto window = resolve_window(series, a.window_start, a.window_end);
    const auto days = series.window(window);
    if (days.empty()) throw comove::ValidationError("window contains no days");
    const int n_ref = a.n_nodes > 0 ? a.n_nodes : est::reference_n(days);
    double u = a.u;
    if (u <= 0.0) u = est::symmetric_estimate(series.fractions(window), n_ref);
    est::KdeOptions ko{a.sigma, a.grid_points,
                       a.overlay == "raw" ? est::ModelOverlay::Raw : est::ModelOverlay::Smoothed};
    const auto curve = est::kde(series, window, ko, comove::model::ModelParams{n_ref, u, u, 0.0});
    write_output(g, rec, "density.csv", [&](std::ostream& o) { est::write_density_csv(o, curve); });
    rec.summary["model_u"] = u;
    rec.summary["model_n"] = n_ref;
}

struct ReplayArgs {
    std::string metadata;
};

// ---- driver ----------------------------------------------------------------

std::vector<std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw comove::ValidationError("cannot open config file '" + path + "'");
    std::vector<std::string> args;
    std::string line;
    std::size_t line_no = 0;
    while (comove::csv::next_line(in, line)) {
        ++line_no;
        const auto t = comove::csv::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw comove::ParseError(path, line_no, "expected key=value");
        auto key = comove::csv::trim(t.substr(0, eq));
        while (!key.empty() && key.front() == '-') key.remove_prefix(1);
        if (key.empty()) throw comove::ParseError(path, line_no, "empty key");
        args.push_back("--" + std::string(key) + "=" + std::string(comove::csv::trim(t.substr(eq + 1))));
    }
    return args;
}

// Flags take precedence: config entries are inserted right after the
// subcommand so later command-line values win under last-value policy.
std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      const std::vector<std::string>& commands) {
    std::string config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
    }
    if (config.empty()) return args;
    const auto extra = read_config(config);
    std::size_t at = args.size();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (std::find(commands.begin(), commands.end(), args[i]) != commands.end()) {
            at = i + 1;
            break;
        }
    }
    std::vector<std::string> merged(args.begin(), args.begin() + static_cast<long>(at));
    merged.insert(merged.end(), extra.begin(), extra.end());
    merged.insert(merged.end(), args.begin() + static_cast<long>(at), args.end());
    return merged;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const comove::ValidationError*>(&e)) return 2;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 2;
    return 3;
}

int run_cli(std::vector<std::string> args) {
    CLI::App app{"Co-movement model: exact solution, simulation, fits and warning detection", "comove"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);

    Globals g;
    std::vector<Param> global_params;
    app.add_option("--output-dir", g.output_dir, "Directory for outputs and metadata")->capture_default_str();
    app.add_option("--seed", g.seed, "Seed for every stochastic step")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0 = available cores)")->capture_default_str();
    app.add_option("--config", g.config, "Line-oriented key=value defaults, overridden by flags");
    global_params.push_back({"output-dir", [&] { return json(g.output_dir); }, false});
    global_params.push_back({"seed", [&] { return json(g.seed); }, false});
    global_params.push_back({"threads", [&] { return json(g.threads); }, false});
    global_params.push_back({"config", [&] { return json(g.config); }, true});

    std::vector<std::unique_ptr<Command>> commands;
    RunRecord record;
    auto add = [&](std::string name, std::string help) -> Command& {
        commands.push_back(std::make_unique<Command>(app, std::move(name), std::move(help)));
        return *commands.back();
    };

    FitArgs fit;
    {
        auto& c = add("fit", "Fit U = D to a window; write fit, chi-square and density files");
        c.path("input", fit.input, "Returns CSV (date,ticker,return) or fractions CSV (date,n_up,n_total)")->required();
        c.option("window-start", fit.window_start, "First day of the window (YYYY-MM-DD)");
        c.option("window-end", fit.window_end, "Day after the window (YYYY-MM-DD)");
        c.option("min-stocks", fit.min_stocks, "Drop days with fewer non-zero returns");
        c.option("min-days", fit.min_days, "Minimum days in the window");
        c.option("n-boot", fit.n_boot, "Bootstrap resamples");
        c.option("block-len", fit.block_len, "Bootstrap block length in days");
        c.flag("iid-bootstrap", fit.iid, "Resample single days instead of blocks");
        c.option("sigma", fit.sigma, "Kernel width");
        c.option("grid-points", fit.grid_points, "Density grid size");
        c.option("overlay", fit.overlay, "Model curve: smoothed or raw")->check(CLI::IsMember({"smoothed", "raw"}));
        c.option("target-bins", fit.target_bins, "Chi-square bins before merging");
        c.flag("free", fit.free, "Also fit U and D separately");
        c.run = [&] { run_fit(g, fit, record); };
    }
    SimArgs sim;
    {
        auto& c = add("simulate", "Run the copy dynamics and compare with the exact stationary law");
        c.option("topology", sim.topology, "full, regular or edges")->check(CLI::IsMember({"full", "regular", "edges"}));
        c.option("n-nodes", sim.n_nodes, "Variable nodes (0 infers from the edge list)");
        c.option("degree", sim.degree, "Degree of the regular random graph");
        c.path("edges", sim.edges, "Edge list file (one 'i j' pair per line)");
        c.option("u", sim.u, "Up-frozen nodes");
        c.option("d", sim.d, "Down-frozen nodes");
        c.option("p", sim.p, "Probability a selected node keeps its state");
        c.option("burn-in", sim.burn_in, "Sweeps discarded before sampling");
        c.option("samples", sim.samples, "Samples recorded per replica");
        c.option("thin", sim.thin, "Sweeps between samples");
        c.option("replicas", sim.replicas, "Independent chains");
        c.flag("relaxation", sim.relaxation, "Also estimate the relaxation rate");
        c.run = [&] { run_simulate(g, sim, record); };
    }
    IndicatorArgs ind;
    {
        auto& c = add("indicator", "Rolling 12-month fit of U = D");
        c.path("input", ind.input, "Returns or fractions CSV")->required();
        c.option("step", ind.step, "daily, weekly or monthly")->check(CLI::IsMember({"daily", "weekly", "monthly"}));
        c.option("min-stocks", ind.min_stocks, "Drop days with fewer non-zero returns");
        c.option("min-days", ind.min_days, "Minimum days per window");
        c.option("n-boot", ind.n_boot, "Bootstrap resamples per point");
        c.option("block-len", ind.block_len, "Bootstrap block length in days");
        c.flag("iid-bootstrap", ind.iid, "Resample single days instead of blocks");
        c.option("window-months", ind.window_months, "Trailing window length");
        c.run = [&] { run_indicator(g, ind, record); };
    }
    DetectArgs det;
    {
        auto& c = add("detect", "Annual change signal, warning windows and crash evaluation");
        c.path("input", det.input, "Indicator CSV");
        c.option("threshold", det.threshold, "Trigger when the smoothed signal reaches -threshold");
        c.option("signal-order", det.signal_order, "normalize-first or average-first")
            ->check(CLI::IsMember({"normalize-first", "average-first"}));
        c.option("lookback-months", det.lookback_months, "Positive-change lookback");
        c.option("window-months", det.window_months, "Warning window length");
        c.option("match-tolerance", det.match_tolerance, "Trading days allowed when matching t - 1y");
        c.path("windows", det.windows, "Evaluate these windows instead of detected ones");
        c.path("crashes", det.crashes, "Crash list (date,label)");
        c.flag("reference-crashes", det.reference_crashes, "Use the built-in list of eight crash dates");
        c.option("period-start", det.period_start, "Study period start (default: indicator span)");
        c.option("period-end", det.period_end, "Study period end, exclusive");
        c.option("n-trials", det.n_trials, "Permutation trials");
        c.option("mode", det.mode, "shift-windows or shift-crashes")
            ->check(CLI::IsMember({"shift-windows", "shift-crashes"}));
        c.run = [&] { run_detect(g, det, record); };
    }
    ValidateArgs val;
    {
        auto& c = add("validate", "Check the exact solution's identities against independent routes");
        c.option("trials", val.trials, "Random parameter sets");
        c.run = [&] { run_validate(g, val, record); };
    }
    SynthArgs syn;
    {
        auto& c = add("gen-synth", "Synthetic market from a schedule of integer U, D");
        c.path("schedule", syn.schedule, "Schedule CSV (start,end,u,d)")->required();
        c.option("n-stocks", syn.n_stocks, "Stocks (variable nodes)");
        c.option("days", syn.days, "Trading days (0 = whole schedule)");
        c.option("sweeps-per-day", syn.sweeps_per_day, "Sweeps between daily snapshots (0 = auto)");
        c.option("burn-in", syn.burn_in, "Sweeps at the start and after each schedule change");
        c.option("p", syn.p, "Probability a selected node keeps its state");
        c.option("format", syn.format, "returns or fractions")->check(CLI::IsMember({"returns", "fractions"}));
        c.run = [&] { run_gensynth(g, syn, record); };
    }
    DensityArgs den;
    {
        auto& c = add("export-density", "Kernel density of daily fractions with the model curve");
        c.path("input", den.input, "Returns or fractions CSV")->required();
        c.option("window-start", den.window_start, "First day of the window");
        c.option("window-end", den.window_end, "Day after the window");
        c.option("min-stocks", den.min_stocks, "Drop days with fewer non-zero returns");
        c.option("sigma", den.sigma, "Kernel width");
        c.option("grid-points", den.grid_points, "Density grid size");
        c.option("overlay", den.overlay, "smoothed or raw")->check(CLI::IsMember({"smoothed", "raw"}));
        c.option("u", den.u, "Model U = D (0 = moment fit of the window)");
        c.option("n-nodes", den.n_nodes, "Model N (0 = window median)");
        c.run = [&] { run_export_density(g, den, record); };
    }
    ReplayArgs rep;
    CLI::App* replay = app.add_subcommand("replay", "Re-run a command from its metadata file");
    replay->add_option("metadata", rep.metadata, "Path to <command>.meta.json")->required();

    std::vector<std::string> names;
    for (const auto& c : commands) names.push_back(c->name());
    names.push_back("replay");

    std::vector<std::string> merged;
    try {
        merged = merge_config(args, names);
        std::vector<std::string> reversed(merged.rbegin(), merged.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }

    if (replay->parsed()) {
        std::ifstream in(rep.metadata);
        if (!in) {
            std::cerr << "error: cannot open metadata file '" << rep.metadata << "'\n";
            return 2;
        }
        json meta;
        try {
            meta = json::parse(in);
            return run_cli(meta.at("argv").get<std::vector<std::string>>());
        } catch (const json::exception& e) {
            std::cerr << "error: malformed metadata file '" << rep.metadata << "': " << e.what() << "\n";
            return 2;
        }
    }

    Command* active = nullptr;
    for (const auto& c : commands)
        if (c->app()->parsed()) active = c.get();

    comove::set_thread_count(g.threads);
    int code = 0;
    std::string message;
    try {
        active->run();
    } catch (const std::exception& e) {
        code = exit_code_for(e);
        message = e.what();
        std::cerr << "error: " << message << "\n";
    }

    json params = json::object();
    json inputs = json::array();
    std::vector<std::string> argv{active->name()};
    auto record_param = [&](const Param& p) {
        const json v = p.value();
        params[p.name] = v;
        if (p.name == "config") return;
        if (v.is_string() && v.get<std::string>().empty()) return;
        argv.push_back("--" + p.name + "=" + value_text(v));
        if (p.is_path) {
            const std::string path = v.get<std::string>();
            json entry{{"option", p.name}, {"path", path}};
            try {
                entry["sha256"] = comove::sha256_file(path);
            } catch (const std::exception&) {
                entry["sha256"] = nullptr;
            }
            inputs.push_back(entry);
        }
    };
    for (const auto& p : global_params) record_param(p);
    for (const auto& p : active->params()) record_param(p);
    if (!g.config.empty()) {
        json entry{{"option", "config"}, {"path", g.config}};
        try {
            entry["sha256"] = comove::sha256_file(g.config);
        } catch (const std::exception&) {
            entry["sha256"] = nullptr;
        }
        inputs.push_back(entry);
    }

    json meta;
    meta["tool"] = "comove";
    meta["version"] = kVersion;
    meta["command"] = active->name();
    meta["status"] = code == 0 ? "ok" : "error";
    meta["exit_code"] = code;
    meta["message"] = message;
    meta["seed"] = g.seed;
    meta["kernels"] = comove::kernels::active_table().name;
    meta["parameters"] = params;
    meta["inputs"] = inputs;
    meta["outputs"] = record.outputs;
    meta["summary"] = record.summary;
    meta["argv"] = argv;
    try {
        fs::create_directories(g.output_dir);
        std::ofstream out(output_path(g, active->name() + ".meta.json"), std::ios::binary | std::ios::trunc);
        out << meta.dump(2) << '\n';
        if (!out) throw comove::ValidationError("cannot write metadata file");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (code == 0) code = 2;
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    return run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
