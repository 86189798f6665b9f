#include "comove/estimation.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <set>

#include "comove/csv.hpp"
#include "comove/error.hpp"
#include "comove/kernels.hpp"
#include "comove/parallel.hpp"
#include "comove/rng.hpp"

namespace comove {

ComovementSeries::ComovementSeries(std::vector<DayCount> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.n_day < 1 || e.k_up < 0 || e.k_up > e.n_day)
            throw ValidationError("invalid count on " + e.date.iso() + ": k_up=" +
                                  std::to_string(e.k_up) + ", n_day=" + std::to_string(e.n_day));
        if (i > 0 && !(entries_[i - 1].date < e.date))
            throw ValidationError("series dates must strictly increase (at " + e.date.iso() + ")");
    }
}

std::span<const DayCount> ComovementSeries::window(const DateRange& range) const {
    auto lo = std::lower_bound(entries_.begin(), entries_.end(), range.start,
                               [](const DayCount& e, Date d) { return e.date < d; });
    auto hi = std::lower_bound(lo, entries_.end(), range.end,
                               [](const DayCount& e, Date d) { return e.date < d; });
    return {lo, hi};
}

std::vector<double> ComovementSeries::fractions(const DateRange& range) const {
    const auto days = window(range);
    std::vector<double> out;
    out.reserve(days.size());
    for (const auto& d : days) out.push_back(d.fraction());
    return out;
}

}  // namespace comove

namespace comove::estimation {

PositiveFractionResult positive_fraction(std::span<const ReturnRecord> records,
                                         const PositiveFractionOptions& options) {
    if (records.empty()) throw ValidationError("positive_fraction: no return records");

    struct Tally {
        int up = 0, total = 0;
        std::size_t zeros = 0;
        std::set<std::string> tickers;
    };
    std::map<Date, Tally> days;
    for (const auto& r : records) {
        auto& t = days[r.date];
        if (!t.tickers.insert(r.ticker).second)
            throw ValidationError("duplicate return for (" + r.date.iso() + ", " + r.ticker + ")");
        if (r.ret == 0.0) {
            ++t.zeros;
            continue;
        }
        ++t.total;
        t.up += r.ret > 0.0;
    }

    PositiveFractionResult out;
    std::vector<DayCount> kept;
    for (const auto& [date, t] : days) {
        out.zero_returns += t.zeros;
        if (t.zeros) out.zeros_by_day.emplace_back(date, t.zeros);
        if (t.total < options.min_stocks || t.total == 0) {
            ++out.dropped_days;
            continue;
        }
        kept.push_back({date, t.up, t.total});
    }
    out.series = ComovementSeries(std::move(kept));
    return out;
}

ComovementSeries filter_min_stocks(const ComovementSeries& series, int min_stocks,
                                   std::size_t* dropped) {
    std::vector<DayCount> kept;
    std::size_t gone = 0;
    for (const auto& e : series.entries()) {
        if (e.n_day >= min_stocks)
            kept.push_back(e);
        else
            ++gone;
    }
    if (dropped) *dropped = gone;
    return ComovementSeries(std::move(kept));
}

double sample_variance(std::span<const double> x) {
    if (x.size() < 2) throw FitError("variance needs at least two observations");
    return kernels::mean_var(x).variance;
}

double symmetric_estimate(std::span<const double> fractions, int n_ref) {
    const double c2 = sample_variance(fractions);
    try {
        return model::invert_moments(0.5, c2, n_ref).a / 2.0;
    } catch (const MomentRangeError& e) {
        throw FitError(std::string("symmetric fit failed: ") + e.what(), c2);
    }
}

model::MomentInversion free_estimate(std::span<const double> fractions, int n_ref) {
    if (fractions.size() < 2) throw FitError("variance needs at least two observations");
    const auto mv = kernels::mean_var(fractions);
    try {
        return model::invert_moments(mv.mean, mv.variance, n_ref);
    } catch (const MomentRangeError& e) {
        throw FitError(std::string("free fit failed: ") + e.what(), mv.variance);
    }
}

int reference_n(std::span<const DayCount> days) {
    if (days.empty()) throw FitError("empty window");
    std::vector<int> n;
    n.reserve(days.size());
    for (const auto& d : days) n.push_back(d.n_day);
    const auto mid = n.begin() + static_cast<std::ptrdiff_t>((n.size() - 1) / 2);
    std::nth_element(n.begin(), mid, n.end());
    return *mid;
}

BootstrapResult bootstrap(std::span<const double> data, const VectorEstimator& estimator,
                          const BootstrapOptions& options) {
    const std::size_t n = data.size();
    if (options.n_boot < 2) throw ValidationError("bootstrap needs n_boot >= 2");
    const std::size_t block = options.iid ? 1 : static_cast<std::size_t>(options.block_len);
    if (!options.iid) {
        if (options.block_len < 1) throw ValidationError("block_len must be >= 1");
        if (block >= n)
            throw ValidationError("block_len " + std::to_string(block) +
                                  " covers the whole window: resamples would not vary");
        if (n < 2 * block)
            throw ValidationError("window holds " + std::to_string(n) +
                                  " days; block bootstrap needs at least 2*block_len");
    } else if (n < 2) {
        throw ValidationError("bootstrap needs at least two observations");
    }

    std::vector<std::optional<std::vector<double>>> results(options.n_boot);
    parallel_for(results.size(), [&](std::size_t i) {
        Rng rng = make_stream(options.seed, i);
        std::vector<double> sample(n);
        std::size_t filled = 0;
        while (filled < n) {
            const std::size_t start = uniform_below(rng, n - block + 1);
            const std::size_t take = std::min(block, n - filled);
            std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(start), take,
                        sample.begin() + static_cast<std::ptrdiff_t>(filled));
            filled += take;
        }
        try {
            results[i] = estimator(sample);
        } catch (const ValidationError&) {
        }
    });

    BootstrapResult out;
    out.n_boot = options.n_boot;
    std::size_t width = 0;
    for (const auto& r : results) {
        if (!r) {
            ++out.failures;
            continue;
        }
        width = r->size();
    }
    if (out.failures * 10 > options.n_boot)
        throw FitError("bootstrap: " + std::to_string(out.failures) + " of " +
                       std::to_string(options.n_boot) + " resamples failed (" +
                       csv::fmt17(100.0 * out.failures / options.n_boot) + "%)");
    out.std_error.assign(width, 0.0);
    std::vector<double> column;
    for (std::size_t j = 0; j < width; ++j) {
        column.clear();
        for (const auto& r : results)
            if (r) column.push_back((*r)[j]);
        out.std_error[j] = std::sqrt(kernels::mean_var(column).variance);
    }
    return out;
}

double bootstrap_stderr(std::span<const double> data, const Estimator& estimator,
                        const BootstrapOptions& options) {
    const auto r = bootstrap(
        data, [&](std::span<const double> s) { return std::vector<double>{estimator(s)}; }, options);
    return r.std_error.at(0);
}

double bootstrap_stderr(const ComovementSeries& series, const DateRange& window,
                        const Estimator& estimator, const BootstrapOptions& options) {
    const auto fractions = series.fractions(window);
    return bootstrap_stderr(fractions, estimator, options);
}

namespace {

std::span<const DayCount> occupied_window(const ComovementSeries& series, const DateRange& window,
                                          int min_days) {
    const auto days = series.window(window);
    if (static_cast<int>(days.size()) < min_days || days.size() < 2)
        throw FitError("window " + window.start.iso() + " .. " + window.end.iso() + " holds " +
                       std::to_string(days.size()) + " days; at least " +
                       std::to_string(std::max(min_days, 2)) + " required");
    return days;
}

}  // namespace

FitResult fit_symmetric(const ComovementSeries& series, const DateRange& window,
                        const FitOptions& options) {
    const auto days = occupied_window(series, window, options.min_days);
    FitResult fit;
    fit.window = window;
    fit.n_days = static_cast<int>(days.size());
    fit.n_ref = reference_n(days);
    const auto fractions = series.fractions(window);
    fit.c2 = sample_variance(fractions);
    fit.u_eq_d = symmetric_estimate(fractions, fit.n_ref);
    const int n_ref = fit.n_ref;
    fit.std_error = bootstrap_stderr(
        fractions, [n_ref](std::span<const double> s) { return symmetric_estimate(s, n_ref); },
        options.bootstrap);
    return fit;
}

FreeFitResult fit_free(const ComovementSeries& series, const DateRange& window,
                       const FitOptions& options) {
    const auto days = occupied_window(series, window, options.min_days);
    FreeFitResult fit;
    fit.window = window;
    fit.n_days = static_cast<int>(days.size());
    fit.n_ref = reference_n(days);
    const auto fractions = series.fractions(window);
    const auto inv = free_estimate(fractions, fit.n_ref);
    fit.xi = inv.xi;
    fit.a = inv.a;
    fit.u = inv.u();
    fit.d = inv.d();
    const int n_ref = fit.n_ref;
    const auto boot = bootstrap(
        fractions,
        [n_ref](std::span<const double> s) {
            const auto r = free_estimate(s, n_ref);
            return std::vector<double>{r.u(), r.d(), r.xi, r.a};
        },
        options.bootstrap);
    fit.u_se = boot.std_error[0];
    fit.d_se = boot.std_error[1];
    fit.xi_se = boot.std_error[2];
    fit.a_se = boot.std_error[3];
    return fit;
}

std::vector<double> unit_grid(int points) {
    if (points < 2) throw ValidationError("density grid needs at least 2 points");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = static_cast<double>(i) / (points - 1);
    return grid;
}

double trapezoid(std::span<const double> grid, std::span<const double> values) {
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        s += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    return s;
}

namespace {

void normalise_on_grid(std::span<const double> grid, std::vector<double>& values) {
    const double area = trapezoid(grid, values);
    if (area > 0.0)
        for (auto& v : values) v /= area;
}

}  // namespace

std::vector<double> gaussian_kde(std::span<const double> values, std::span<const double> grid,
                                 double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("kernel width must be positive");
    std::vector<double> out(grid.size(), 0.0);
    if (values.empty()) return out;
    kernels::gaussian_sum(grid, values, {}, 1.0 / sigma, out);
    const double norm = 1.0 / (static_cast<double>(values.size()) * sigma *
                               std::sqrt(2.0 * std::numbers::pi));
    for (auto& v : out) v *= norm;
    normalise_on_grid(grid, out);
    return out;
}

std::vector<double> model_density(const model::StationaryDist& pmf, std::span<const double> grid,
                                  double sigma, ModelOverlay overlay) {
    const int n = pmf.n_nodes();
    std::vector<double> out(grid.size(), 0.0);
    if (overlay == ModelOverlay::Smoothed) {
        if (!(sigma > 0.0)) throw ValidationError("kernel width must be positive");
        std::vector<double> centres(pmf.size());
        for (std::size_t k = 0; k < centres.size(); ++k) centres[k] = static_cast<double>(k) / n;
        kernels::gaussian_sum(grid, centres, pmf.probs(), 1.0 / sigma, out);
    } else {
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const auto k = static_cast<std::size_t>(std::lround(grid[g] * n));
            out[g] = pmf[std::min(k, pmf.size() - 1)] * n;
        }
    }
    normalise_on_grid(grid, out);
    return out;
}

DensityCurve kde(const ComovementSeries& series, const DateRange& window, const KdeOptions& options,
                 const std::optional<model::ModelParams>& overlay) {
    DensityCurve curve;
    curve.grid = unit_grid(options.grid_points);
    const auto fractions = series.fractions(window);
    if (fractions.empty()) throw FitError("density window " + window.start.iso() + " .. " +
                                          window.end.iso() + " is empty");
    curve.empirical = gaussian_kde(fractions, curve.grid, options.sigma);
    if (overlay)
        curve.model = model_density(model::stationary_pmf(*overlay), curve.grid, options.sigma,
                                    options.overlay);
    return curve;
}

GofReport chi2_gof(std::span<const double> fractions, const model::ModelParams& params,
                   const GofOptions& options) {
    if (static_cast<int>(fractions.size()) < options.min_days)
        throw ValidationError("goodness-of-fit needs at least " + std::to_string(options.min_days) +
                              " days, got " + std::to_string(fractions.size()));
    if (options.target_bins < 3) throw ValidationError("target_bins must be >= 3");
    const auto pmf = model::stationary_pmf(params);
    const int n = params.n_nodes;
    const double days = static_cast<double>(fractions.size());

    struct Raw {
        int lo, hi;
        double prob;
    };
    std::vector<Raw> raw;
    {
        double cum = 0.0, mass = 0.0;
        int start = 0;
        int next = 1;
        for (int k = 0; k <= n; ++k) {
            cum += pmf[k];
            mass += pmf[k];
            const double edge = static_cast<double>(next) / options.target_bins;
            if (k == n || cum >= edge) {
                raw.push_back({start, k, mass});
                start = k + 1;
                mass = 0.0;
                while (next < options.target_bins &&
                       cum >= static_cast<double>(next) / options.target_bins)
                    ++next;
            }
        }
    }
    // Merge the smallest under-filled bin into its smaller neighbour.
    while (raw.size() > 1) {
        std::size_t worst = raw.size();
        for (std::size_t i = 0; i < raw.size(); ++i)
            if (raw[i].prob * days < options.min_expected &&
                (worst == raw.size() || raw[i].prob < raw[worst].prob))
                worst = i;
        if (worst == raw.size()) break;
        std::size_t other;
        if (worst == 0)
            other = 1;
        else if (worst + 1 == raw.size())
            other = worst - 1;
        else
            other = raw[worst - 1].prob <= raw[worst + 1].prob ? worst - 1 : worst + 1;
        const std::size_t a = std::min(worst, other), b = std::max(worst, other);
        raw[a] = {raw[a].lo, raw[b].hi, raw[a].prob + raw[b].prob};
        raw.erase(raw.begin() + static_cast<std::ptrdiff_t>(b));
    }
    if (raw.size() < 3)
        throw ValidationError("only " + std::to_string(raw.size()) +
                              " chi-square bins survive merging; need at least 3");

    GofReport report;
    report.n_days = static_cast<int>(fractions.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        GofBin bin;
        bin.k_lo = raw[i].lo;
        bin.k_hi = raw[i].hi;
        bin.x_lo = i == 0 ? 0.0 : (raw[i].lo - 0.5) / n;
        bin.x_hi = i + 1 == raw.size() ? 1.0 : (raw[i].hi + 0.5) / n;
        bin.expected = raw[i].prob * days;
        report.bins.push_back(bin);
    }
    for (double x : fractions) {
        const double scaled = x * n;
        std::size_t i = 0;
        while (i + 1 < report.bins.size() && !(scaled < report.bins[i].k_hi + 0.5)) ++i;
        ++report.bins[i].observed;
    }
    for (const auto& b : report.bins) {
        const double diff = static_cast<double>(b.observed) - b.expected;
        report.statistic += diff * diff / b.expected;
    }
    report.dof = static_cast<int>(report.bins.size()) - 1 - options.fitted_params;
    if (report.dof < 1)
        throw ValidationError("chi-square test has no degrees of freedom left");
    report.p_value = boost::math::gamma_q(report.dof / 2.0, report.statistic / 2.0);
    return report;
}

GofReport chi2_gof(const ComovementSeries& series, const DateRange& window,
                   const model::ModelParams& params, const GofOptions& options) {
    return chi2_gof(series.fractions(window), params, options);
}

void write_density_csv(std::ostream& out, const DensityCurve& curve) {
    out << "x,empirical,model\n";
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        out << csv::fmt17(curve.grid[i]) << ',' << csv::fmt17(curve.empirical[i]) << ',';
        if (curve.model) out << csv::fmt17((*curve.model)[i]);
        out << '\n';
    }
}

void write_gof_csv(std::ostream& out, const GofReport& report) {
    out << "bin_lo,bin_hi,observed,expected\n";
    for (const auto& b : report.bins)
        out << csv::fmt17(b.x_lo) << ',' << csv::fmt17(b.x_hi) << ',' << b.observed << ','
            << csv::fmt17(b.expected) << '\n';
    out << "# statistic=" << csv::fmt17(report.statistic) << ",dof=" << report.dof
        << ",p_value=" << csv::fmt17(report.p_value) << ",n_days=" << report.n_days << '\n';
}

}  // namespace comove::estimation
