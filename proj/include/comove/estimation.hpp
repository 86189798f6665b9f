#pragma once

// Moment fits of the model to daily positive-return fractions, block
// bootstrap sampling errors, kernel density curves and chi-square
// goodness-of-fit.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "comove/model.hpp"
#include "comove/series.hpp"

namespace comove::estimation {

struct PositiveFractionOptions {
    int min_stocks = 140;
};

struct PositiveFractionResult {
    ComovementSeries series;
    std::size_t dropped_days = 0;      // days with n_day < min_stocks
    std::size_t zero_returns = 0;      // excluded from numerator and denominator
    std::vector<std::pair<Date, std::size_t>> zeros_by_day;
};

// Records need not be sorted. Duplicate (date, ticker) pairs are rejected.
PositiveFractionResult positive_fraction(std::span<const ReturnRecord> records,
                                         const PositiveFractionOptions& options = {});

// Keeps days with n_day >= min_stocks.
ComovementSeries filter_min_stocks(const ComovementSeries& series, int min_stocks,
                                   std::size_t* dropped = nullptr);

struct BootstrapOptions {
    int n_boot = 1000;
    int block_len = 20;
    std::uint64_t seed = 1;
    bool iid = false;  // plain i.i.d. resampling instead of moving blocks
};

struct FitOptions {
    int min_days = 200;
    BootstrapOptions bootstrap;
};

struct FitResult {
    double u_eq_d = 0.0;
    double std_error = 0.0;
    int n_ref = 0;
    DateRange window;
    int n_days = 0;
    double c2 = 0.0;
};

struct FreeFitResult {
    double u = 0.0, d = 0.0, xi = 0.0, a = 0.0;
    double u_se = 0.0, d_se = 0.0, xi_se = 0.0, a_se = 0.0;
    int n_ref = 0;
    DateRange window;
    int n_days = 0;
};

// Unbiased (n-1) sample variance.
double sample_variance(std::span<const double> x);

// U = D = a/2 from the sample variance with the mean pinned at 0.5.
double symmetric_estimate(std::span<const double> fractions, int n_ref);
// (xi, a) from the sample mean and variance.
model::MomentInversion free_estimate(std::span<const double> fractions, int n_ref);

// Median of n_day over the window (lower median for even counts).
int reference_n(std::span<const DayCount> days);

FitResult fit_symmetric(const ComovementSeries& series, const DateRange& window,
                        const FitOptions& options = {});
FreeFitResult fit_free(const ComovementSeries& series, const DateRange& window,
                       const FitOptions& options = {});

using Estimator = std::function<double(std::span<const double>)>;
using VectorEstimator = std::function<std::vector<double>(std::span<const double>)>;

struct BootstrapResult {
    std::vector<double> std_error;  // one per estimator output
    int n_boot = 0;
    int failures = 0;
};

// Moving-block bootstrap over `data` (contiguous blocks of block_len
// drawn uniformly, concatenated and truncated to data.size()). Resample i
// uses RNG stream (seed, i). Resamples on which the estimator throws
// ValidationError count as failures; more than 10% failures throws FitError.
BootstrapResult bootstrap(std::span<const double> data, const VectorEstimator& estimator,
                          const BootstrapOptions& options);

double bootstrap_stderr(std::span<const double> data, const Estimator& estimator,
                        const BootstrapOptions& options);
double bootstrap_stderr(const ComovementSeries& series, const DateRange& window,
                        const Estimator& estimator, const BootstrapOptions& options);

struct DensityCurve {
    std::vector<double> grid;
    std::vector<double> empirical;
    std::optional<std::vector<double>> model;
};

enum class ModelOverlay { Smoothed, Raw };

struct KdeOptions {
    double sigma = 0.06;
    int grid_points = 512;
    ModelOverlay overlay = ModelOverlay::Smoothed;
};

// Uniform grid over [0, 1].
std::vector<double> unit_grid(int points);

// Gaussian kernel density of the values on the grid, without boundary
// reflection, scaled so its trapezoidal integral over [0, 1] is 1.
std::vector<double> gaussian_kde(std::span<const double> values, std::span<const double> grid,
                                 double sigma);

// Model density of k/N: the exact pmf smoothed by the same kernel, or the
// raw pmf as a density (N+1 atoms of width 1/N), both normalised on the grid.
std::vector<double> model_density(const model::StationaryDist& pmf, std::span<const double> grid,
                                  double sigma, ModelOverlay overlay);

DensityCurve kde(const ComovementSeries& series, const DateRange& window,
                 const KdeOptions& options = {},
                 const std::optional<model::ModelParams>& overlay = std::nullopt);

double trapezoid(std::span<const double> grid, std::span<const double> values);

struct GofBin {
    int k_lo = 0, k_hi = 0;      // inclusive k range under the model's N
    double x_lo = 0.0, x_hi = 0.0;  // fraction range [x_lo, x_hi)
    long long observed = 0;
    double expected = 0.0;
};

struct GofReport {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 0.0;
    std::vector<GofBin> bins;
    int n_days = 0;
};

struct GofOptions {
    int target_bins = 20;
    double min_expected = 5.0;
    int fitted_params = 1;
    int min_days = 100;
};

// Contiguous bins of near-equal model probability, merged until every
// expected count is at least min_expected.
GofReport chi2_gof(std::span<const double> fractions, const model::ModelParams& params,
                   const GofOptions& options = {});
GofReport chi2_gof(const ComovementSeries& series, const DateRange& window,
                   const model::ModelParams& params, const GofOptions& options = {});

// Header "x,empirical,model"; the model column is empty without an overlay.
void write_density_csv(std::ostream& out, const DensityCurve& curve);
// Header "bin_lo,bin_hi,observed,expected", then a "# statistic=..,dof=..,p_value=.." line.
void write_gof_csv(std::ostream& out, const GofReport& report);

}  // namespace comove::estimation
