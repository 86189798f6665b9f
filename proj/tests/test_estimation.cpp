#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "comove/error.hpp"
#include "comove/estimation.hpp"
#include "support.hpp"

using namespace comove;
using namespace comove::estimation;
using comove::testing::iid_fractions;
using comove::testing::iid_series;

namespace {

ComovementSeries series_from(const std::vector<double>& fractions, int n) {
    std::vector<DayCount> days;
    Date d(2000, 1, 3);
    for (double x : fractions) {
        while (!d.is_weekday()) d = d.plus_days(1);
        days.push_back({d, static_cast<int>(std::lround(x * n)), n});
        d = d.plus_days(1);
    }
    return ComovementSeries(std::move(days));
}

DateRange span_of(const ComovementSeries& s) { return {s.front().date, s.back().date.plus_days(1)}; }

FitOptions quick_fit(std::uint64_t seed, int n_boot = 200) {
    FitOptions o;
    o.bootstrap.n_boot = n_boot;
    o.bootstrap.seed = seed;
    return o;
}

}  // namespace

TEST(PositiveFraction, CountsAndZeroExclusion) {
    const Date d1(2008, 10, 9), d2(2008, 10, 10);
    const std::vector<ReturnRecord> recs = {
        {d1, "A", 0.01}, {d1, "B", -0.02}, {d1, "C", 0.003},
        {d2, "A", 0.01}, {d2, "B", 0.0},   {d2, "C", -0.01},
    };
    const auto r = positive_fraction(recs, {1});
    ASSERT_EQ(r.series.size(), 2u);
    EXPECT_EQ(r.series.entries()[0].k_up, 2);
    EXPECT_EQ(r.series.entries()[0].n_day, 3);
    EXPECT_EQ(r.series.entries()[1].k_up, 1);
    EXPECT_EQ(r.series.entries()[1].n_day, 2);
    EXPECT_EQ(r.zero_returns, 1u);
}

TEST(PositiveFraction, SparseDaysAreDropped) {
    std::vector<ReturnRecord> recs;
    for (int i = 0; i < 100; ++i) recs.push_back({Date(2008, 10, 9), "S" + std::to_string(i), 0.01});
    for (int i = 0; i < 150; ++i) recs.push_back({Date(2008, 10, 10), "S" + std::to_string(i), -0.01});
    const auto r = positive_fraction(recs);
    EXPECT_EQ(r.dropped_days, 1u);
    ASSERT_EQ(r.series.size(), 1u);
    EXPECT_EQ(r.series.front().date, Date(2008, 10, 10));
}

TEST(PositiveFraction, Errors) {
    EXPECT_THROW(positive_fraction(std::vector<ReturnRecord>{}), ValidationError);
    const std::vector<ReturnRecord> dup = {{Date(2008, 10, 9), "AAPL", 0.01}, {Date(2008, 10, 9), "AAPL", 0.02}};
    EXPECT_THROW(positive_fraction(dup, {1}), ValidationError);
}

TEST(SampleVariance, TwoPointsAndDivisor) {
    const std::vector<double> xy = {0.3, 0.7};
    EXPECT_NEAR(sample_variance(xy), 0.4 * 0.4 / 2, 1e-16);
    const std::vector<double> x = {1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(sample_variance(x), 5.0 / 3.0);
    EXPECT_THROW(sample_variance(std::vector<double>{1.0}), FitError);
}

TEST(FitSymmetric, ConstantSeriesFailsWithVarianceTooSmall) {
    const auto s = series_from(std::vector<double>(250, 0.5), 1000);
    try {
        fit_symmetric(s, span_of(s), quick_fit(1));
        FAIL();
    } catch (const FitError& e) {
        EXPECT_EQ(e.c2(), 0.0);
    }
}

TEST(FitSymmetric, TooFewDaysIsAFitError) {
    Rng rng = make_stream(1, 0);
    const auto s = iid_series({1000, 2.0, 2.0, 0.0}, 150, rng);
    EXPECT_THROW(fit_symmetric(s, span_of(s), quick_fit(1)), FitError);
    EXPECT_THROW(fit_symmetric(s, {Date(1990, 1, 1), Date(1990, 2, 1)}, quick_fit(1)), FitError);
}

TEST(FitSymmetric, UniformFractionsGiveCriticalValue) {
    // Every k in 0..500 equally often: the critical law.
    std::vector<double> fr;
    for (int rep = 0; rep < 20; ++rep)
        for (int k = 0; k <= 500; ++k) fr.push_back(k / 500.0);
    Rng rng = make_stream(2, 0);
    std::shuffle(fr.begin(), fr.end(), rng);
    const auto s = series_from(fr, 500);
    const auto fit = fit_symmetric(s, span_of(s), quick_fit(2, 50));
    EXPECT_NEAR(fit.u_eq_d, 1.0, 0.01);
    EXPECT_EQ(fit.n_ref, 500);
}

TEST(FitSymmetric, RecoversTruthWithCalibratedErrors) {
    Rng rng = make_stream(3, 0);
    const model::ModelParams truth{1000, 5.79, 5.79, 0.0};
    int covered = 0;
    const int trials = 200;
    double bias = 0.0;
    for (int t = 0; t < trials; ++t) {
        const auto s = iid_series(truth, 252, rng);
        const auto fit = fit_symmetric(s, span_of(s), quick_fit(t + 1));
        covered += std::abs(fit.u_eq_d - truth.u) <= 2 * fit.std_error;
        bias += (fit.u_eq_d - truth.u) / trials;
        EXPECT_EQ(fit.n_days, 252);
    }
    EXPECT_GE(covered, 0.9 * trials);
    EXPECT_LT(std::abs(bias) / truth.u, 0.05);
}

TEST(FitSymmetric, InvariantToDayOrder) {
    Rng rng = make_stream(4, 0);
    auto fr = iid_fractions({800, 2.0, 2.0, 0.0}, 300, rng);
    const auto a = series_from(fr, 800);
    std::reverse(fr.begin(), fr.end());
    const auto b = series_from(fr, 800);
    EXPECT_NEAR(fit_symmetric(a, span_of(a), quick_fit(1, 20)).u_eq_d,
                fit_symmetric(b, span_of(b), quick_fit(1, 20)).u_eq_d, 1e-12);
}

TEST(FitSymmetric, ReferenceNIsWindowMedian) {
    std::vector<DayCount> days;
    Date d(2001, 1, 1);
    for (int i = 0; i < 5; ++i) days.push_back({d.plus_days(i), 10, 100 + 10 * i});
    EXPECT_EQ(reference_n(days), 120);
    days.pop_back();
    EXPECT_EQ(reference_n(days), 110);
}

TEST(FitFree, RecoversAsymmetricTruth) {
    Rng rng = make_stream(5, 0);
    const int trials = 50;
    int covered = 0;
    for (int t = 0; t < trials; ++t) {
        const auto s = iid_series({1000, 6.0, 2.0, 0.0}, 1000, rng);
        const auto fit = fit_free(s, span_of(s), quick_fit(t + 5));
        covered += std::abs(fit.xi - 0.75) <= 2 * fit.xi_se;
        EXPECT_NEAR(fit.u, fit.xi * fit.a, 1e-12);
        EXPECT_NEAR(fit.d, (1 - fit.xi) * fit.a, 1e-12);
    }
    EXPECT_GE(covered, 0.9 * trials);
}

TEST(FitFree, SymmetricDataCoversHalfAndAgreesWithSymmetricFit) {
    Rng rng = make_stream(6, 0);
    const int trials = 100;
    int covered = 0, agree = 0;
    for (int t = 0; t < trials; ++t) {
        const auto s = iid_series({1000, 2.21, 2.21, 0.0}, 252, rng);
        const auto ff = fit_free(s, span_of(s), quick_fit(t + 7));
        const auto fs = fit_symmetric(s, span_of(s), quick_fit(t + 7));
        covered += std::abs(ff.xi - 0.5) < 2 * ff.xi_se;
        agree += std::abs(ff.a - 2 * fs.u_eq_d) < 2 * ff.a_se;
    }
    EXPECT_GE(covered, 0.9 * trials);
    EXPECT_GE(agree, 0.9 * trials);
}

TEST(Bootstrap, MeanStderrMatchesClassicalValue) {
    Rng rng = make_stream(7, 0);
    const int n = 400, meta = 200;
    const double sigma = std::sqrt(1.0 / 12.0);
    double mean_se = 0.0;
    const Estimator mean = [](std::span<const double> x) {
        return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    };
    for (int m = 0; m < meta; ++m) {
        std::vector<double> x(n);
        for (auto& v : x) v = uniform01(rng);
        mean_se += bootstrap_stderr(x, mean, {500, 20, static_cast<std::uint64_t>(m), false}) / meta;
    }
    EXPECT_NEAR(mean_se, sigma / std::sqrt(n), 0.15 * sigma / std::sqrt(n));
}

TEST(Bootstrap, ValidatesArgumentsAndIsDeterministic) {
    std::vector<double> x(100);
    std::iota(x.begin(), x.end(), 0.0);
    const Estimator mean = [](std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    EXPECT_THROW(bootstrap_stderr(x, mean, {1, 20, 1, false}), ValidationError);
    EXPECT_THROW(bootstrap_stderr(x, mean, {100, 100, 1, false}), ValidationError);
    EXPECT_THROW(bootstrap_stderr(std::span<const double>(x).first(30), mean, {100, 20, 1, false}), ValidationError);
    EXPECT_EQ(bootstrap_stderr(x, mean, {100, 20, 9, false}), bootstrap_stderr(x, mean, {100, 20, 9, false}));
    EXPECT_NE(bootstrap_stderr(x, mean, {100, 20, 9, false}), bootstrap_stderr(x, mean, {100, 20, 10, false}));
}

TEST(Bootstrap, ExcessiveFailuresAreReported) {
    std::vector<double> x(100, 0.5);
    x[0] = 0.4;
    const Estimator fails_often = [](std::span<const double> v) {
        return symmetric_estimate(v, 1000);  // mostly constant resamples
    };
    EXPECT_THROW(bootstrap_stderr(x, fails_often, {200, 20, 1, false}), FitError);
}

TEST(Kde, SingleObservationIsGaussianBump) {
    const auto grid = unit_grid(513);
    const std::vector<double> one = {0.5};
    const auto f = gaussian_kde(one, grid, 0.06);
    const auto peak = std::max_element(f.begin(), f.end()) - f.begin();
    EXPECT_EQ(peak, 256);
    for (int i = 0; i < 513; ++i) EXPECT_NEAR(f[i], f[512 - i], 1e-12);
    const double norm = 1.0 / (0.06 * std::sqrt(2 * M_PI));
    EXPECT_NEAR(f[256], norm, 1e-3 * norm);
    EXPECT_NEAR(f[256 + 31] / f[256], std::exp(-0.5 * std::pow(grid[287] - 0.5, 2) / 0.0036), 1e-9);
}

TEST(Kde, UniformDataIsFlatInsideAndIntegratesToOne) {
    std::vector<double> fr;
    for (int k = 0; k <= 2000; ++k) fr.push_back(k / 2000.0);
    const auto s = series_from(fr, 2000);
    const auto curve = kde(s, span_of(s));
    EXPECT_NEAR(trapezoid(curve.grid, curve.empirical), 1.0, 1e-3);
    double lo = 1e9, hi = 0.0;
    for (std::size_t i = 0; i < curve.grid.size(); ++i)
        if (curve.grid[i] >= 0.18 && curve.grid[i] <= 0.82) {
            lo = std::min(lo, curve.empirical[i]);
            hi = std::max(hi, curve.empirical[i]);
        }
    EXPECT_LT((hi - lo) / lo, 0.05);
    EXPECT_LT(curve.empirical.front(), 0.6 * lo);  // edge roll-off, no reflection
}

TEST(Kde, CriticalModelOverlayIsFlatInside) {
    Rng rng = make_stream(9, 0);
    const auto s = iid_series({500, 1.0, 1.0, 0.0}, 300, rng);
    const auto curve = kde(s, span_of(s), {}, model::ModelParams{500, 1.0, 1.0, 0.0});
    ASSERT_TRUE(curve.model.has_value());
    EXPECT_NEAR(trapezoid(curve.grid, *curve.model), 1.0, 1e-3);
    double lo = 1e9, hi = 0.0;
    for (std::size_t i = 0; i < curve.grid.size(); ++i)
        if (curve.grid[i] >= 0.18 && curve.grid[i] <= 0.82) {
            lo = std::min(lo, (*curve.model)[i]);
            hi = std::max(hi, (*curve.model)[i]);
        }
    EXPECT_LT((hi - lo) / lo, 0.01);
    for (double v : curve.empirical) EXPECT_GE(v, 0.0);

    const auto raw = kde(s, span_of(s), {0.06, 512, ModelOverlay::Raw}, model::ModelParams{500, 1.0, 1.0, 0.0});
    EXPECT_NEAR(trapezoid(raw.grid, *raw.model), 1.0, 1e-3);
}

TEST(Kde, DensityCsvLayout) {
    DensityCurve c{{0.0, 1.0}, {1.0, 1.0}, std::nullopt};
    std::ostringstream a;
    write_density_csv(a, c);
    EXPECT_EQ(a.str(), "x,empirical,model\n0,1,\n1,1,\n");
    c.model = std::vector<double>{0.5, 1.5};
    std::ostringstream b;
    write_density_csv(b, c);
    EXPECT_EQ(b.str(), "x,empirical,model\n0,1,0.5\n1,1,1.5\n");
}

TEST(ChiSquare, BinsAreConsistent) {
    Rng rng = make_stream(10, 0);
    const model::ModelParams p{1000, 2.0, 2.0, 0.0};
    const auto fr = iid_fractions(p, 252, rng);
    const auto r = chi2_gof(fr, p);
    double expected = 0.0;
    long long observed = 0;
    for (const auto& b : r.bins) {
        expected += b.expected;
        observed += b.observed;
        EXPECT_GE(b.expected, 5.0);
    }
    EXPECT_NEAR(expected, 252.0, 1e-9);
    EXPECT_EQ(observed, 252);
    EXPECT_EQ(r.dof, static_cast<int>(r.bins.size()) - 2);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
    for (std::size_t i = 1; i < r.bins.size(); ++i) EXPECT_EQ(r.bins[i].k_lo, r.bins[i - 1].k_hi + 1);
}

TEST(ChiSquare, PValuesOfFittedModelAreUniform) {
    Rng rng = make_stream(11, 0);
    const model::ModelParams truth{1000, 2.0, 2.0, 0.0};
    std::vector<double> pv;
    for (int t = 0; t < 200; ++t) {
        const auto fr = iid_fractions(truth, 252, rng);
        const double u = symmetric_estimate(fr, 1000);
        pv.push_back(chi2_gof(fr, {1000, u, u, 0.0}).p_value);
    }
    EXPECT_LT(comove::testing::ks_uniform(pv), 0.1);
}

TEST(ChiSquare, DetectsWrongModel) {
    Rng rng = make_stream(12, 0);
    const auto fr = iid_fractions({1000, 10.0, 10.0, 0.0}, 252, rng);
    EXPECT_LT(chi2_gof(fr, {1000, 1.0, 1.0, 0.0}).p_value, 0.01);
}

TEST(ChiSquare, Errors) {
    std::vector<double> fr(50, 0.5);
    EXPECT_THROW(chi2_gof(fr, {1000, 2.0, 2.0, 0.0}), ValidationError);
    std::vector<double> few(120, 0.5);
    GofOptions o;
    o.min_days = 10;
    o.min_expected = 100.0;  // at most one bin can hold 100 expected days
    EXPECT_THROW(chi2_gof(few, {1000, 2.0, 2.0, 0.0}, o), ValidationError);
}

TEST(ChiSquare, CsvSummaryLine) {
    GofReport r;
    r.bins = {{0, 4, 0.0, 0.45, 3, 2.5}};
    r.statistic = 0.1;
    r.dof = 1;
    r.p_value = 0.75;
    r.n_days = 3;
    std::ostringstream out;
    write_gof_csv(out, r);
    EXPECT_EQ(out.str(),
              "bin_lo,bin_hi,observed,expected\n0,0.45000000000000001,3,2.5\n"
              "# statistic=0.10000000000000001,dof=1,p_value=0.75,n_days=3\n");
}
