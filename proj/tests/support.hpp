#pragma once

// Shared test helpers: exact samplers from a pmf, synthetic series and a
// Kolmogorov-Smirnov distance against the uniform law.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "comove/model.hpp"
#include "comove/rng.hpp"
#include "comove/series.hpp"

namespace comove::testing {

// Inverse-CDF sampling of k from an exact pmf.
class PmfSampler {
public:
    explicit PmfSampler(const model::StationaryDist& dist) : cdf_(dist.size()) {
        std::partial_sum(dist.probs().begin(), dist.probs().end(), cdf_.begin());
        cdf_.back() = 1.0;
    }
    int operator()(Rng& rng) const {
        const double u = uniform01(rng);
        return static_cast<int>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    }

private:
    std::vector<double> cdf_;
};

// `days` consecutive weekdays from `start`, k drawn i.i.d. from the pmf.
inline ComovementSeries iid_series(const model::ModelParams& params, int days, Rng& rng,
                                   Date start = Date(2000, 1, 3)) {
    const PmfSampler sample(model::stationary_pmf(params));
    std::vector<DayCount> out;
    Date d = start;
    while (static_cast<int>(out.size()) < days) {
        if (d.is_weekday()) out.push_back({d, sample(rng), params.n_nodes});
        d = d.plus_days(1);
    }
    return ComovementSeries(std::move(out));
}

inline std::vector<double> iid_fractions(const model::ModelParams& params, int days, Rng& rng) {
    const PmfSampler sample(model::stationary_pmf(params));
    std::vector<double> out(days);
    for (auto& x : out) x = static_cast<double>(sample(rng)) / params.n_nodes;
    return out;
}

// sup |F_n(x) - x| for samples on [0, 1].
inline double ks_uniform(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        d = std::max(d, (i + 1) / n - values[i]);
        d = std::max(d, values[i] - i / n);
    }
    return d;
}

// sup (F_n(x) - x): how far the p-values are from being conservative.
inline double ks_uniform_upper(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) d = std::max(d, (i + 1) / n - values[i]);
    return d;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::path(COMOVE_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace comove::testing
