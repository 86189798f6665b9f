#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation; an AVX2/FMA variant is selected at runtime when the CPU
// supports it. Set COMOVE_SIMD=scalar in the environment to force the
// reference path (useful for bit-reproducing results across machines).

#include <cstddef>
#include <span>
#include <string_view>

namespace comove::kernels {

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;  // divisor n-1; 0 when n < 2
};

struct KernelTable {
    std::string_view name;

    double (*sum)(const double* x, std::size_t n);

    // Two-pass mean and unbiased variance.
    MeanVar (*mean_var)(const double* x, std::size_t n);

    // out[g] = sum_i w_i * exp(-0.5 * ((grid[g] - centers[i]) * inv_sigma)^2).
    // weights == nullptr means unit weights.
    void (*gaussian_sum)(const double* grid, std::size_t n_grid, const double* centers,
                         const double* weights, std::size_t n_centers, double inv_sigma,
                         double* out);

    // y = M x for tridiagonal M stored as sub[i] = M(i,i-1), diag[i] = M(i,i),
    // super[i] = M(i,i+1); sub[0] and super[n-1] are ignored.
    void (*tridiag_matvec)(const double* sub, const double* diag, const double* super,
                           const double* x, double* y, std::size_t n);

    // sum_{i=0}^{n-lag-1} x[i] * x[i+lag]
    double (*lagged_dot)(const double* x, std::size_t n, std::size_t lag);
};

const KernelTable& scalar_table();

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

// Table picked once per process.
const KernelTable& active_table();

inline double sum(std::span<const double> x) { return active_table().sum(x.data(), x.size()); }

inline MeanVar mean_var(std::span<const double> x) {
    return active_table().mean_var(x.data(), x.size());
}

inline void gaussian_sum(std::span<const double> grid, std::span<const double> centers,
                         std::span<const double> weights, double inv_sigma, std::span<double> out) {
    active_table().gaussian_sum(grid.data(), grid.size(), centers.data(),
                                weights.empty() ? nullptr : weights.data(), centers.size(),
                                inv_sigma, out.data());
}

inline void tridiag_matvec(std::span<const double> sub, std::span<const double> diag,
                           std::span<const double> super, std::span<const double> x,
                           std::span<double> y) {
    active_table().tridiag_matvec(sub.data(), diag.data(), super.data(), x.data(), y.data(),
                                  diag.size());
}

inline double lagged_dot(std::span<const double> x, std::size_t lag) {
    return active_table().lagged_dot(x.data(), x.size(), lag);
}

}  // namespace comove::kernels
