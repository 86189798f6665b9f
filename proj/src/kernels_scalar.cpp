#include "kernels_impl.hpp"

#include <cmath>

namespace comove::kernels::scalar {

double sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

MeanVar mean_var(const double* x, std::size_t n) {
    MeanVar r;
    if (n == 0) return r;
    r.mean = sum(x, n) / static_cast<double>(n);
    if (n < 2) return r;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - r.mean;
        ss += d * d;
    }
    r.variance = ss / static_cast<double>(n - 1);
    return r;
}

void gaussian_sum(const double* grid, std::size_t n_grid, const double* centers,
                  const double* weights, std::size_t n_centers, double inv_sigma, double* out) {
    for (std::size_t g = 0; g < n_grid; ++g) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n_centers; ++i) {
            const double z = (grid[g] - centers[i]) * inv_sigma;
            const double w = weights ? weights[i] : 1.0;
            acc += w * std::exp(-0.5 * z * z);
        }
        out[g] = acc;
    }
}

void tridiag_matvec(const double* sub, const double* diag, const double* super, const double* x,
                    double* y, std::size_t n) {
    if (n == 0) return;
    if (n == 1) {
        y[0] = diag[0] * x[0];
        return;
    }
    y[0] = diag[0] * x[0] + super[0] * x[1];
    for (std::size_t i = 1; i + 1 < n; ++i)
        y[i] = sub[i] * x[i - 1] + diag[i] * x[i] + super[i] * x[i + 1];
    y[n - 1] = sub[n - 1] * x[n - 2] + diag[n - 1] * x[n - 1];
}

double lagged_dot(const double* x, std::size_t n, std::size_t lag) {
    if (lag >= n) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += x[i] * x[i + lag];
    return s;
}

}  // namespace comove::kernels::scalar
