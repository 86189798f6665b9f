#pragma once

#include "comove/kernels.hpp"

namespace comove::kernels::scalar {
double sum(const double* x, std::size_t n);
MeanVar mean_var(const double* x, std::size_t n);
void gaussian_sum(const double* grid, std::size_t n_grid, const double* centers,
                  const double* weights, std::size_t n_centers, double inv_sigma, double* out);
void tridiag_matvec(const double* sub, const double* diag, const double* super, const double* x,
                    double* y, std::size_t n);
double lagged_dot(const double* x, std::size_t n, std::size_t lag);
}  // namespace comove::kernels::scalar

namespace comove::kernels::avx2 {
double sum(const double* x, std::size_t n);
MeanVar mean_var(const double* x, std::size_t n);
void gaussian_sum(const double* grid, std::size_t n_grid, const double* centers,
                  const double* weights, std::size_t n_centers, double inv_sigma, double* out);
void tridiag_matvec(const double* sub, const double* diag, const double* super, const double* x,
                    double* y, std::size_t n);
double lagged_dot(const double* x, std::size_t n, std::size_t lag);
}  // namespace comove::kernels::avx2
