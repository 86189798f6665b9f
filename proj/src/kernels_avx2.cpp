// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "kernels_impl.hpp"

#include <immintrin.h>

#include <cmath>

namespace comove::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(x) for x <= 0. Cody-Waite reduction x = n ln2 + r, |r| <= ln2/2,
// degree-12 Taylor polynomial, then scale by 2^n through the exponent bits.
// Inputs below -708 flush to zero.
inline __m256d exp_nonpositive(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d floor_arg = _mm256_set1_pd(-708.0);

    const __m256d underflow = _mm256_cmp_pd(x, floor_arg, _CMP_LT_OQ);
    x = _mm256_max_pd(x, floor_arg);

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
    r = _mm256_fnmadd_pd(n, ln2_lo, r);

    static constexpr double c[] = {
        1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0, 1.0 / 40320.0,
        1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,     1.0 / 6.0,
        0.5,               1.0,              1.0};
    __m256d p = _mm256_set1_pd(c[0]);
    for (int i = 1; i < 13; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[i]));

    const __m128i n32 = _mm256_cvtpd_epi32(n);
    const __m256i n64 = _mm256_cvtepi32_epi64(n32);
    const __m256i bits = _mm256_slli_epi64(n64, 52);
    const __m256d scaled =
        _mm256_castsi256_pd(_mm256_add_epi64(_mm256_castpd_si256(p), bits));
    return _mm256_andnot_pd(underflow, scaled);
}

}  // namespace

double sum(const double* x, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
        a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) s += x[i];
    return s;
}

MeanVar mean_var(const double* x, std::size_t n) {
    MeanVar r;
    if (n == 0) return r;
    r.mean = sum(x, n) / static_cast<double>(n);
    if (n < 2) return r;
    const __m256d m = _mm256_set1_pd(r.mean);
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), m);
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), m);
        a0 = _mm256_fmadd_pd(d0, d0, a0);
        a1 = _mm256_fmadd_pd(d1, d1, a1);
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), m);
        a0 = _mm256_fmadd_pd(d0, d0, a0);
    }
    double ss = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) {
        const double d = x[i] - r.mean;
        ss += d * d;
    }
    r.variance = ss / static_cast<double>(n - 1);
    return r;
}

void gaussian_sum(const double* grid, std::size_t n_grid, const double* centers,
                  const double* weights, std::size_t n_centers, double inv_sigma, double* out) {
    const __m256d s = _mm256_set1_pd(inv_sigma);
    const __m256d minus_half = _mm256_set1_pd(-0.5);
    std::size_t g = 0;
    // Four grid points per lane group; centers broadcast.
    for (; g + 4 <= n_grid; g += 4) {
        const __m256d xg = _mm256_loadu_pd(grid + g);
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t i = 0; i < n_centers; ++i) {
            const __m256d z = _mm256_mul_pd(_mm256_sub_pd(xg, _mm256_set1_pd(centers[i])), s);
            const __m256d e = exp_nonpositive(_mm256_mul_pd(minus_half, _mm256_mul_pd(z, z)));
            acc = weights ? _mm256_fmadd_pd(_mm256_set1_pd(weights[i]), e, acc)
                          : _mm256_add_pd(acc, e);
        }
        _mm256_storeu_pd(out + g, acc);
    }
    if (g < n_grid)
        scalar::gaussian_sum(grid + g, n_grid - g, centers, weights, n_centers, inv_sigma, out + g);
}

void tridiag_matvec(const double* sub, const double* diag, const double* super, const double* x,
                    double* y, std::size_t n) {
    if (n < 6) {
        scalar::tridiag_matvec(sub, diag, super, x, y, n);
        return;
    }
    y[0] = diag[0] * x[0] + super[0] * x[1];
    std::size_t i = 1;
    for (; i + 4 < n; i += 4) {
        __m256d v = _mm256_mul_pd(_mm256_loadu_pd(sub + i), _mm256_loadu_pd(x + i - 1));
        v = _mm256_fmadd_pd(_mm256_loadu_pd(diag + i), _mm256_loadu_pd(x + i), v);
        v = _mm256_fmadd_pd(_mm256_loadu_pd(super + i), _mm256_loadu_pd(x + i + 1), v);
        _mm256_storeu_pd(y + i, v);
    }
    for (; i + 1 < n; ++i) y[i] = sub[i] * x[i - 1] + diag[i] * x[i] + super[i] * x[i + 1];
    y[n - 1] = sub[n - 1] * x[n - 2] + diag[n - 1] * x[n - 1];
}

double lagged_dot(const double* x, std::size_t n, std::size_t lag) {
    if (lag >= n) return 0.0;
    const std::size_t m = n - lag;
    const double* y = x + lag;
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= m; i += 8) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
    }
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < m; ++i) s += x[i] * y[i];
    return s;
}

}  // namespace comove::kernels::avx2
