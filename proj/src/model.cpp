#include "comove/model.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "comove/error.hpp"
#include "comove/kernels.hpp"

namespace comove::model {
namespace {

double lgam(double x) { return boost::math::lgamma(x); }

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

void ModelParams::validate() const {
    if (n_nodes < 1) throw DomainError("n_nodes must be >= 1, got " + std::to_string(n_nodes));
    if (!finite_nonneg(u)) throw DomainError("u must be a finite non-negative real, got " + fmt(u));
    if (!finite_nonneg(d)) throw DomainError("d must be a finite non-negative real, got " + fmt(d));
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0, 1], got " + fmt(p));
}

void ModelParams::validate_strict() const {
    validate();
    if (u <= 0.0 || d <= 0.0)
        throw DomainError("stationary law requires u > 0 and d > 0 (got u=" + fmt(u) + ", d=" +
                          fmt(d) + "); with a zero strength the chain is absorbing");
}

StationaryDist::StationaryDist(int n_nodes, std::vector<double> probs,
                               std::vector<double> log_probs)
    : n_nodes_(n_nodes), probs_(std::move(probs)), log_probs_(std::move(log_probs)) {}

double StationaryDist::mean_fraction() const {
    double m = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k) m += probs_[k] * static_cast<double>(k);
    return m / n_nodes_;
}

double StationaryDist::variance_fraction() const {
    const double mean = mean_fraction() * n_nodes_;
    double v = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k) {
        const double dk = static_cast<double>(k) - mean;
        v += probs_[k] * dk * dk;
    }
    return v / (static_cast<double>(n_nodes_) * n_nodes_);
}

StationaryDist stationary_pmf(const ModelParams& params) {
    params.validate_strict();
    const int n = params.n_nodes;
    const double u = params.u;
    const double d = params.d;

    // The k-independent factors 1/Gamma(U), 1/Gamma(D) and the denominator
    // binomial drop out on renormalisation.
    std::vector<double> logw(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double up = lgam(u + k) - lgam(k + 1.0);
        const double down = lgam(d + (n - k)) - lgam(n - k + 1.0);
        logw[k] = up + down;
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(n + 1);
    for (int k = 0; k <= n; ++k) w[k] = std::exp(logw[k] - top);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    const double log_total = std::log(total);
    for (int k = 0; k <= n; ++k) {
        w[k] /= total;
        logw[k] = logw[k] - top - log_total;
    }
    return StationaryDist(n, std::move(w), std::move(logw));
}

Moments moments_of(const ModelParams& params) {
    params.validate_strict();
    Moments m;
    m.a = params.u + params.d;
    m.xi = params.u / m.a;
    m.c1 = m.xi;
    m.c2 = m.xi * (1.0 - m.xi) * (1.0 + m.a / params.n_nodes) / (m.a + 1.0);
    return m;
}

MomentInversion invert_moments(double c1, double c2, int n_nodes) {
    using Side = MomentRangeError::Side;
    if (n_nodes < 1) throw DomainError("n_nodes must be >= 1");
    if (!(c1 > 0.0 && c1 < 1.0))
        throw MomentRangeError(Side::MeanOutOfRange, c2, "mean c1=" + fmt(c1) + " outside (0, 1)");
    const double v = c1 * (1.0 - c1);
    const double floor = v / n_nodes;
    if (!(c2 < v))
        throw MomentRangeError(Side::VarianceTooLarge, c2,
                               "variance too large: c2=" + fmt(c2) + " >= c1(1-c1)=" + fmt(v) +
                                   " (beyond the U,D->0 limit)");
    if (!(c2 > floor))
        throw MomentRangeError(Side::VarianceTooSmall, c2,
                               "variance too small: c2=" + fmt(c2) + " <= c1(1-c1)/N=" +
                                   fmt(floor) + " (external influence beyond model range)");
    return MomentInversion{c1, (v - c2) / (c2 - floor)};
}

EvolutionMatrix::EvolutionMatrix(const ModelParams& params) : params_(params) {
    params.validate();
    const int n = params.n_nodes;
    const double u = params.u;
    const double d = params.d;
    const double denom_tail = n + d + u - 1.0;
    if (denom_tail == 0.0)
        throw DegenerateError("N + D + U = 1 makes the evolution matrix normalisation vanish");
    scale_ = (1.0 - params.p) / (n * denom_tail);

    const std::size_t dim = static_cast<std::size_t>(n) + 1;
    a_sub_.assign(dim, 0.0);
    a_diag_.assign(dim, 0.0);
    a_super_.assign(dim, 0.0);
    for (int m = 0; m <= n; ++m) {
        a_diag_[m] = 2.0 * m * (n - m) + u * (n - m) + d * m;
        if (m < n) a_super_[m] = -(m + 1.0) * (n + d - m - 1.0);
        if (m > 0) a_sub_[m] = -(n - m + 1.0) * (u + m - 1.0);
    }
    t_sub_.resize(dim);
    t_diag_.resize(dim);
    t_super_.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        t_sub_[i] = -scale_ * a_sub_[i];
        t_diag_[i] = 1.0 - scale_ * a_diag_[i];
        t_super_[i] = -scale_ * a_super_[i];
    }
}

double EvolutionMatrix::t_at(std::size_t row, std::size_t col) const {
    if (row == col) return t_diag_[row];
    if (col + 1 == row) return t_sub_[row];
    if (row + 1 == col) return t_super_[row];
    return 0.0;
}

double EvolutionMatrix::a_at(std::size_t row, std::size_t col) const {
    if (row == col) return a_diag_[row];
    if (col + 1 == row) return a_sub_[row];
    if (row + 1 == col) return a_super_[row];
    return 0.0;
}

std::vector<double> EvolutionMatrix::apply(std::span<const double> x) const {
    std::vector<double> y(dimension());
    kernels::tridiag_matvec(t_sub_, t_diag_, t_super_, x, y);
    return y;
}

std::vector<double> EvolutionMatrix::dense() const {
    const std::size_t dim = dimension();
    std::vector<double> m(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        m[i * dim + i] = t_diag_[i];
        if (i > 0) m[i * dim + i - 1] = t_sub_[i];
        if (i + 1 < dim) m[i * dim + i + 1] = t_super_[i];
    }
    return m;
}

EvolutionMatrix evolution_matrix(const ModelParams& params) { return EvolutionMatrix(params); }

std::vector<double> analytic_eigenvalues(const ModelParams& params) {
    params.validate();
    const int n = params.n_nodes;
    const double denom_tail = n + params.d + params.u - 1.0;
    if (denom_tail == 0.0)
        throw DegenerateError("N + D + U = 1 makes the evolution matrix normalisation vanish");
    const double scale = (1.0 - params.p) / (n * denom_tail);
    std::vector<double> lambda(n + 1);
    for (int r = 0; r <= n; ++r)
        lambda[r] = 1.0 - scale * r * (r - 1.0 + params.d + params.u);
    return lambda;
}

double Spectrum::max_eigenvalue_mismatch() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < eigenvalues.size(); ++r)
        worst = std::max(worst, std::abs(eigenvalues[r] - numeric_eigenvalues[r]));
    return worst;
}

Spectrum eigenvalues(const ModelParams& params) {
    params.validate_strict();
    const EvolutionMatrix t(params);
    const StationaryDist rho = stationary_pmf(params);
    const std::size_t dim = t.dimension();

    // Detailed balance makes D^{-1/2} T D^{1/2} (D = diag rho) symmetric with
    // off-diagonal sqrt(T(i,i+1) T(i+1,i)).
    Eigen::VectorXd diag(dim);
    Eigen::VectorXd offdiag(dim > 1 ? dim - 1 : 0);
    for (std::size_t i = 0; i < dim; ++i) diag[i] = t.t_diag()[i];
    for (std::size_t i = 0; i + 1 < dim; ++i)
        offdiag[i] = std::sqrt(t.t_super()[i] * t.t_sub()[i + 1]);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, offdiag, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success)
        throw NumericError("symmetric tridiagonal eigensolver did not converge");

    Spectrum s;
    s.dim = dim;
    s.eigenvalues = analytic_eigenvalues(params);
    s.numeric_eigenvalues.resize(dim);
    s.right.resize(dim * dim);
    s.left.resize(dim * dim);

    std::vector<double> half_log(dim);
    for (std::size_t k = 0; k < dim; ++k) half_log[k] = 0.5 * rho.log_probs()[k];

    const auto& vals = solver.eigenvalues();
    const auto& vecs = solver.eigenvectors();
    for (std::size_t r = 0; r < dim; ++r) {
        const Eigen::Index col = static_cast<Eigen::Index>(dim - 1 - r);  // ascending -> descending
        s.numeric_eigenvalues[r] = vals[col];
        // Fix the sign: r = 0 has a positive Perron vector; otherwise make the
        // largest-magnitude component positive.
        Eigen::Index pivot = 0;
        vecs.col(col).cwiseAbs().maxCoeff(&pivot);
        const double sign = (r == 0 ? vecs.col(col).sum() : vecs(pivot, col)) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double v = sign * vecs(static_cast<Eigen::Index>(k), col);
            s.right[r * dim + k] = v * std::exp(half_log[k]);
            s.left[r * dim + k] = v * std::exp(-half_log[k]);
        }
    }
    return s;
}

std::vector<double> dense_eigenvalues(const EvolutionMatrix& matrix) {
    const std::size_t dim = matrix.dimension();
    const std::vector<double> dense = matrix.dense();
    Eigen::MatrixXd m(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) m(i, j) = dense[i * dim + j];
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
    if (solver.info() != Eigen::Success) throw NumericError("dense eigensolver did not converge");
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = solver.eigenvalues()[i].real();
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

namespace {

void check_states(int from_state, int to_state, long long t, const ModelParams& params) {
    params.validate();
    if (from_state < 0 || from_state > params.n_nodes || to_state < 0 ||
        to_state > params.n_nodes)
        throw ValidationError("states must lie in [0, N]");
    if (t < 0) throw ValidationError("time must be non-negative");
}

}  // namespace

double transition_probability_iterated(int from_state, int to_state, long long t,
                                       const ModelParams& params) {
    check_states(from_state, to_state, t, params);
    const EvolutionMatrix matrix(params);
    const std::size_t dim = matrix.dimension();

    if (static_cast<double>(t) * static_cast<double>(dim) <= 1e8) {
        std::vector<double> x(dim, 0.0), y(dim);
        x[from_state] = 1.0;
        for (long long step = 0; step < t; ++step) {
            kernels::tridiag_matvec(matrix.t_sub(), matrix.t_diag(), matrix.t_super(), x, y);
            x.swap(y);
        }
        return x[to_state];
    }

    // Long horizons: binary powering of the dense matrix.
    const std::vector<double> dense = matrix.dense();
    Eigen::MatrixXd base(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) base(i, j) = dense[i * dim + j];
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(dim, dim);
    for (long long e = t; e > 0; e >>= 1) {
        if (e & 1) result = base * result;
        base = base * base;
    }
    return result(to_state, from_state);
}

TransitionProbability transition_probability(int from_state, int to_state, long long t,
                                              const ModelParams& params) {
    check_states(from_state, to_state, t, params);
    TransitionProbability out;
    if (t == 0) {
        out.value = from_state == to_state ? 1.0 : 0.0;
        return out;
    }

    auto fallback = [&](std::string why) {
        out.spectral = false;
        out.diagnostic = std::move(why);
        out.value = transition_probability_iterated(from_state, to_state, t, params);
        return out;
    };

    if (params.u <= 0.0 || params.d <= 0.0)
        return fallback("zero frozen strength: chain is absorbing, no stationary symmetrisation");

    Spectrum spectrum;
    try {
        spectrum = eigenvalues(params);
    } catch (const Error& e) {
        return fallback(std::string("eigendecomposition failed: ") + e.what());
    }
    const double mismatch = spectrum.max_eigenvalue_mismatch();
    if (!(mismatch <= 1e-8))
        return fallback("numeric eigenvalues deviate from the analytic spectrum by " + fmt(mismatch));

    double value = 0.0;
    for (std::size_t r = 0; r < spectrum.dim; ++r)
        value += spectrum.left_at(r, from_state) * spectrum.right_at(r, to_state) *
                 std::pow(spectrum.eigenvalues[r], static_cast<double>(t));
    if (!std::isfinite(value) || value < -1e-9 || value > 1.0 + 1e-9)
        return fallback("spectral sum " + fmt(value) + " outside [0, 1]");
    out.value = value;
    return out;
}

EffectiveStrengths effective_params(double u, double d, const TopologySpec& topology) {
    if (!finite_nonneg(u) || !finite_nonneg(d))
        throw DomainError("frozen strengths must be finite and non-negative");
    if (topology.n_nodes < 1) throw ValidationError("topology has no nodes");
    if (topology.kind == TopologyKind::Full) return {u, d};
    if (!(topology.k_av > 0.0))
        throw ValidationError("average degree is zero: variable nodes have no neighbours");
    const double f = (topology.n_nodes - 1.0) / topology.k_av;
    return {f * u, f * d};
}

EffectiveStrengths wright_fisher_map(const WrightFisherParams& wf) {
    if (wf.n_pop < 1) throw DomainError("population size must be >= 1");
    if (!(wf.mu1 >= 0.0 && wf.mu2 >= 0.0) || !std::isfinite(wf.mu1) || !std::isfinite(wf.mu2))
        throw DomainError("mutation probabilities must be non-negative");
    if (wf.mu1 + wf.mu2 >= 1.0) throw DomainError("mu1 + mu2 must be < 1");
    if (wf.mu1 >= 0.5 || wf.mu2 >= 0.5) throw DomainError("mutation probabilities must be < 1/2");
    const double denom = 1.0 - wf.mu1 - wf.mu2;
    return {2.0 * wf.mu2 * (wf.n_pop - 1.0) / denom, 2.0 * wf.mu1 * (wf.n_pop - 1.0) / denom};
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ValidationError("total_variation: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

}  // namespace comove::model
