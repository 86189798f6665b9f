#pragma once

// Exact results for the fully connected copy model with U up-frozen and D
// down-frozen influence nodes: stationary law of the up-count, its moments,
// the tridiagonal evolution matrix, spectrum and transition probabilities.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "comove/topology.hpp"

namespace comove::model {

struct ModelParams {
    int n_nodes = 1;  // N variable nodes
    double u = 1.0;   // up-frozen strength, real via analytic continuation
    double d = 1.0;   // down-frozen strength
    double p = 0.0;   // probability a selected node keeps its state

    // Throws DomainError unless n_nodes >= 1, u, d >= 0 (finite), 0 <= p <= 1.
    void validate() const;
    // validate() plus u > 0 and d > 0.
    void validate_strict() const;
};

class StationaryDist {
public:
    StationaryDist(int n_nodes, std::vector<double> probs, std::vector<double> log_probs);

    int n_nodes() const { return n_nodes_; }
    std::span<const double> probs() const { return probs_; }
    // Unnormalised-then-shifted log weights; log_probs()[k] = log(probs()[k]).
    std::span<const double> log_probs() const { return log_probs_; }
    double operator[](std::size_t k) const { return probs_[k]; }
    std::size_t size() const { return probs_.size(); }

    // Mean and variance of the fraction k/N by direct summation.
    double mean_fraction() const;
    double variance_fraction() const;

private:
    int n_nodes_;
    std::vector<double> probs_;
    std::vector<double> log_probs_;
};

// rho(k) = C(U+k-1, k) C(N+D-k-1, N-k) / C(N+D+U-1, N), k = 0..N.
StationaryDist stationary_pmf(const ModelParams& params);

struct Moments {
    double c1 = 0.0;  // mean of k/N
    double c2 = 0.0;  // variance of k/N
    double xi = 0.0;  // U / (U + D)
    double a = 0.0;   // U + D
};

Moments moments_of(const ModelParams& params);

struct MomentInversion {
    double xi = 0.0;
    double a = 0.0;
    double u() const { return xi * a; }
    double d() const { return (1.0 - xi) * a; }
};

// Solves c1 = xi, c2 = xi(1-xi)(1+a/N)/(a+1) for (xi, a). Throws
// MomentRangeError when c2 lies outside (c1(1-c1)/N, c1(1-c1)).
MomentInversion invert_moments(double c1, double c2, int n_nodes);

// Tridiagonal T = I - (1-p)/(N(N+D+U-1)) A; column M of T holds the
// one-step transition probabilities out of state M.
class EvolutionMatrix {
public:
    explicit EvolutionMatrix(const ModelParams& params);

    const ModelParams& params() const { return params_; }
    std::size_t dimension() const { return t_diag_.size(); }
    double scale() const { return scale_; }

    // Storage convention: sub[i] = M(i,i-1), diag[i] = M(i,i), super[i] = M(i,i+1).
    std::span<const double> a_sub() const { return a_sub_; }
    std::span<const double> a_diag() const { return a_diag_; }
    std::span<const double> a_super() const { return a_super_; }
    std::span<const double> t_sub() const { return t_sub_; }
    std::span<const double> t_diag() const { return t_diag_; }
    std::span<const double> t_super() const { return t_super_; }

    double t_at(std::size_t row, std::size_t col) const;
    double a_at(std::size_t row, std::size_t col) const;

    // y = T x
    std::vector<double> apply(std::span<const double> x) const;
    // Row-major dense copy of T.
    std::vector<double> dense() const;

private:
    ModelParams params_;
    double scale_;
    std::vector<double> a_sub_, a_diag_, a_super_;
    std::vector<double> t_sub_, t_diag_, t_super_;
};

EvolutionMatrix evolution_matrix(const ModelParams& params);

// lambda_r = 1 - (1-p)/(N(N+D+U-1)) r(r-1+D+U), r = 0..N.
std::vector<double> analytic_eigenvalues(const ModelParams& params);

struct Spectrum {
    std::vector<double> eigenvalues;          // analytic, index r
    std::vector<double> numeric_eigenvalues;  // from the decomposition, same order
    // Row-major (N+1)x(N+1): right(r, L) = a_{rL}, left(r, M) = b_{rM},
    // normalised so that sum_k a_{rk} b_{rk} = 1 and b_{0k} = 1.
    std::vector<double> right;
    std::vector<double> left;
    std::size_t dim = 0;

    double right_at(std::size_t r, std::size_t k) const { return right[r * dim + k]; }
    double left_at(std::size_t r, std::size_t k) const { return left[r * dim + k]; }
    double max_eigenvalue_mismatch() const;
};

// Analytic eigenvalues with numerically computed eigenvectors. Uses the
// detailed-balance symmetrisation of T, so requires u, d > 0.
Spectrum eigenvalues(const ModelParams& params);

// Eigenvalues of T by a general dense (non-symmetric) eigensolver, sorted
// descending. Independent of the symmetrisation used by eigenvalues().
std::vector<double> dense_eigenvalues(const EvolutionMatrix& matrix);

struct TransitionProbability {
    double value = 0.0;
    bool spectral = true;    // false when the iterated-matrix fallback ran
    std::string diagnostic;  // why the fallback ran
};

// P(L, t; M, 0) = sum_r b_{rM} a_{rL} lambda_r^t.
TransitionProbability transition_probability(int from_state, int to_state, long long t,
                                              const ModelParams& params);

// (T^t)_{L,M} by repeated application of T (or squaring for long horizons).
double transition_probability_iterated(int from_state, int to_state, long long t,
                                       const ModelParams& params);

struct EffectiveStrengths {
    double u = 0.0;
    double d = 0.0;
};

// (fU, fD) with f = (N-1)/k_av.
EffectiveStrengths effective_params(double u, double d, const TopologySpec& topology);

struct WrightFisherParams {
    double mu1 = 0.0;  // A1 -> A2
    double mu2 = 0.0;  // A2 -> A1
    int n_pop = 1;
};

// U = 2 mu2 (N-1)/(1-mu1-mu2), D = 2 mu1 (N-1)/(1-mu1-mu2).
EffectiveStrengths wright_fisher_map(const WrightFisherParams& wf);

// 0.5 * sum |p - q|
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace comove::model
