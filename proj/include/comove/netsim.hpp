#pragma once

// Monte Carlo simulation of the copy dynamics on a graph of N variable
// nodes plus U up-frozen and D down-frozen nodes wired to every variable node.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "comove/rng.hpp"
#include "comove/topology.hpp"

namespace comove::netsim {

struct TopologyRequest {
    TopologyKind kind = TopologyKind::Full;
    int degree = 0;          // RegularRandom
    std::uint64_t seed = 0;  // RegularRandom
    std::string path;        // EdgeList
};

TopologySpec full_topology(int n_nodes);
// Uniform-ish random k-regular simple graph: circulant start, then 10|E|
// accepted double-edge swaps.
TopologySpec regular_random_topology(int n_nodes, int degree, std::uint64_t seed);
// n_nodes <= 0 infers N from the largest index.
TopologySpec parse_edge_list(std::istream& in, int n_nodes, const std::string& source = "<edges>");
TopologySpec load_edge_list(const std::string& path, int n_nodes);
TopologySpec build_topology(const TopologyRequest& request, int n_nodes);

class NetworkState {
public:
    // Random initial signs drawn from rng.
    NetworkState(std::shared_ptr<const TopologySpec> topology, int frozen_up, int frozen_down,
                 Rng& rng);
    // All nodes start at +1 for the first `up_count` indices, -1 after.
    NetworkState(std::shared_ptr<const TopologySpec> topology, int frozen_up, int frozen_down,
                 int up_count);

    int n_nodes() const { return topology_->n_nodes; }
    int up_count() const { return up_count_; }
    int frozen_up() const { return frozen_up_; }
    int frozen_down() const { return frozen_down_; }
    std::span<const std::int8_t> signs() const { return signs_; }
    const TopologySpec& topology() const { return *topology_; }

    // One node update: pick a variable node uniformly; with probability p it
    // keeps its sign, otherwise it copies a source drawn uniformly from its
    // variable neighbours and all U + D frozen nodes.
    void step(double p, Rng& rng);
    void sweep(double p, Rng& rng) {
        for (int i = 0; i < n_nodes(); ++i) step(p, rng);
    }

    // Changes the frozen influence (schedule changes in the synthetic market).
    void set_frozen(int frozen_up, int frozen_down);

    // Recounts signs; true when up_count() agrees.
    bool consistent() const;

private:
    std::shared_ptr<const TopologySpec> topology_;
    std::vector<std::int8_t> signs_;
    int up_count_ = 0;
    int frozen_up_ = 0;
    int frozen_down_ = 0;
};

struct SimConfig {
    long long burn_in_sweeps = 1000;
    long long sample_sweeps = 10000;
    long long thin = 1;  // sweeps between samples
    std::uint64_t seed = 1;
    double p = 0.0;
    int replicas = 1;  // independent chains on derived streams, merged by histogram addition

    void validate() const;
};

struct EmpiricalDist {
    int n_nodes = 0;
    std::vector<long long> counts;  // index k = 0..N
    long long n_samples = 0;

    std::vector<double> frequencies() const;
    void merge(const EmpiricalDist& other);
};

// One chain; `replica` selects the derived RNG stream.
EmpiricalDist run_chain(std::shared_ptr<const TopologySpec> topology, int u, int d,
                        const SimConfig& config, int replica);

// Per-replica histograms (config.replicas chains).
std::vector<EmpiricalDist> run_replicas(std::shared_ptr<const TopologySpec> topology, int u,
                                        int d, const SimConfig& config);

// Merged histogram over config.replicas chains.
EmpiricalDist run(std::shared_ptr<const TopologySpec> topology, int u, int d,
                  const SimConfig& config);

// CSV with header "k,count".
void write_histogram_csv(std::ostream& out, const EmpiricalDist& dist);

struct RelaxationEstimate {
    bool decaying = true;
    double rate = 0.0;    // per step
    double std_error = 0.0;  // batch-means standard error of rate
    std::optional<double> analytic_rate;  // (1-p)(U+D)/(N(N+U+D-1)) on full graphs
    long long steps = 0;
    std::string warning;  // set when relative stderr > 25% or no usable lags
};

// Exponential decay rate of the autocorrelation of k, estimated from
// config.sample_sweeps * N recorded steps after burn-in.
RelaxationEstimate relaxation_estimate(std::shared_ptr<const TopologySpec> topology, int u, int d,
                                       const SimConfig& config);

}  // namespace comove::netsim
