#include "comove/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "comove/error.hpp"
#include "comove/kernels.hpp"
#include "comove/parallel.hpp"

namespace comove {

std::string TopologySpec::describe() const {
    std::ostringstream os;
    switch (kind) {
        case TopologyKind::Full: os << "full"; break;
        case TopologyKind::RegularRandom: os << "regular-random"; break;
        case TopologyKind::EdgeList: os << "edge-list"; break;
    }
    os << "(N=" << n_nodes << ", k_av=" << k_av << ", f=" << rescale_factor << ")";
    return os.str();
}

}  // namespace comove

namespace comove::netsim {
namespace {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

Edge ordered(std::uint32_t a, std::uint32_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }

TopologySpec from_edges(TopologyKind kind, int n_nodes, const std::vector<Edge>& edges) {
    TopologySpec t;
    t.kind = kind;
    t.n_nodes = n_nodes;
    std::vector<std::uint32_t> degree(n_nodes, 0);
    for (auto [a, b] : edges) {
        ++degree[a];
        ++degree[b];
    }
    for (int i = 0; i < n_nodes; ++i)
        if (degree[i] == 0)
            throw ValidationError("variable node " + std::to_string(i) +
                                  " has degree 0 (disconnected from all neighbours)");
    t.offsets.assign(n_nodes + 1, 0);
    for (int i = 0; i < n_nodes; ++i) t.offsets[i + 1] = t.offsets[i] + degree[i];
    t.neighbors.resize(t.offsets.back());
    std::vector<std::uint32_t> fill(t.offsets.begin(), t.offsets.end() - 1);
    for (auto [a, b] : edges) {
        t.neighbors[fill[a]++] = b;
        t.neighbors[fill[b]++] = a;
    }
    t.k_av = 2.0 * static_cast<double>(edges.size()) / n_nodes;
    t.rescale_factor = (n_nodes - 1.0) / t.k_av;
    return t;
}

}  // namespace

TopologySpec full_topology(int n_nodes) {
    if (n_nodes < 2) throw ValidationError("a full topology needs at least 2 variable nodes");
    TopologySpec t;
    t.kind = TopologyKind::Full;
    t.n_nodes = n_nodes;
    t.k_av = n_nodes - 1.0;
    t.rescale_factor = 1.0;
    return t;
}

TopologySpec regular_random_topology(int n_nodes, int degree, std::uint64_t seed) {
    if (n_nodes < 2) throw ValidationError("regular graph needs at least 2 nodes");
    if (degree < 1 || degree > n_nodes - 1)
        throw ValidationError("regular degree must lie in [1, N-1]");
    if ((static_cast<long long>(degree) * n_nodes) % 2 != 0)
        throw ValidationError("k * N must be even for a k-regular graph");

    const auto n = static_cast<std::uint32_t>(n_nodes);
    std::vector<Edge> edges;
    std::set<Edge> present;
    auto add = [&](std::uint32_t a, std::uint32_t b) {
        const Edge e = ordered(a, b);
        if (present.insert(e).second) edges.push_back(e);
    };
    for (std::uint32_t i = 0; i < n; ++i)
        for (int s = 1; s <= degree / 2; ++s) add(i, (i + s) % n);
    if (degree % 2 == 1)
        for (std::uint32_t i = 0; i < n / 2; ++i) add(i, i + n / 2);

    // Complete graph admits no swaps.
    if (degree < n_nodes - 1 && edges.size() >= 2) {
        Rng rng = make_stream(seed, 0x7090);
        const std::size_t target = 10 * edges.size();
        std::size_t accepted = 0;
        std::size_t attempts = 0;
        while (accepted < target && attempts < 1000 * target) {
            ++attempts;
            const std::size_t i = uniform_below(rng, edges.size());
            const std::size_t j = uniform_below(rng, edges.size());
            if (i == j) continue;
            auto [a, b] = edges[i];
            auto [c, d] = edges[j];
            if (uniform01(rng) < 0.5) std::swap(c, d);
            // (a,b),(c,d) -> (a,d),(c,b)
            if (a == d || c == b) continue;
            const Edge e1 = ordered(a, d);
            const Edge e2 = ordered(c, b);
            if (e1 == e2 || present.count(e1) || present.count(e2)) continue;
            present.erase(edges[i]);
            present.erase(edges[j]);
            present.insert(e1);
            present.insert(e2);
            edges[i] = e1;
            edges[j] = e2;
            ++accepted;
        }
    }
    std::sort(edges.begin(), edges.end());
    return from_edges(TopologyKind::RegularRandom, n_nodes, edges);
}

TopologySpec parse_edge_list(std::istream& in, int n_nodes, const std::string& source) {
    std::vector<Edge> edges;
    std::set<Edge> seen;
    std::string line;
    std::size_t line_no = 0;
    long long max_index = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        long long a = 0, b = 0;
        if (!(fields >> a)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw ParseError(source, line_no, "expected two node indices");
        }
        if (!(fields >> b)) throw ParseError(source, line_no, "expected two node indices");
        std::string extra;
        if (fields >> extra) throw ParseError(source, line_no, "unexpected trailing field '" + extra + "'");
        if (a < 0 || b < 0) throw ParseError(source, line_no, "node indices must be non-negative");
        if (a == b) throw ParseError(source, line_no, "self-loop on node " + std::to_string(a));
        if (n_nodes > 0 && (a >= n_nodes || b >= n_nodes))
            throw ParseError(source, line_no, "node index out of range for N=" + std::to_string(n_nodes));
        const Edge e = ordered(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
        if (!seen.insert(e).second)
            throw ParseError(source, line_no, "edge " + std::to_string(e.first) + " " +
                                                  std::to_string(e.second) + " listed twice");
        edges.push_back(e);
        max_index = std::max({max_index, a, b});
    }
    const int n = n_nodes > 0 ? n_nodes : static_cast<int>(max_index + 1);
    if (n < 2) throw ValidationError(source + ": edge list defines no graph");
    return from_edges(TopologyKind::EdgeList, n, edges);
}

TopologySpec load_edge_list(const std::string& path, int n_nodes) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open edge list '" + path + "'");
    return parse_edge_list(in, n_nodes, path);
}

TopologySpec build_topology(const TopologyRequest& request, int n_nodes) {
    switch (request.kind) {
        case TopologyKind::Full: return full_topology(n_nodes);
        case TopologyKind::RegularRandom:
            return regular_random_topology(n_nodes, request.degree, request.seed);
        case TopologyKind::EdgeList: return load_edge_list(request.path, n_nodes);
    }
    throw ValidationError("unknown topology kind");
}

NetworkState::NetworkState(std::shared_ptr<const TopologySpec> topology, int frozen_up,
                           int frozen_down, Rng& rng)
    : topology_(std::move(topology)), frozen_up_(frozen_up), frozen_down_(frozen_down) {
    if (!topology_ || topology_->n_nodes < 1) throw ValidationError("empty topology");
    if (frozen_up < 0 || frozen_down < 0) throw ValidationError("frozen counts must be >= 0");
    signs_.resize(topology_->n_nodes);
    for (auto& s : signs_) {
        s = (rng() >> 63) ? 1 : -1;
        up_count_ += s > 0;
    }
}

NetworkState::NetworkState(std::shared_ptr<const TopologySpec> topology, int frozen_up,
                           int frozen_down, int up_count)
    : topology_(std::move(topology)), frozen_up_(frozen_up), frozen_down_(frozen_down) {
    if (!topology_ || topology_->n_nodes < 1) throw ValidationError("empty topology");
    if (frozen_up < 0 || frozen_down < 0) throw ValidationError("frozen counts must be >= 0");
    if (up_count < 0 || up_count > topology_->n_nodes)
        throw ValidationError("initial up count outside [0, N]");
    signs_.assign(topology_->n_nodes, -1);
    std::fill_n(signs_.begin(), up_count, std::int8_t{1});
    up_count_ = up_count;
}

void NetworkState::step(double p, Rng& rng) {
    const TopologySpec& topo = *topology_;
    const auto n = static_cast<std::uint64_t>(topo.n_nodes);
    const auto node = static_cast<std::uint32_t>(uniform_below(rng, n));
    if (p > 0.0 && uniform01(rng) < p) return;

    const bool full = topo.kind == TopologyKind::Full;
    const std::uint64_t degree = full ? n - 1 : topo.offsets[node + 1] - topo.offsets[node];
    const std::uint64_t frozen = static_cast<std::uint64_t>(frozen_up_) + frozen_down_;
    if (degree + frozen == 0) return;
    const std::uint64_t pick = uniform_below(rng, degree + frozen);

    std::int8_t next;
    if (pick < static_cast<std::uint64_t>(frozen_up_)) {
        next = 1;
    } else if (pick < frozen) {
        next = -1;
    } else {
        auto idx = static_cast<std::uint32_t>(pick - frozen);
        std::uint32_t source;
        if (full)
            source = idx >= node ? idx + 1 : idx;
        else
            source = topo.neighbors[topo.offsets[node] + idx];
        next = signs_[source];
    }
    const std::int8_t prev = signs_[node];
    if (next != prev) {
        signs_[node] = next;
        up_count_ += next > 0 ? 1 : -1;
    }
}

void NetworkState::set_frozen(int frozen_up, int frozen_down) {
    if (frozen_up < 0 || frozen_down < 0) throw ValidationError("frozen counts must be >= 0");
    frozen_up_ = frozen_up;
    frozen_down_ = frozen_down;
}

bool NetworkState::consistent() const {
    return up_count_ == std::count(signs_.begin(), signs_.end(), std::int8_t{1});
}

void SimConfig::validate() const {
    if (burn_in_sweeps < 0) throw ValidationError("burn_in_sweeps must be >= 0");
    if (sample_sweeps < 1) throw ValidationError("sample_sweeps must be >= 1");
    if (thin < 1) throw ValidationError("thin must be >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p must lie in [0, 1]");
    if (replicas < 1) throw ValidationError("replicas must be >= 1");
}

std::vector<double> EmpiricalDist::frequencies() const {
    std::vector<double> f(counts.size(), 0.0);
    if (n_samples == 0) return f;
    for (std::size_t k = 0; k < counts.size(); ++k)
        f[k] = static_cast<double>(counts[k]) / static_cast<double>(n_samples);
    return f;
}

void EmpiricalDist::merge(const EmpiricalDist& other) {
    if (counts.empty()) {
        *this = other;
        return;
    }
    if (other.counts.size() != counts.size()) throw ValidationError("histogram size mismatch");
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
    n_samples += other.n_samples;
}

EmpiricalDist run_chain(std::shared_ptr<const TopologySpec> topology, int u, int d,
                        const SimConfig& config, int replica) {
    config.validate();
    Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(replica));
    NetworkState state(std::move(topology), u, d, rng);
    for (long long s = 0; s < config.burn_in_sweeps; ++s) state.sweep(config.p, rng);

    EmpiricalDist dist;
    dist.n_nodes = state.n_nodes();
    dist.counts.assign(state.n_nodes() + 1, 0);
    for (long long s = 0; s < config.sample_sweeps; ++s) {
        for (long long t = 0; t < config.thin; ++t) state.sweep(config.p, rng);
        ++dist.counts[state.up_count()];
    }
    dist.n_samples = config.sample_sweeps;
    return dist;
}

std::vector<EmpiricalDist> run_replicas(std::shared_ptr<const TopologySpec> topology, int u,
                                        int d, const SimConfig& config) {
    config.validate();
    std::vector<EmpiricalDist> out(config.replicas);
    parallel_for(out.size(), [&](std::size_t r) {
        out[r] = run_chain(topology, u, d, config, static_cast<int>(r));
    });
    return out;
}

EmpiricalDist run(std::shared_ptr<const TopologySpec> topology, int u, int d,
                  const SimConfig& config) {
    EmpiricalDist merged;
    for (const auto& part : run_replicas(std::move(topology), u, d, config)) merged.merge(part);
    return merged;
}

void write_histogram_csv(std::ostream& out, const EmpiricalDist& dist) {
    out << "k,count\n";
    for (std::size_t k = 0; k < dist.counts.size(); ++k) out << k << ',' << dist.counts[k] << '\n';
}

namespace {

// Autocorrelation of x at each lag, using the segment's own mean and variance.
std::vector<double> autocorrelation(std::span<const double> x, std::span<const std::size_t> lags) {
    std::vector<double> centred(x.begin(), x.end());
    const auto mv = kernels::mean_var(centred);
    for (auto& v : centred) v -= mv.mean;
    const double c0 = kernels::lagged_dot(centred, 0) / static_cast<double>(centred.size());
    std::vector<double> acf(lags.size(), 0.0);
    if (c0 <= 0.0) return acf;
    for (std::size_t i = 0; i < lags.size(); ++i) {
        const double ck = kernels::lagged_dot(centred, lags[i]) / static_cast<double>(centred.size());
        acf[i] = ck / c0;
    }
    return acf;
}

// Least-squares slope through the origin of -log(acf) against lag, over lags
// whose autocorrelation lies in [0.1, 0.9]. Returns nullopt if none qualify.
std::optional<double> decay_rate(std::span<const std::size_t> lags, std::span<const double> acf) {
    double sxy = 0.0, sxx = 0.0;
    int used = 0;
    for (std::size_t i = 0; i < lags.size(); ++i) {
        if (acf[i] < 0.1 || acf[i] > 0.9) continue;
        const double x = static_cast<double>(lags[i]);
        sxy += x * -std::log(acf[i]);
        sxx += x * x;
        ++used;
    }
    if (used == 0) return std::nullopt;
    return sxy / sxx;
}

}  // namespace

RelaxationEstimate relaxation_estimate(std::shared_ptr<const TopologySpec> topology, int u, int d,
                                       const SimConfig& config) {
    config.validate();
    RelaxationEstimate est;
    const int n = topology->n_nodes;
    if (topology->kind == TopologyKind::Full && n + u + d - 1 > 0)
        est.analytic_rate = (1.0 - config.p) * (u + d) / (static_cast<double>(n) * (n + u + d - 1));

    Rng rng = make_stream(config.seed, 0);
    NetworkState state(topology, u, d, rng);
    for (long long s = 0; s < config.burn_in_sweeps; ++s) state.sweep(config.p, rng);

    const long long steps = config.sample_sweeps * n;
    est.steps = steps;
    std::vector<double> series(static_cast<std::size_t>(steps));
    for (auto& v : series) {
        state.step(config.p, rng);
        v = state.up_count();
    }

    constexpr std::size_t kBatches = 20;
    const std::size_t batch_len = series.size() / kBatches;
    std::vector<std::size_t> lags;
    for (double lag = 1.0; lag < batch_len / 10.0; lag *= 1.2) {
        const auto l = static_cast<std::size_t>(lag);
        if (lags.empty() || lags.back() != l) lags.push_back(l);
    }

    const auto whole = kernels::mean_var(series);
    if (whole.variance == 0.0 || lags.empty()) {
        est.decaying = false;
        est.rate = 0.0;
        est.warning = whole.variance == 0.0 ? "k never changes: autocorrelation does not decay"
                                             : "sample too short to form lags";
        return est;
    }

    std::vector<double> pooled(lags.size(), 0.0);
    std::vector<double> batch_rates;
    for (std::size_t b = 0; b < kBatches; ++b) {
        std::span<const double> seg(series.data() + b * batch_len, batch_len);
        const auto acf = autocorrelation(seg, lags);
        for (std::size_t i = 0; i < lags.size(); ++i) pooled[i] += acf[i] / kBatches;
        if (auto r = decay_rate(lags, acf)) batch_rates.push_back(*r);
    }
    const auto rate = decay_rate(lags, pooled);
    if (!rate) {
        est.decaying = false;
        est.warning = "sample too short for a stable fit: no lag with autocorrelation in [0.1, 0.9]";
        return est;
    }
    est.rate = *rate;
    if (batch_rates.size() >= 2) {
        const auto mv = kernels::mean_var(batch_rates);
        est.std_error = std::sqrt(mv.variance / static_cast<double>(batch_rates.size()));
    }
    if (batch_rates.size() < 2 || est.std_error > 0.25 * est.rate)
        est.warning = "sample too short for a stable fit: relative standard error above 25%";
    return est;
}

}  // namespace comove::netsim
