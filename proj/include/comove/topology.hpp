#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace comove {

enum class TopologyKind { Full, RegularRandom, EdgeList };

// Interaction graph among the variable nodes. Frozen nodes are not part of
// the graph: they neighbour every variable node.
struct TopologySpec {
    TopologyKind kind = TopologyKind::Full;
    int n_nodes = 0;
    double k_av = 0.0;            // average variable-node degree
    double rescale_factor = 1.0;  // (N-1)/k_av

    // CSR adjacency; empty for Full.
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> neighbors;

    int degree(int node) const {
        if (kind == TopologyKind::Full) return n_nodes - 1;
        return static_cast<int>(offsets[node + 1] - offsets[node]);
    }

    std::string describe() const;
};

}  // namespace comove
