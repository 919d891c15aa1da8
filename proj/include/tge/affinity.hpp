#pragma once

#include <cstdint>
#include <vector>

#include "tge/token_grid.hpp"

namespace tge {

enum class Neighborhood { four_connected, eight_connected };

struct AffinityConfig {
    Neighborhood neighborhood = Neighborhood::eight_connected;
    int steps_n = 3;
    double join_threshold = 0.85;
    double temperature = 0.1;

    void validate() const;
};

struct TokenCoord {
    int64_t row = 0;
    int64_t col = 0;
};

struct NeighborAffinity {
    TokenCoord coord;
    double probability;  // q_s(p)
};

// Association probabilities q_s(p) over the in-grid neighborhood of p:
// softmax of cos(v_p, v_s) / temperature. Sums to 1. Cosine against a
// zero-norm embedding is defined as 0.
std::vector<NeighborAffinity> neighbor_affinity(const TokenGrid& grid, TokenCoord p,
                                                const AffinityConfig& config);

// Frontier growth from a seed token: for each of steps_n rounds, every
// frontier token admits neighbors with cosine >= join_threshold. Returns the
// union as sorted indices; always contains the seed.
std::vector<int64_t> grow_cluster(const TokenGrid& grid, int64_t seed_index,
                                  const AffinityConfig& config);

// Total partition of grid tokens. Cluster ids are contiguous and ordered by
// each cluster's smallest member index.
struct ClusterAssignment {
    std::vector<int64_t> cluster_of;
    int64_t cluster_count = 0;
};

// Grows a cluster from every token and merges overlapping grown sets
// (union-find over shared membership). Independent of enumeration order.
ClusterAssignment cluster_grid(const TokenGrid& grid, const AffinityConfig& config);

struct PooledClusters {
    uint32_t dim = 0;
    std::vector<float> vectors;                 // cluster_count x dim, row-major
    std::vector<int64_t> representative_index;  // smallest member per cluster
    std::vector<int64_t> cluster_sizes;

    std::size_t count() const noexcept { return cluster_sizes.size(); }
    std::span<const float> vector_of(std::size_t c) const {
        return std::span<const float>(vectors).subspan(c * dim, dim);
    }
};

// One representative per cluster: the arithmetic mean of member embeddings,
// ordered by smallest member index.
PooledClusters pool_clusters(const TokenGrid& grid, const ClusterAssignment& assignment);

}  // namespace tge
