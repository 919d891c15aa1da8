#include "tge/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tge {

namespace {

struct NeighborOffsets {
    int count;
    int dr[8];
    int dc[8];
};

NeighborOffsets offsets_for(Neighborhood n) {
    NeighborOffsets out{};
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (n == Neighborhood::four_connected && std::abs(dr) + std::abs(dc) != 1) continue;
            out.dr[out.count] = dr;
            out.dc[out.count] = dc;
            ++out.count;
        }
    }
    return out;
}

std::vector<double> token_norms(const TokenGrid& grid) {
    std::vector<double> norms(grid.token_count());
    for (std::size_t i = 0; i < norms.size(); ++i) {
        const auto t = grid.token(i);
        double acc = 0.0;
        for (float v : t) acc += static_cast<double>(v) * v;
        norms[i] = std::sqrt(acc);
    }
    return norms;
}

double cosine(const TokenGrid& grid, const std::vector<double>& norms, std::size_t a,
              std::size_t b) {
    if (norms[a] == 0.0 || norms[b] == 0.0) return 0.0;
    const auto ta = grid.token(a);
    const auto tb = grid.token(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) acc += static_cast<double>(ta[i]) * tb[i];
    return acc / (norms[a] * norms[b]);
}

// cosines between each token and its in-grid neighbors, indexed by offset slot
struct NeighborCosines {
    NeighborOffsets offsets;
    int64_t rows, cols;
    std::vector<double> cos;  // token_count x offsets.count, NaN where off-grid

    bool neighbor(std::size_t token, int slot, std::size_t& out) const {
        const int64_t r = static_cast<int64_t>(token) / cols + offsets.dr[slot];
        const int64_t c = static_cast<int64_t>(token) % cols + offsets.dc[slot];
        if (r < 0 || r >= rows || c < 0 || c >= cols) return false;
        out = static_cast<std::size_t>(r * cols + c);
        return true;
    }
};

NeighborCosines neighbor_cosines(const TokenGrid& grid, const AffinityConfig& config) {
    NeighborCosines nc;
    nc.offsets = offsets_for(config.neighborhood);
    nc.rows = grid.rows();
    nc.cols = grid.cols();
    const std::vector<double> norms = token_norms(grid);
    nc.cos.assign(grid.token_count() * nc.offsets.count, 0.0);
    for (std::size_t t = 0; t < grid.token_count(); ++t) {
        for (int s = 0; s < nc.offsets.count; ++s) {
            std::size_t nb;
            if (nc.neighbor(t, s, nb)) {
                nc.cos[t * nc.offsets.count + s] = cosine(grid, norms, t, nb);
            }
        }
    }
    return nc;
}

std::vector<int64_t> grow_from(const NeighborCosines& nc, int64_t seed, int steps_n,
                               double threshold, std::vector<int64_t>& stamp, int64_t mark) {
    std::vector<int64_t> members{seed};
    stamp[seed] = mark;
    std::vector<int64_t> frontier{seed};
    std::vector<int64_t> next;
    for (int step = 0; step < steps_n && !frontier.empty(); ++step) {
        next.clear();
        for (int64_t p : frontier) {
            for (int s = 0; s < nc.offsets.count; ++s) {
                std::size_t nb;
                if (!nc.neighbor(static_cast<std::size_t>(p), s, nb)) continue;
                if (stamp[nb] == mark) continue;
                if (nc.cos[static_cast<std::size_t>(p) * nc.offsets.count + s] >= threshold) {
                    stamp[nb] = mark;
                    members.push_back(static_cast<int64_t>(nb));
                    next.push_back(static_cast<int64_t>(nb));
                }
            }
        }
        frontier.swap(next);
    }
    std::sort(members.begin(), members.end());
    return members;
}

struct UnionFind {
    std::vector<int64_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }

    int64_t find(int64_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    void unite(int64_t a, int64_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[b] = a; else parent[a] = b;
    }
};

}  // namespace

void AffinityConfig::validate() const {
    if (steps_n < 1) throw Error(ErrorKind::config, "affinity steps_n must be >= 1");
    if (!(temperature > 0.0)) throw Error(ErrorKind::config, "affinity temperature must be > 0");
    if (!(join_threshold >= 0.0 && join_threshold <= 1.0)) {
        throw Error(ErrorKind::config, "affinity join_threshold must be in [0, 1]");
    }
}

std::vector<NeighborAffinity> neighbor_affinity(const TokenGrid& grid, TokenCoord p,
                                                const AffinityConfig& config) {
    config.validate();
    if (grid.token_count() < 2) {
        throw Error(ErrorKind::input, "neighbor affinity needs at least 2 tokens");
    }
    if (p.row < 0 || p.row >= grid.rows() || p.col < 0 || p.col >= grid.cols()) {
        throw Error(ErrorKind::input, "token coordinate (" + std::to_string(p.row) + "," +
                                          std::to_string(p.col) + ") out of bounds");
    }
    const NeighborOffsets offs = offsets_for(config.neighborhood);
    const std::vector<double> norms = token_norms(grid);
    const std::size_t self = static_cast<std::size_t>(p.row) * grid.cols() + p.col;

    std::vector<TokenCoord> coords;
    std::vector<double> logits;
    for (int s = 0; s < offs.count; ++s) {
        const int64_t r = p.row + offs.dr[s];
        const int64_t c = p.col + offs.dc[s];
        if (r < 0 || r >= grid.rows() || c < 0 || c >= grid.cols()) continue;
        const std::size_t nb = static_cast<std::size_t>(r) * grid.cols() + c;
        coords.push_back(TokenCoord{r, c});
        logits.push_back(cosine(grid, norms, self, nb) / config.temperature);
    }

    // stable softmax over the in-grid neighborhood
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    std::vector<double> weights(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        weights[i] = std::exp(logits[i] - max_logit);
        sum += weights[i];
    }
    std::vector<NeighborAffinity> out(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        out[i] = NeighborAffinity{coords[i], weights[i] / sum};
    }
    return out;
}

std::vector<int64_t> grow_cluster(const TokenGrid& grid, int64_t seed_index,
                                  const AffinityConfig& config) {
    config.validate();
    if (seed_index < 0 || static_cast<std::size_t>(seed_index) >= grid.token_count()) {
        throw Error(ErrorKind::input, "seed index out of bounds");
    }
    const NeighborCosines nc = neighbor_cosines(grid, config);
    std::vector<int64_t> stamp(grid.token_count(), -1);
    return grow_from(nc, seed_index, config.steps_n, config.join_threshold, stamp, 0);
}

ClusterAssignment cluster_grid(const TokenGrid& grid, const AffinityConfig& config) {
    config.validate();
    const std::size_t n = grid.token_count();
    const NeighborCosines nc = neighbor_cosines(grid, config);

    UnionFind uf(n);
    std::vector<int64_t> stamp(n, -1);
    for (std::size_t seed = 0; seed < n; ++seed) {
        const std::vector<int64_t> members =
            grow_from(nc, static_cast<int64_t>(seed), config.steps_n, config.join_threshold,
                      stamp, static_cast<int64_t>(seed));
        for (int64_t m : members) uf.unite(static_cast<int64_t>(seed), m);
    }

    // contiguous ids ordered by each cluster's smallest member index
    ClusterAssignment out;
    out.cluster_of.assign(n, -1);
    for (std::size_t t = 0; t < n; ++t) {
        const int64_t root = uf.find(static_cast<int64_t>(t));
        if (out.cluster_of[root] == -1) {
            out.cluster_of[root] = out.cluster_count++;
        }
        out.cluster_of[t] = out.cluster_of[root];
    }
    return out;
}

PooledClusters pool_clusters(const TokenGrid& grid, const ClusterAssignment& assignment) {
    const std::size_t n = grid.token_count();
    if (assignment.cluster_of.size() != n || assignment.cluster_count < 1) {
        throw Error(ErrorKind::shape, "cluster assignment does not partition the grid");
    }
    const std::size_t k = static_cast<std::size_t>(assignment.cluster_count);
    const uint32_t dim = grid.dim();

    PooledClusters out;
    out.dim = dim;
    out.cluster_sizes.assign(k, 0);
    out.representative_index.assign(k, -1);
    std::vector<double> acc(k * dim, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        const int64_t c = assignment.cluster_of[t];
        if (c < 0 || static_cast<std::size_t>(c) >= k) {
            throw Error(ErrorKind::shape, "cluster id out of range");
        }
        if (out.representative_index[c] == -1) out.representative_index[c] = static_cast<int64_t>(t);
        ++out.cluster_sizes[c];
        const auto tok = grid.token(t);
        double* dst = acc.data() + static_cast<std::size_t>(c) * dim;
        for (uint32_t d = 0; d < dim; ++d) dst[d] += tok[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (out.cluster_sizes[c] == 0) {
            throw Error(ErrorKind::shape, "empty cluster id " + std::to_string(c));
        }
    }
    out.vectors.resize(k * dim);
    for (std::size_t c = 0; c < k; ++c) {
        const double inv = 1.0 / static_cast<double>(out.cluster_sizes[c]);
        for (uint32_t d = 0; d < dim; ++d) {
            out.vectors[c * dim + d] = static_cast<float>(acc[c * dim + d] * inv);
        }
    }
    return out;
}

}  // namespace tge
