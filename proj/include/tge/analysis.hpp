#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tge/adapter.hpp"
#include "tge/token_grid.hpp"

namespace tge {

// Embeddings of typical background terms; a token's background score is its
// highest cosine against any term.
struct BackgroundLexicon {
    struct Term {
        std::string label;
        std::vector<float> embedding;
    };
    std::vector<Term> terms;

    void validate() const;
    uint32_t dim() const { return static_cast<uint32_t>(terms.front().embedding.size()); }
};

double background_score(std::span<const float> token, const BackgroundLexicon& lexicon);

// Loads term embeddings from a TGR1 grid file, one term per token. Labels
// come from the semicolon-separated file tag, defaulting to term<i>.
BackgroundLexicon load_lexicon(const std::filesystem::path& path);

// Drops the floor(fraction * n) highest-scoring tokens (ties by ascending
// index); both lists preserve original token order.
struct PruneResult {
    std::vector<int64_t> retained;
    std::vector<int64_t> dropped;
};

PruneResult prune_background(const TokenGrid& grid, const BackgroundLexicon& lexicon,
                             double fraction = 0.5);

// Half-open pixel rectangle [x0, x1) x [y0, y1) inside one grid.
struct PixelBox {
    int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Row-major indices of all patches whose pixel area intersects the box
// (any overlap counts).
std::vector<int64_t> tokens_from_bbox(const PixelBox& bbox, const GridLayout& layout);

// Chebyshev-distance-k dilation of the index set on the patch lattice,
// clipped to grid bounds. Superset of the input.
std::vector<int64_t> buffer_ring(std::span<const int64_t> indices, const GridLayout& layout,
                                 int k);

struct AblationSpec {
    enum class Kind { object, object_buffer, register_tokens, random };

    Kind kind = Kind::object;
    std::optional<PixelBox> bbox;  // object kinds
    int buffer_k = 1;              // object_buffer
    int64_t random_n = 1;          // random
    uint64_t seed = 0;             // random

    void validate() const;
    static const char* kind_name(Kind k);
};

// Replaces every resolved token with corpus_mean; all other tokens are
// bit-identical. Returns the ablated grid and the sorted resolved indices.
std::pair<TokenGrid, std::vector<int64_t>> ablate_tokens(const TokenGrid& grid,
                                                         const AblationSpec& spec,
                                                         std::span<const float> corpus_mean,
                                                         const GridLayout& layout);

struct AblationResult {
    std::vector<int64_t> ablated_indices;
    double replacement_norm = 0.0;
    double metric_before = 0.0;
    double metric_after = 0.0;
    double decrease_percent = 0.0;
};

// Proxy degradation: the adapter's probability of target_class on the
// mean-pooled grid embedding, before vs after ablation.
AblationResult degradation_metric(const AdapterModel& proxy, const TokenGrid& grid_before,
                                  const TokenGrid& grid_after, int target_class);

}  // namespace tge
