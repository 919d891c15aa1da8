#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tge/affinity.hpp"
#include "tge/encoder.hpp"
#include "tge/token_grid.hpp"

namespace tge {

struct SelectionConfig {
    double ratio_r = 1.0;
    std::optional<int64_t> budget_override;  // absolute tokens to keep per grid

    void validate() const;
};

// Tokens surviving selection, in score order (non-increasing, ties broken by
// ascending source index). Embeddings are exact copies of their sources.
struct RetainedTokens {
    uint32_t dim = 0;
    std::vector<float> vectors;          // count x dim, row-major
    std::vector<int64_t> source_indices;
    std::vector<double> scores;

    std::size_t count() const noexcept { return source_indices.size(); }
    std::span<const float> vector_of(std::size_t i) const {
        return std::span<const float>(vectors).subspan(i * dim, dim);
    }
};

// Indices ranked by attention weight descending, ties by ascending index.
std::vector<std::pair<int64_t, double>> score_tokens(const AttentionMap& cls_attention);

// Keeps the R = budget (or round-half-up of n * ratio_r, floor 1) tokens with
// the highest attention weights.
RetainedTokens select_anchored(std::span<const float> tokens, uint32_t dim,
                               const AttentionMap& cls_attention, const SelectionConfig& config);

// Two-step compression of one encoded grid: affinity clustering pools the
// grid into cluster representatives, each scored by the sum of its members'
// CLS attention weights, then top-R selection enforces the budget. When
// pooling already lands at or under budget, all pooled tokens are retained.
// assignment_out, when given, receives the pruning stage's partition.
std::pair<RetainedTokens, CompressionReport> compress_grid(
    const TokenGrid& grid, const EncodedOutput& encoder_output, const AffinityConfig& affinity,
    const SelectionConfig& selection, ClusterAssignment* assignment_out = nullptr);

struct ImageCompression {
    std::vector<RetainedTokens> per_grid;
    std::vector<CompressionReport> per_grid_reports;
    std::vector<ClusterAssignment> per_grid_assignments;
    CompressionReport report;  // aggregate with grid-offset global indices
};

// Encodes and compresses every grid of the mosaic independently. pixels is
// the whole image, row-major. Grid work parallelizes across jobs; output is
// identical for any job count.
ImageCompression compress_image(std::span<const float> pixels, const GridLayout& layout,
                                const EncoderParams& encoder, const AffinityConfig& affinity,
                                const SelectionConfig& selection,
                                const FlopsModel& flops = default_flops_model(), int jobs = 1);

}  // namespace tge
