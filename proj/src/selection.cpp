#include "tge/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "tge/parallel.hpp"

namespace tge {

namespace {

int64_t rounded_keep_count(std::size_t n, double ratio) {
    const int64_t r = static_cast<int64_t>(std::floor(static_cast<double>(n) * ratio + 0.5));
    return std::max<int64_t>(1, r);
}

RetainedTokens take_top(std::span<const float> tokens, uint32_t dim,
                        const AttentionMap& scores, int64_t keep) {
    const auto ranked = score_tokens(scores);
    RetainedTokens out;
    out.dim = dim;
    out.source_indices.reserve(keep);
    out.scores.reserve(keep);
    out.vectors.resize(static_cast<std::size_t>(keep) * dim);
    for (int64_t i = 0; i < keep; ++i) {
        const auto& [idx, weight] = ranked[static_cast<std::size_t>(i)];
        out.source_indices.push_back(idx);
        out.scores.push_back(weight);
        std::memcpy(out.vectors.data() + static_cast<std::size_t>(i) * dim,
                    tokens.data() + static_cast<std::size_t>(idx) * dim, dim * sizeof(float));
    }
    return out;
}

}  // namespace

void SelectionConfig::validate() const {
    if (!(ratio_r > 0.0 && ratio_r <= 1.0)) {
        throw Error(ErrorKind::config, "selection ratio_r must be in (0, 1]");
    }
    if (budget_override && *budget_override < 1) {
        throw Error(ErrorKind::config, "selection budget must be >= 1");
    }
}

std::vector<std::pair<int64_t, double>> score_tokens(const AttentionMap& cls_attention) {
    std::vector<std::pair<int64_t, double>> ranked(cls_attention.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        ranked[i] = {static_cast<int64_t>(i), cls_attention.weights[i]};
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ranked;
}

RetainedTokens select_anchored(std::span<const float> tokens, uint32_t dim,
                               const AttentionMap& cls_attention, const SelectionConfig& config) {
    config.validate();
    const std::size_t n = cls_attention.size();
    if (dim == 0 || tokens.size() != n * dim) {
        throw Error(ErrorKind::shape, "token matrix is not n x d");
    }
    int64_t keep;
    if (config.budget_override) {
        keep = *config.budget_override;
        if (keep > static_cast<int64_t>(n)) {
            throw Error(ErrorKind::budget, "budget " + std::to_string(keep) + " exceeds " +
                                               std::to_string(n) + " tokens");
        }
    } else {
        keep = std::min<int64_t>(rounded_keep_count(n, config.ratio_r), n);
    }
    return take_top(tokens, dim, cls_attention, keep);
}

std::pair<RetainedTokens, CompressionReport> compress_grid(
    const TokenGrid& grid, const EncodedOutput& encoder_output, const AffinityConfig& affinity,
    const SelectionConfig& selection, ClusterAssignment* assignment_out) {
    selection.validate();
    const std::size_t n = grid.token_count();
    const AttentionMap& attention = encoder_output.cls_attention_second_to_last;
    if (attention.size() != n) {
        throw Error(ErrorKind::shape, "encoder output does not correspond to the grid");
    }
    int64_t target;
    if (selection.budget_override) {
        target = *selection.budget_override;
        if (target > static_cast<int64_t>(n)) {
            throw Error(ErrorKind::budget, "budget " + std::to_string(target) + " exceeds " +
                                               std::to_string(n) + " grid tokens");
        }
    } else {
        target = rounded_keep_count(n, selection.ratio_r);
    }

    // step 1: background pruning by affinity clustering
    const ClusterAssignment assignment = cluster_grid(grid, affinity);
    const PooledClusters pooled = pool_clusters(grid, assignment);

    // pooled tokens inherit the sum of their members' attention mass
    std::vector<double> pooled_weights(pooled.count(), 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        pooled_weights[assignment.cluster_of[t]] += attention.weights[t];
    }
    const AttentionMap pooled_attention = AttentionMap::from_weights(std::move(pooled_weights));

    // step 2: anchored selection enforces the budget; never re-split clusters
    const int64_t keep = std::min<int64_t>(target, static_cast<int64_t>(pooled.count()));
    SelectionConfig step2;
    step2.budget_override = keep;
    RetainedTokens retained = select_anchored(pooled.vectors, pooled.dim, pooled_attention, step2);

    // rewrite pooled positions as original representative indices
    for (auto& idx : retained.source_indices) {
        idx = pooled.representative_index[static_cast<std::size_t>(idx)];
    }

    CompressionReport report;
    report.original_token_count = static_cast<int64_t>(n);
    report.retained_token_count = static_cast<int64_t>(retained.count());
    report.tokens_per_grid = target;
    report.compression_ratio =
        static_cast<double>(n) / static_cast<double>(retained.count());
    report.estimated_tflops =
        estimate_flops(default_flops_model(), static_cast<int64_t>(retained.count()));
    report.retained_indices = retained.source_indices;
    report.cluster_sizes = pooled.cluster_sizes;
    report.validate();
    if (assignment_out != nullptr) *assignment_out = assignment;
    return {std::move(retained), std::move(report)};
}

ImageCompression compress_image(std::span<const float> pixels, const GridLayout& layout,
                                const EncoderParams& encoder, const AffinityConfig& affinity,
                                const SelectionConfig& selection, const FlopsModel& flops,
                                int jobs) {
    const PatchCount counts = patch_count(layout);
    const std::size_t expected_pixels =
        static_cast<std::size_t>(layout.image_width) * layout.image_height;
    if (pixels.size() != expected_pixels) {
        throw Error(ErrorKind::shape, "pixel buffer does not match the layout");
    }
    const int side = static_cast<int>(layout.grid_side_px);
    const int m = static_cast<int>(layout.patches_per_side());
    const int64_t grids_x = layout.grids_x();

    struct GridResult {
        RetainedTokens retained;
        CompressionReport report;
        ClusterAssignment assignment;
    };
    std::vector<GridResult> results(counts.grids_total);

    parallel_for(static_cast<std::size_t>(counts.grids_total), jobs, [&](std::size_t g) {
        const int64_t gr = static_cast<int64_t>(g) / grids_x;
        const int64_t gc = static_cast<int64_t>(g) % grids_x;
        std::vector<float> grid_pixels(static_cast<std::size_t>(side) * side);
        for (int y = 0; y < side; ++y) {
            const float* src = pixels.data() + (gr * side + y) * layout.image_width + gc * side;
            std::copy(src, src + side, grid_pixels.data() + static_cast<std::size_t>(y) * side);
        }
        const EncodedOutput enc = encode(grid_pixels, encoder, layout);
        const TokenGrid tokens = enc.final_tokens(m, m);
        ClusterAssignment assignment;
        auto [retained, report] = compress_grid(tokens, enc, affinity, selection, &assignment);
        results[g] = GridResult{std::move(retained), std::move(report), std::move(assignment)};
    });

    ImageCompression out;
    out.per_grid.reserve(results.size());
    out.per_grid_reports.reserve(results.size());
    CompressionReport& total = out.report;
    total.original_token_count = counts.tokens_total_raw;
    total.tokens_per_grid = results.empty() ? 0 : results[0].report.tokens_per_grid;
    for (std::size_t g = 0; g < results.size(); ++g) {
        const int64_t base = static_cast<int64_t>(g) * counts.tokens_per_grid_raw;
        GridResult& r = results[g];
        total.retained_token_count += r.report.retained_token_count;
        for (int64_t idx : r.report.retained_indices) {
            total.retained_indices.push_back(base + idx);
        }
        total.cluster_sizes.insert(total.cluster_sizes.end(), r.report.cluster_sizes.begin(),
                                   r.report.cluster_sizes.end());
        out.per_grid.push_back(std::move(r.retained));
        out.per_grid_reports.push_back(std::move(r.report));
        out.per_grid_assignments.push_back(std::move(r.assignment));
    }
    total.compression_ratio = static_cast<double>(total.original_token_count) /
                              static_cast<double>(total.retained_token_count);
    total.estimated_tflops = estimate_flops(flops, total.retained_token_count);
    total.validate();
    return out;
}

}  // namespace tge
