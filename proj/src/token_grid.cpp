#include "tge/token_grid.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace tge {

const char* error_kind_name(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::config: return "config";
        case ErrorKind::layout: return "layout";
        case ErrorKind::shape: return "shape";
        case ErrorKind::format: return "format";
        case ErrorKind::budget: return "budget";
        case ErrorKind::input: return "input";
        case ErrorKind::statistics: return "statistics";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::io: return "io";
        case ErrorKind::manifest: return "manifest";
    }
    return "unknown";
}

TokenGrid::TokenGrid(uint32_t rows, uint32_t cols, uint32_t dim, std::vector<float> data,
                     std::string tag)
    : rows_(rows), cols_(cols), dim_(dim), tag_(std::move(tag)), data_(std::move(data)) {
    if (rows_ == 0 || cols_ == 0 || dim_ == 0) {
        throw Error(ErrorKind::shape, "TokenGrid dimensions must be positive, got " +
                                          std::to_string(rows_) + "x" + std::to_string(cols_) +
                                          "x" + std::to_string(dim_));
    }
    const std::size_t expected = static_cast<std::size_t>(rows_) * cols_ * dim_;
    if (data_.size() != expected) {
        throw Error(ErrorKind::shape, "TokenGrid data length " + std::to_string(data_.size()) +
                                          " does not match rows*cols*dim = " +
                                          std::to_string(expected));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw Error(ErrorKind::numeric,
                        "TokenGrid component " + std::to_string(i) + " is not finite");
        }
    }
}

GridLayout::GridLayout(int64_t width, int64_t height, int64_t grid_side, int64_t patch)
    : image_width(width), image_height(height), grid_side_px(grid_side), patch_px(patch) {
    if (width <= 0 || height <= 0 || grid_side <= 0 || patch <= 0) {
        throw Error(ErrorKind::layout, "layout dimensions must be positive");
    }
    if (width % grid_side != 0 || height % grid_side != 0) {
        throw Error(ErrorKind::layout,
                    "image " + std::to_string(width) + "x" + std::to_string(height) +
                        " is not an exact multiple of grid side " + std::to_string(grid_side));
    }
    if (grid_side % patch != 0) {
        throw Error(ErrorKind::layout, "grid side " + std::to_string(grid_side) +
                                           " is not an exact multiple of patch size " +
                                           std::to_string(patch));
    }
}

PatchCount patch_count(const GridLayout& layout) {
    const int64_t grids = layout.grids_x() * layout.grids_y();
    const int64_t per_grid = layout.patches_per_side() * layout.patches_per_side();
    return PatchCount{grids, per_grid, grids * per_grid};
}

int64_t token_budget(const GridLayout& layout, int64_t tokens_per_grid) {
    const PatchCount counts = patch_count(layout);
    if (tokens_per_grid < 1) {
        throw Error(ErrorKind::budget, "tokens_per_grid must be >= 1");
    }
    if (tokens_per_grid > counts.tokens_per_grid_raw) {
        throw Error(ErrorKind::budget,
                    "tokens_per_grid " + std::to_string(tokens_per_grid) + " exceeds raw " +
                        std::to_string(counts.tokens_per_grid_raw) + " tokens per grid");
    }
    return counts.grids_total * tokens_per_grid;
}

FlopsModel fit_flops_model(std::span<const std::pair<int64_t, double>> rows) {
    if (rows.size() < 2) {
        throw Error(ErrorKind::input, "flops fit needs at least 2 rows");
    }
    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& [tokens, tflops] : rows) {
        mean_x += static_cast<double>(tokens);
        mean_y += tflops;
    }
    mean_x /= static_cast<double>(rows.size());
    mean_y /= static_cast<double>(rows.size());

    double sxx = 0.0, sxy = 0.0;
    for (const auto& [tokens, tflops] : rows) {
        const double dx = static_cast<double>(tokens) - mean_x;
        sxx += dx * dx;
        sxy += dx * (tflops - mean_y);
    }
    if (sxx == 0.0) {
        throw Error(ErrorKind::input, "flops fit is degenerate: all token counts identical");
    }
    const double slope = sxy / sxx;
    if (!(slope > 0.0)) {
        throw Error(ErrorKind::numeric, "flops fit produced a non-positive slope");
    }
    return FlopsModel{slope, mean_y - slope * mean_x};
}

double estimate_flops(const FlopsModel& model, int64_t visual_tokens) {
    if (visual_tokens < 0) {
        throw Error(ErrorKind::input, "visual_tokens must be >= 0");
    }
    const double est =
        model.slope_tflops_per_token * static_cast<double>(visual_tokens) + model.intercept_tflops;
    return std::max(est, 0.0);
}

std::span<const std::pair<int64_t, double>> default_flops_calibration() {
    static const std::pair<int64_t, double> rows[] = {
        {13824, 198.06}, {10368, 149.08}, {6912, 100.11}, {3456, 51.13}};
    return rows;
}

FlopsModel default_flops_model() { return fit_flops_model(default_flops_calibration()); }

TokenGrid pool_baseline(const TokenGrid& grid, int k) {
    if (k <= 0) {
        throw Error(ErrorKind::input, "pooling factor must be positive");
    }
    if (grid.rows() % k != 0 || grid.cols() % k != 0) {
        throw Error(ErrorKind::layout, "grid " + std::to_string(grid.rows()) + "x" +
                                           std::to_string(grid.cols()) +
                                           " is not divisible by pooling factor " +
                                           std::to_string(k));
    }
    const uint32_t out_rows = grid.rows() / k;
    const uint32_t out_cols = grid.cols() / k;
    const uint32_t dim = grid.dim();
    std::vector<float> out(static_cast<std::size_t>(out_rows) * out_cols * dim, 0.0f);
    std::vector<double> acc(dim);
    const double inv = 1.0 / (static_cast<double>(k) * k);
    for (uint32_t br = 0; br < out_rows; ++br) {
        for (uint32_t bc = 0; bc < out_cols; ++bc) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int dr = 0; dr < k; ++dr) {
                for (int dc = 0; dc < k; ++dc) {
                    const std::size_t idx =
                        (static_cast<std::size_t>(br) * k + dr) * grid.cols() +
                        (static_cast<std::size_t>(bc) * k + dc);
                    const auto tok = grid.token(idx);
                    for (uint32_t d = 0; d < dim; ++d) acc[d] += tok[d];
                }
            }
            float* dst = out.data() + (static_cast<std::size_t>(br) * out_cols + bc) * dim;
            for (uint32_t d = 0; d < dim; ++d) dst[d] = static_cast<float>(acc[d] * inv);
        }
    }
    return TokenGrid(out_rows, out_cols, dim, std::move(out), grid.tag());
}

void CompressionReport::validate() const {
    if (retained_token_count > original_token_count) {
        throw Error(ErrorKind::input, "report retains more tokens than the original");
    }
    std::unordered_set<int64_t> seen;
    for (int64_t idx : retained_indices) {
        if (idx < 0 || idx >= original_token_count) {
            throw Error(ErrorKind::input,
                        "retained index " + std::to_string(idx) + " out of range");
        }
        if (!seen.insert(idx).second) {
            throw Error(ErrorKind::input, "duplicate retained index " + std::to_string(idx));
        }
    }
    if (!cluster_sizes.empty()) {
        int64_t total = 0;
        for (int64_t s : cluster_sizes) total += s;
        if (total != original_token_count) {
            throw Error(ErrorKind::input, "cluster sizes sum to " + std::to_string(total) +
                                              ", expected " +
                                              std::to_string(original_token_count));
        }
    }
}

}  // namespace tge
